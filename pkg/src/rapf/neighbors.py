"""Selection of confusable old/new class pairs from text-embedding distances.

Selection looks only at the class catalog (text side); image data never enters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

UNIT_NORM_TOL = 1e-5


@dataclass(frozen=True)
class NeighborPairSet:
    """(old_class_id, new_class_id, text_distance) triples under a threshold."""

    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    threshold: float = 0.0

    def __len__(self) -> int:
        return len(self.pairs)

    def old_classes(self) -> list[int]:
        seen: dict[int, None] = {}
        for old_id, _, _ in self.pairs:
            seen.setdefault(old_id, None)
        return list(seen)

    def new_classes_of(self, old_id: int) -> list[int]:
        return [j for i, j, _ in self.pairs if i == old_id]


def text_distance_matrix(old_texts: np.ndarray, new_texts: np.ndarray) -> np.ndarray:
    """Euclidean distances between unit-norm text embeddings, old rows x new cols."""
    old_texts = np.asarray(old_texts, dtype=np.float64)
    new_texts = np.asarray(new_texts, dtype=np.float64)
    for name, t in (("old", old_texts), ("new", new_texts)):
        if t.ndim != 2:
            raise ContractViolation(f"{name} text embeddings must be a 2-d array")
        norms = np.linalg.norm(t, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ContractViolation(f"{name} text embeddings are not unit-norm")
    return np.linalg.norm(old_texts[:, None, :] - new_texts[None, :, :], axis=2)


def select_pairs(
    dist: np.ndarray,
    alpha: float,
    old_ids,
    new_ids,
    one_to_one: bool = False,
) -> NeighborPairSet:
    """All (old, new) pairs with distance strictly below ``alpha``.

    With ``one_to_one`` the sub-threshold pairs are pruned greedily by
    ascending distance so each old and each new class appears at most once.
    """
    if not 0.0 < alpha <= 2.0:
        raise ContractViolation(f"alpha must lie in (0, 2], got {alpha}")
    dist = np.asarray(dist, dtype=np.float64)
    old_ids = list(old_ids)
    new_ids = list(new_ids)
    if dist.shape != (len(old_ids), len(new_ids)):
        raise ContractViolation(
            f"distance matrix {dist.shape} does not match {len(old_ids)} old x {len(new_ids)} new ids"
        )

    rows, cols = np.nonzero(dist < alpha)
    candidates = sorted(
        (float(dist[i, j]), int(i), int(j)) for i, j in zip(rows, cols)
    )
    pairs: list[tuple[int, int, float]] = []
    used_old: set[int] = set()
    used_new: set[int] = set()
    for d, i, j in candidates:
        if one_to_one and (i in used_old or j in used_new):
            continue
        used_old.add(i)
        used_new.add(j)
        pairs.append((old_ids[i], new_ids[j], d))
    return NeighborPairSet(pairs=pairs, threshold=alpha)
