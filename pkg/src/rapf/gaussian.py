"""Per-class Gaussian models of backbone embeddings, for exemplar-free replay.

Each class keeps the mean and a shrunk covariance of its raw (pre-adapter)
image embeddings. Replay features are drawn as mean + L z with L the Cholesky
factor and z standard normal. The backbone is frozen, so stats are fitted once
per class and never change.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, InsufficientDataError, NumericalError

SHRINKAGE_FLOOR = 1e-8


@dataclass(frozen=True)
class ClassStats:
    class_id: int
    mean: np.ndarray  # (d,) float64
    covariance: np.ndarray  # (d, d) float64, symmetric positive definite
    chol_factor: np.ndarray  # (d, d) lower triangular, L @ L.T == covariance
    sample_count: int

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def fit_class(embeddings, shrinkage: float, class_id: int = -1) -> ClassStats:
    """Fit mean and shrunk covariance to a class's embeddings.

    The covariance is the unbiased (n-1) sample covariance plus a scale-aware
    ridge ``shrinkage * (tr(S)/d + 1e-8) * I``, which guarantees full rank. If
    the sample covariance is exactly zero (all embeddings identical) the ridge
    scale falls back to 1.0 so the result is ``shrinkage * I`` and replay still
    has usable spread.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ContractViolation(f"expected a 2-d embedding array, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise InsufficientDataError(f"class {class_id}: need >= 2 embeddings to fit, got {n}")
    if not np.all(np.isfinite(x)):
        raise ContractViolation(f"class {class_id}: embeddings contain non-finite values")
    if shrinkage < 0:
        raise ContractViolation("shrinkage must be >= 0")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T)

    trace = float(np.trace(cov))
    scale = trace / d + SHRINKAGE_FLOOR if trace > 0.0 else 1.0
    cov = cov + shrinkage * scale * np.eye(d)

    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        min_eig = float(np.linalg.eigvalsh(cov).min())
        raise NumericalError(
            f"class {class_id}: covariance not positive definite after shrinkage "
            f"{shrinkage:g} (min eigenvalue ~ {min_eig:.3e})"
        ) from exc

    return ClassStats(
        class_id=class_id, mean=mean, covariance=cov, chol_factor=chol, sample_count=n
    )


def sample(stats: ClassStats, count: int, rng_seed) -> np.ndarray:
    """Draw ``count`` replay features as mean + L z, z i.i.d. standard normal.

    ``rng_seed`` is an integer seed or an existing numpy Generator; either way
    the draw is deterministic for a given stream state.
    """
    if count < 1:
        raise ContractViolation(f"count must be >= 1, got {count}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    z = rng.standard_normal((count, stats.dim))
    return stats.mean + z @ stats.chol_factor.T
