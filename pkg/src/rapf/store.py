"""Embedding store: on-disk format, validation, and synthetic benchmark generation.

File format "RAPF-EMB v1" (all little-endian):

    magic           8 bytes ASCII "RAPFEMB1"
    version         u32 = 1
    dim             u32
    num_classes     u32
    per class:      u16 name_byte_len, UTF-8 name bytes, dim x f32 text embedding
    num_records     u64
    per record:     u32 class_id, u8 split (0=train, 1=test), dim x f32 vector

Text embeddings are stored pre-normalized (unit L2 norm); image embeddings are
stored raw, exactly as the backbone produced them. Everything downstream
upcasts to float64 for computation; the file stays float32.

All randomness in this package goes through numpy's PCG64 generator
(``numpy.random.default_rng``) with explicit seeds, so outputs are
reproducible across runs and platforms.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    ConfigurationError,
    StoreCorruptionError,
    StoreFormatError,
    StoreIntegrityError,
)

MAGIC = b"RAPFEMB1"
VERSION = 1

SPLIT_TRAIN = 0
SPLIT_TEST = 1

UNIT_NORM_TOL = 1e-5

# Synthetic generator geometry. All class directions live inside a narrow
# cone around a global axis (pretrained joint-embedding spaces concentrate
# features the same way), so classes share input subspace and incremental
# training on new classes genuinely interferes with old ones. Planted
# confusable partners sit at a chord distance inside (PLANT_DIST_LO,
# PLANT_DIST_HI); every other class pair is kept at least MIN_SEPARATION
# apart so only planted pairs fall under the usual 0.65 selection threshold.
CONE_HALF_LO = 0.55  # radians; cone band for class directions
CONE_HALF_HI = 0.90
PLANT_DIST_LO = 0.45
PLANT_DIST_HI = 0.60
MIN_SEPARATION = 0.80
CLASS_SCALE_LO = 10.0
CLASS_SCALE_HI = 20.0
_MAX_PLACEMENT_TRIES = 5000

# Class noise is anisotropic: a nuisance subspace shared by all classes
# carries NUISANCE_GAIN-times stronger noise. A linear map can learn to
# suppress it, so trained accuracy genuinely exceeds the zero-shot
# (identity-adapter) accuracy, as with real backbone embeddings.
NUISANCE_FRACTION = 0.25  # fraction of dims spanning the shared subspace
NUISANCE_GAIN = 1.0

# Image means do not sit exactly on their text directions (the modality-gap
# analogue), and the offsets are not arbitrary: members of a planted pair
# tilt toward each other (semantically similar categories also look alike),
# while other classes tilt in random directions. Every offset scales with
# the spread, so the degenerate zero-spread store still puts each vector
# exactly on its class direction. Correcting the tilts is per-class work a
# linear map can do, which later tasks undo for earlier ones; the pairs'
# mutual tilts are what text-guided separation can fix.
PAIR_TILT_GAIN = 1.5
TILT_GAIN = 1.5


class LabeledEmbedding(NamedTuple):
    class_id: int
    split: int
    vector: np.ndarray


@dataclass
class ClassCatalog:
    """Ordered class names plus their unit-norm text embeddings (row i = class i)."""

    names: list[str]
    text_embeddings: np.ndarray  # (K, d) float32

    @property
    def num_classes(self) -> int:
        return len(self.names)

    @property
    def dim(self) -> int:
        return int(self.text_embeddings.shape[1])

    def validate(self) -> None:
        if self.text_embeddings.ndim != 2 or self.text_embeddings.shape[0] != len(self.names):
            raise StoreIntegrityError(
                f"catalog shape {self.text_embeddings.shape} does not match {len(self.names)} names"
            )
        if self.dim < 2:
            raise StoreIntegrityError(f"embedding dimension must be >= 2, got {self.dim}")
        if not np.all(np.isfinite(self.text_embeddings)):
            raise StoreIntegrityError("catalog contains non-finite text embeddings")
        norms = np.linalg.norm(self.text_embeddings.astype(np.float64), axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > UNIT_NORM_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise StoreIntegrityError(
                f"text embedding of class {i} ({self.names[i]!r}) has norm {norms[i]:.6g}, expected 1.0"
            )


@dataclass
class EmbeddingStore:
    """A class catalog plus labeled train/test image embeddings.

    Records are held columnwise: ``class_ids``, ``splits`` and ``vectors``
    are parallel arrays. Read-only after construction or load; safe to share.
    """

    catalog: ClassCatalog
    class_ids: np.ndarray  # (N,) uint32
    splits: np.ndarray  # (N,) uint8
    vectors: np.ndarray  # (N, d) float32

    @property
    def num_records(self) -> int:
        return int(self.class_ids.shape[0])

    @property
    def num_classes(self) -> int:
        return self.catalog.num_classes

    @property
    def dim(self) -> int:
        return self.catalog.dim

    def validate(self) -> None:
        self.catalog.validate()
        n = self.num_records
        if self.splits.shape != (n,) or self.vectors.shape != (n, self.dim):
            raise StoreIntegrityError("record arrays have inconsistent shapes")
        if n and int(self.class_ids.max(initial=0)) >= self.num_classes:
            raise StoreIntegrityError(
                f"record references class {int(self.class_ids.max())} "
                f"but catalog has {self.num_classes} classes"
            )
        if n and not np.all((self.splits == SPLIT_TRAIN) | (self.splits == SPLIT_TEST)):
            raise StoreIntegrityError("record split flag outside {0, 1}")
        if not np.all(np.isfinite(self.vectors)):
            raise StoreIntegrityError("store contains non-finite image embeddings")

    def class_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-class (train_count, test_count) arrays of length num_classes."""
        k = self.num_classes
        ids = self.class_ids.astype(np.int64)
        train = np.bincount(ids[self.splits == SPLIT_TRAIN], minlength=k)
        test = np.bincount(ids[self.splits == SPLIT_TEST], minlength=k)
        return train, test

    @property
    def is_partial(self) -> bool:
        """True if any class lacks the 2 train / 1 test records a run needs."""
        train, test = self.class_counts()
        return bool(np.any(train < 2) or np.any(test < 1))

    def train_vectors(self, class_id: int) -> np.ndarray:
        mask = (self.class_ids == class_id) & (self.splits == SPLIT_TRAIN)
        return self.vectors[mask]

    def test_vectors(self, class_id: int) -> np.ndarray:
        mask = (self.class_ids == class_id) & (self.splits == SPLIT_TEST)
        return self.vectors[mask]

    def iter_records(self) -> Iterator[LabeledEmbedding]:
        for i in range(self.num_records):
            yield LabeledEmbedding(int(self.class_ids[i]), int(self.splits[i]), self.vectors[i])


@dataclass(frozen=True)
class TaskStream:
    """A class-order permutation chopped into disjoint per-task class sets.

    Task 0 holds ``base_size`` classes, each later task ``inc_size``. The tasks
    cover a prefix of ``class_order`` exactly, with no overlap.
    """

    base_size: int
    inc_size: int
    class_order: tuple[int, ...]
    tasks: tuple[tuple[int, ...], ...]

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    def seen_classes(self, upto_task: int) -> list[int]:
        """Class ids of tasks 0..upto_task, in presentation order."""
        out: list[int] = []
        for t in range(upto_task + 1):
            out.extend(self.tasks[t])
        return out

    def validate(self) -> None:
        if self.base_size < 1 or self.inc_size < 1:
            raise ConfigurationError("base_size and inc_size must be >= 1")
        flat = [c for task in self.tasks for c in task]
        if len(set(flat)) != len(flat):
            raise ConfigurationError("task class sets overlap")
        expected = self.base_size + (len(self.tasks) - 1) * self.inc_size
        if len(flat) != expected or list(self.class_order[: len(flat)]) != flat:
            raise ConfigurationError("tasks do not partition a prefix of class_order")


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("class_id", "<u4"), ("split", "u1"), ("vec", "<f4", (dim,))])


def save_store(store: EmbeddingStore, path) -> None:
    """Write a RAPF-EMB v1 file. Round-trips bit-exactly through load_store."""
    store.validate()
    parts = [MAGIC, struct.pack("<III", VERSION, store.dim, store.num_classes)]
    for i, name in enumerate(store.catalog.names):
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise StoreIntegrityError(f"class name {i} exceeds 65535 UTF-8 bytes")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(np.ascontiguousarray(store.catalog.text_embeddings[i], dtype="<f4").tobytes())
    parts.append(struct.pack("<Q", store.num_records))
    recs = np.empty(store.num_records, dtype=_record_dtype(store.dim))
    recs["class_id"] = store.class_ids
    recs["split"] = store.splits
    recs["vec"] = store.vectors
    parts.append(recs.tobytes())
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(parts))
    except OSError as exc:
        raise OSError(f"failed to write embedding store to {path}: {exc}") from exc


def load_store(path) -> EmbeddingStore:
    """Read a RAPF-EMB v1 file, re-checking all store invariants."""
    with open(path, "rb") as fh:
        buf = fh.read()

    if len(buf) < len(MAGIC) + 12:
        raise StoreFormatError(f"{path}: file too short to be a RAPF-EMB file")
    if buf[:8] != MAGIC:
        raise StoreFormatError(f"{path}: bad magic {buf[:8]!r}, expected {MAGIC!r}")
    version, dim, num_classes = struct.unpack_from("<III", buf, 8)
    if version != VERSION:
        raise StoreFormatError(f"{path}: unsupported version {version}")
    if dim < 2:
        raise StoreFormatError(f"{path}: dimension {dim} below minimum of 2")

    off = 20
    names: list[str] = []
    texts = np.empty((num_classes, dim), dtype=np.float32)
    for i in range(num_classes):
        if off + 2 > len(buf):
            raise StoreCorruptionError(f"{path}: catalog truncated at class {i}")
        (name_len,) = struct.unpack_from("<H", buf, off)
        off += 2
        end = off + name_len + 4 * dim
        if end > len(buf):
            raise StoreCorruptionError(f"{path}: catalog truncated at class {i}")
        names.append(buf[off : off + name_len].decode("utf-8"))
        texts[i] = np.frombuffer(buf, dtype="<f4", count=dim, offset=off + name_len)
        off += name_len + 4 * dim

    if off + 8 > len(buf):
        raise StoreCorruptionError(f"{path}: missing record count")
    (num_records,) = struct.unpack_from("<Q", buf, off)
    off += 8
    rdt = _record_dtype(dim)
    expected = num_records * rdt.itemsize
    if len(buf) - off != expected:
        raise StoreCorruptionError(
            f"{path}: record section holds {len(buf) - off} bytes, expected {expected}"
        )
    recs = np.frombuffer(buf, dtype=rdt, count=num_records, offset=off)

    store = EmbeddingStore(
        catalog=ClassCatalog(names=names, text_embeddings=texts),
        class_ids=recs["class_id"].copy(),
        splits=recs["split"].copy(),
        vectors=recs["vec"].copy().reshape(num_records, dim),
    )
    store.validate()
    return store


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _orthonormal_columns(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    """Random orthonormal (dim, count) matrix by modified Gram-Schmidt."""
    cols = []
    while len(cols) < count:
        v = rng.standard_normal(dim)
        for u in cols:
            v -= (v @ u) * u
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            cols.append(v / norm)
    return np.stack(cols, axis=1)


def _place_direction(
    rng: np.random.Generator,
    existing: list[np.ndarray],
    exempt: set[int],
    anchor: np.ndarray | None,
    chord: float,
    axis: np.ndarray,
) -> np.ndarray:
    """Draw a unit vector >= MIN_SEPARATION from every non-exempt existing one.

    Without an anchor the vector lands in the cone band around ``axis``; with
    one, it sits at exactly ``chord`` distance from the anchor (spherical
    interpolation toward a random orthogonal direction).
    """
    dim = axis.shape[0]
    for _ in range(_MAX_PLACEMENT_TRIES):
        if anchor is None:
            w = rng.standard_normal(dim)
            w -= (w @ axis) * axis
            phi = rng.uniform(CONE_HALF_LO, CONE_HALF_HI)
            cand = math.cos(phi) * axis + math.sin(phi) * _unit(w)
        else:
            r = rng.standard_normal(dim)
            r -= (r @ anchor) * anchor
            theta = 2.0 * math.asin(chord / 2.0)
            cand = math.cos(theta) * anchor + math.sin(theta) * _unit(r)
        ok = True
        for j, other in enumerate(existing):
            if j in exempt:
                continue
            if np.linalg.norm(cand - other) < MIN_SEPARATION:
                ok = False
                break
        if ok:
            return cand
    raise ConfigurationError(
        f"could not place {len(existing) + 1} class directions at separation "
        f"{MIN_SEPARATION} in dimension {dim}; lower confusable_fraction or raise dim"
    )


def make_synthetic(
    num_classes: int,
    dim: int,
    train_per_class: int,
    test_per_class: int,
    intra_class_spread: float,
    confusable_fraction: float,
    seed: int,
) -> EmbeddingStore:
    """Generate a desk-scale benchmark store with planted confusable class pairs.

    Class text directions live in a cone band around a random axis; a
    ``confusable_fraction`` of classes are planted pairwise at chord distance
    0.45-0.60 (under the 0.65 selection threshold) while all other pairs stay
    >= 0.80 apart. Image embeddings for class c are drawn from a Gaussian
    centered at s_c times a tilted copy of the class direction (pair members
    tilt toward each other, other classes tilt randomly; tilt angles scale
    with the spread) with covariance (spread * s_c)^2 over the identity plus
    a shared stronger-noise subspace, s_c uniform in [10, 20]. At zero spread
    every vector sits exactly on its class direction. Deterministic given the
    seed.
    """
    if num_classes < 2:
        raise ConfigurationError("num_classes must be >= 2")
    if dim < 8:
        raise ConfigurationError("dim must be >= 8")
    if train_per_class < 2 or test_per_class < 1:
        raise ConfigurationError("need >= 2 train and >= 1 test embeddings per class")
    if not 0.0 <= confusable_fraction <= 1.0:
        raise ConfigurationError("confusable_fraction must lie in [0, 1]")
    if intra_class_spread < 0.0:
        raise ConfigurationError("intra_class_spread must be >= 0")

    rng = np.random.default_rng(seed)
    k = num_classes

    # Classes 0..n_close-1 are grouped into planted pairs (0,1), (2,3), ...;
    # an odd leftover chains onto the preceding pair.
    n_close = math.ceil(confusable_fraction * k)
    if n_close == 1:
        n_close = 2
    if n_close % 2 == 1 and n_close < k:
        n_close += 1
    partner: dict[int, int] = {}
    for i in range(n_close):
        if i % 2 == 1:
            partner[i] = i - 1
    if n_close % 2 == 1:  # only possible when n_close == k
        partner[n_close - 1] = n_close - 2

    cluster_of: dict[int, set[int]] = {}
    for i, a in partner.items():
        root = a if a not in partner else partner[a]
        cluster_of.setdefault(root, {root}).update({i, a})

    axis = _unit(rng.standard_normal(dim))
    directions: list[np.ndarray] = []
    for i in range(k):
        if i in partner:
            a = partner[i]
            chord = float(rng.uniform(PLANT_DIST_LO, PLANT_DIST_HI))
            root = a if a not in partner else partner[a]
            exempt = {j for j in cluster_of.get(root, {a}) if j < i}
            directions.append(
                _place_direction(rng, directions, exempt, directions[a], chord, axis)
            )
        else:
            directions.append(_place_direction(rng, directions, set(), None, 0.0, axis))

    texts = np.stack(directions).astype(np.float32)
    scales = rng.uniform(CLASS_SCALE_LO, CLASS_SCALE_HI, size=k)
    nuisance = _orthonormal_columns(rng, dim, max(2, int(dim * NUISANCE_FRACTION)))

    # Each pair member's appearance leans toward its partner.
    lean_toward: dict[int, int] = dict(partner)
    for i, a in partner.items():
        lean_toward.setdefault(a, i)

    n_rec = k * (train_per_class + test_per_class)
    class_ids = np.empty(n_rec, dtype=np.uint32)
    splits = np.empty(n_rec, dtype=np.uint8)
    vectors = np.empty((n_rec, dim), dtype=np.float32)
    pos = 0
    for c in range(k):
        n_c = train_per_class + test_per_class
        rand_tilt = rng.standard_normal(dim)
        rand_tilt -= (rand_tilt @ directions[c]) * directions[c]
        if c in lean_toward:
            toward = directions[lean_toward[c]] - directions[c]
            toward -= (toward @ directions[c]) * directions[c]
            tilt = PAIR_TILT_GAIN * _unit(toward) + 0.5 * TILT_GAIN * _unit(rand_tilt)
        else:
            tilt = TILT_GAIN * _unit(rand_tilt)
        mean_dir = _unit(directions[c] + intra_class_spread * tilt)
        mean = scales[c] * mean_dir
        sigma = intra_class_spread * scales[c]
        z = rng.standard_normal((n_c, dim))
        z_nuis = rng.standard_normal((n_c, nuisance.shape[1]))
        samples = mean + sigma * (z + NUISANCE_GAIN * z_nuis @ nuisance.T)
        class_ids[pos : pos + n_c] = c
        splits[pos : pos + train_per_class] = SPLIT_TRAIN
        splits[pos + train_per_class : pos + n_c] = SPLIT_TEST
        vectors[pos : pos + n_c] = samples.astype(np.float32)
        pos += n_c

    store = EmbeddingStore(
        catalog=ClassCatalog(names=[f"class_{c:03d}" for c in range(k)], text_embeddings=texts),
        class_ids=class_ids,
        splits=splits,
        vectors=vectors,
    )
    store.validate()
    return store
