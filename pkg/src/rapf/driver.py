"""Incremental-learning protocol driver.

Runs the full pipeline over a task stream: per-task adapter training on
current-class embeddings mixed with Gaussian replay of old classes, a
separation hinge on text-selected neighboring pairs, post-task weight fusion,
per-class statistics fitting, and evaluation over all seen classes. Metrics
and ablation switches are collected into a JSON report.

Determinism: every stochastic step draws from a PCG64 generator seeded with an
explicit entropy tuple (order_seed, task, epoch, purpose, ...), so a config
with fixed seeds always produces an identical report.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import adapter, gaussian
from .errors import ConfigurationError, ContractViolation, DataError
from .fusion import FusionConfig, fuse
from .neighbors import NeighborPairSet, select_pairs, text_distance_matrix
from .store import ClassCatalog, EmbeddingStore, TaskStream, load_store

# Purpose codes for seeding independent RNG streams.
_SEED_ORDER = 0
_SEED_REPLAY = 1
_SEED_SHUFFLE = 2
_SEED_HINGE = 3
_SEED_RANDOM_PAIRS = 4


@dataclass(frozen=True)
class RunConfig:
    store_path: str
    base_size: int
    inc_size: int
    epochs: int = 15
    base_lr: float = 0.001
    milestones: tuple[int, ...] = (4, 10)
    lr_gamma: float = 0.1
    alpha: float = 0.65
    margin: float = adapter.DEFAULT_MARGIN
    tau: float = adapter.DEFAULT_TEMPERATURE
    bias_b: float = 0.0
    replay_per_epoch: int = 2000
    pair_samples_per_iter: int = 20
    batch_size: int = 64
    shrinkage: float = 0.1
    seeds: tuple[int, ...] = (0,)
    no_hinge: bool = False
    random_pairs: bool = False
    no_fusion: bool = False
    fusion_no_decompose: bool = False
    fuse_first_task: bool = False
    strict_one_to_one: bool = False
    output_path: str | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.replay_per_epoch < 0:
            raise ConfigurationError("replay_per_epoch must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.pair_samples_per_iter < 1:
            raise ConfigurationError("pair_samples_per_iter must be >= 1")
        if not self.seeds:
            raise ConfigurationError("at least one class-order seed is required")


@dataclass
class SeedResult:
    order_seed: int
    class_order: list[int]
    tasks: list[list[int]]
    accuracy_matrix: list[list[float]]  # row t = accuracy on tasks 0..t after task t
    per_task_avg: list[float]
    avg: float
    last: float
    pair_log: list[dict]
    fusion_log: list[dict]
    confusion: list[dict]  # per evaluation point: {"classes": ids, "matrix": counts}


@dataclass
class RunMetrics:
    config: RunConfig
    seed_results: list[SeedResult] = field(default_factory=list)
    avg: float = 0.0  # mean over seeds of per-seed Avg
    last: float = 0.0  # mean over seeds of per-seed Last

    def to_report(self) -> dict:
        return {
            "config": asdict(self.config),
            "aggregate": {
                "avg": self.avg,
                "last": self.last,
                "avg_per_seed": [s.avg for s in self.seed_results],
                "last_per_seed": [s.last for s in self.seed_results],
            },
            "seeds": [asdict(s) for s in self.seed_results],
        }

    def write_report(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_report(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def build_task_stream(
    catalog: ClassCatalog, base_size: int, inc_size: int, order_seed: int
) -> TaskStream:
    """Shuffle the class order by seed and chop it into base + incremental tasks.

    ``base_size == 0`` is shorthand for "no enlarged base": the first task gets
    ``inc_size`` classes like every other.
    """
    k = catalog.num_classes
    if base_size == 0:
        base_size = inc_size
    if base_size < 1 or inc_size < 1:
        raise ConfigurationError("base_size and inc_size must be >= 1 (or base_size == 0)")
    if base_size > k:
        raise ConfigurationError(f"base_size {base_size} exceeds {k} classes")
    remaining = k - base_size
    if remaining % inc_size != 0:
        raise ConfigurationError(
            f"{remaining} classes after the base task do not divide into tasks of {inc_size}"
        )
    order = [int(c) for c in _rng(order_seed, _SEED_ORDER).permutation(k)]
    tasks = [tuple(order[:base_size])]
    for start in range(base_size, k, inc_size):
        tasks.append(tuple(order[start : start + inc_size]))
    stream = TaskStream(
        base_size=base_size,
        inc_size=inc_size,
        class_order=tuple(order),
        tasks=tuple(tasks),
    )
    stream.validate()
    return stream


def select_task_pairs(
    catalog: ClassCatalog,
    stream: TaskStream,
    task_index: int,
    config: RunConfig,
    order_seed: int,
) -> NeighborPairSet:
    """Neighboring (old, new) class pairs for one task, honoring ablation flags."""
    if task_index == 0:
        return NeighborPairSet(pairs=[], threshold=config.alpha)
    old_ids = stream.seen_classes(task_index - 1)
    new_ids = list(stream.tasks[task_index])
    texts = catalog.text_embeddings.astype(np.float64)
    dist = text_distance_matrix(texts[old_ids], texts[new_ids])
    selected = select_pairs(dist, config.alpha, old_ids, new_ids, config.strict_one_to_one)
    if not config.random_pairs:
        return selected
    # Ablation: same pair count, but drawn uniformly from the old x new grid.
    rng = _rng(order_seed, task_index, _SEED_RANDOM_PAIRS)
    total = len(old_ids) * len(new_ids)
    chosen = rng.choice(total, size=min(len(selected), total), replace=False)
    pairs = []
    for flat in sorted(int(c) for c in chosen):
        i, j = divmod(flat, len(new_ids))
        pairs.append((old_ids[i], new_ids[j], float(dist[i, j])))
    return NeighborPairSet(pairs=pairs, threshold=config.alpha)


def _replay_quota(total: int, old_ids: list[int]) -> dict[int, int]:
    """Split the per-epoch replay budget uniformly; remainder round-robin by id."""
    ordered = sorted(old_ids)
    base, rem = divmod(total, len(ordered))
    return {c: base + (1 if i < rem else 0) for i, c in enumerate(ordered)}


def train_task(
    state: adapter.AdapterState,
    task_index: int,
    stream: TaskStream,
    store: EmbeddingStore,
    stats_bank: dict[int, gaussian.ClassStats],
    config: RunConfig,
    order_seed: int,
    pair_set: NeighborPairSet | None = None,
) -> adapter.AdapterState:
    """Train the adapter on one task's data plus generated old-class features."""
    classes_now = list(stream.tasks[task_index])
    old_classes = stream.seen_classes(task_index - 1) if task_index > 0 else []
    for c in old_classes:
        if c not in stats_bank:
            raise ContractViolation(f"no fitted stats for old class {c}")
    seen = stream.seen_classes(task_index)
    local = {c: i for i, c in enumerate(seen)}
    texts = store.catalog.text_embeddings[seen].astype(np.float64)

    cur_feats = [store.train_vectors(c).astype(np.float64) for c in classes_now]
    cur_labels = [np.full(len(f), local[c]) for c, f in zip(classes_now, cur_feats)]
    if sum(len(f) for f in cur_feats) == 0:
        raise DataError(f"task {task_index} has no train records")

    if pair_set is None:
        pair_set = select_task_pairs(store.catalog, stream, task_index, config, order_seed)
    hinge_on = not config.no_hinge and len(pair_set) > 0
    pair_old = pair_set.old_classes()

    state = adapter.reset_optimizer(state)
    for epoch in range(config.epochs):
        lr = adapter.lr_at(epoch, config.base_lr, list(config.milestones), config.lr_gamma)

        feats, labels = list(cur_feats), list(cur_labels)
        if old_classes and config.replay_per_epoch > 0:
            quota = _replay_quota(config.replay_per_epoch, old_classes)
            for c in sorted(old_classes):
                if quota[c] == 0:
                    continue
                rng = _rng(order_seed, task_index, epoch, _SEED_REPLAY, c)
                feats.append(gaussian.sample(stats_bank[c], quota[c], rng))
                labels.append(np.full(quota[c], local[c]))
        all_feats = np.concatenate(feats)
        all_labels = np.concatenate(labels).astype(np.int64)
        perm = _rng(order_seed, task_index, epoch, _SEED_SHUFFLE).permutation(len(all_feats))

        for it, start in enumerate(range(0, len(perm), config.batch_size)):
            idx = perm[start : start + config.batch_size]
            batch = adapter.Batch(features=all_feats[idx], labels=all_labels[idx])
            ce, grad = adapter.ce_loss_and_grad(state, batch, texts)
            if hinge_on:
                h_feats, h_old, h_new = [], [], []
                for c in pair_old:
                    rng = _rng(order_seed, task_index, epoch, _SEED_HINGE, it, c)
                    samples = gaussian.sample(
                        stats_bank[c], config.pair_samples_per_iter, rng
                    )
                    for j in pair_set.new_classes_of(c):
                        h_feats.append(samples)
                        h_old.append(np.full(len(samples), local[c]))
                        h_new.append(np.full(len(samples), local[j]))
                _, h_grad = adapter.hinge_loss_and_grad(
                    state,
                    np.concatenate(h_feats),
                    np.concatenate(h_old).astype(np.int64),
                    np.concatenate(h_new).astype(np.int64),
                    texts,
                    config.margin,
                )
                grad = grad + h_grad
            state = adapter.adam_step(state, grad, lr)
    return state


def finalize_task(
    state: adapter.AdapterState,
    w_before_task: np.ndarray,
    task_index: int,
    config: RunConfig,
) -> tuple[adapter.AdapterState, dict | None]:
    """Fuse the pre-task and post-training weights (policy: from task 1 onward)."""
    if config.no_fusion:
        return state, None
    if task_index == 0 and not config.fuse_first_task:
        return state, None
    fusion_config = FusionConfig(
        bias_b=config.bias_b, decompose=not config.fusion_no_decompose
    )
    weight, trace = fuse(w_before_task, state.weight, fusion_config)
    return replace(state, weight=weight), trace.summary()


def evaluate(
    state: adapter.AdapterState,
    stream: TaskStream,
    store: EmbeddingStore,
    upto_task: int,
) -> tuple[list[float], np.ndarray, list[int]]:
    """Per-task test accuracies and the confusion matrix over all seen classes.

    Prediction is the argmax of cosine similarity against every seen class's
    text embedding; no task identity is used.
    """
    seen = stream.seen_classes(upto_task)
    local = {c: i for i, c in enumerate(seen)}
    texts = store.catalog.text_embeddings[seen].astype(np.float64)
    confusion = np.zeros((len(seen), len(seen)), dtype=np.int64)
    accuracies = []
    for t in range(upto_task + 1):
        correct = 0
        total = 0
        for c in stream.tasks[t]:
            vecs = store.test_vectors(c).astype(np.float64)
            if len(vecs) == 0:
                continue
            out, _ = adapter.forward_batch(state, vecs)
            pred = np.argmax(out @ texts.T, axis=1)
            np.add.at(confusion, (local[c], pred), 1)
            correct += int(np.sum(pred == local[c]))
            total += len(vecs)
        if total == 0:
            raise DataError(f"task {t} has no test records")
        accuracies.append(correct / total)
    return accuracies, confusion, seen


def run_seed(
    store: EmbeddingStore, config: RunConfig, order_seed: int
) -> SeedResult:
    """Execute the whole protocol for one class-order seed."""
    stream = build_task_stream(store.catalog, config.base_size, config.inc_size, order_seed)
    state = adapter.init_adapter(store.dim, temperature=config.tau)
    stats_bank: dict[int, gaussian.ClassStats] = {}

    accuracy_matrix: list[list[float]] = []
    per_task_avg: list[float] = []
    pair_log: list[dict] = []
    fusion_log: list[dict] = []
    confusion_log: list[dict] = []

    for t in range(stream.num_tasks):
        pair_set = select_task_pairs(store.catalog, stream, t, config, order_seed)
        pair_log.append(
            {
                "task": t,
                "threshold": pair_set.threshold,
                "pairs": [[int(i), int(j), d] for i, j, d in pair_set.pairs],
            }
        )
        w_before = state.weight.copy()
        state = train_task(state, t, stream, store, stats_bank, config, order_seed, pair_set)
        state, fusion_summary = finalize_task(state, w_before, t, config)
        fusion_log.append({"task": t, **(fusion_summary or {"skipped": True})})
        for c in stream.tasks[t]:
            stats_bank[c] = gaussian.fit_class(
                store.train_vectors(c).astype(np.float64), config.shrinkage, class_id=c
            )
        accs, confusion, seen = evaluate(state, stream, store, t)
        accuracy_matrix.append(accs)
        per_task_avg.append(float(np.mean(accs)))
        confusion_log.append({"classes": seen, "matrix": confusion.tolist()})

    return SeedResult(
        order_seed=order_seed,
        class_order=list(stream.class_order),
        tasks=[list(task) for task in stream.tasks],
        accuracy_matrix=accuracy_matrix,
        per_task_avg=per_task_avg,
        avg=float(np.mean(per_task_avg)),
        last=per_task_avg[-1],
        pair_log=pair_log,
        fusion_log=fusion_log,
        confusion=confusion_log,
    )


def run(config: RunConfig, store: EmbeddingStore | None = None) -> RunMetrics:
    """Run the protocol for every order seed and aggregate Avg/Last.

    Writes the JSON report to ``config.output_path`` when set. Deterministic:
    identical configs produce byte-identical reports.
    """
    if store is None:
        store = load_store(config.store_path)
    if store.is_partial:
        raise DataError(
            "store is partial: every class needs >= 2 train and >= 1 test records"
        )
    metrics = RunMetrics(config=config)
    for seed in config.seeds:
        metrics.seed_results.append(run_seed(store, config, seed))
    metrics.avg = float(np.mean([s.avg for s in metrics.seed_results]))
    metrics.last = float(np.mean([s.last for s in metrics.seed_results]))
    if config.output_path:
        metrics.write_report(config.output_path)
    return metrics
