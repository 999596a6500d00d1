"""Class-incremental learning on frozen vision-language embeddings.

A single square linear adapter is trained over precomputed image embeddings
against fixed unit-norm text embeddings. Old classes are replayed by sampling
per-class Gaussian models; confusable old/new class pairs (selected purely
from text-embedding distances) get an extra separation hinge; after each task
the previous and current adapter weights are fused in a shared SVD basis
weighted by an elementwise importance mask.
"""

from .adapter import (
    AdapterState,
    Batch,
    LossReport,
    adam_step,
    ce_loss_and_grad,
    forward,
    forward_batch,
    hinge_loss_and_grad,
    init_adapter,
    logits,
    lr_at,
)
from .driver import (
    RunConfig,
    RunMetrics,
    SeedResult,
    build_task_stream,
    evaluate,
    finalize_task,
    run,
    run_seed,
    select_task_pairs,
    train_task,
)
from .fusion import FusionConfig, FusionTrace, decompose, fuse, importance_mask, project
from .gaussian import ClassStats, fit_class, sample
from .neighbors import NeighborPairSet, select_pairs, text_distance_matrix
from .store import (
    ClassCatalog,
    EmbeddingStore,
    LabeledEmbedding,
    TaskStream,
    load_store,
    make_synthetic,
    save_store,
)

__version__ = "0.1.0"
