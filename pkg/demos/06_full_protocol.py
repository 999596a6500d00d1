"""The whole incremental protocol, with the classic ablation ladder.

Runs a 4-task stream (5 classes each) over a confusable synthetic benchmark
and compares: plain fine-tuning with Gaussian replay (baseline), adding the
neighbor-separation hinge with random vs text-guided pairs, and adding
weight fusion without and with the SVD decomposition. Averaged over several
class orders. Takes a few seconds.
"""

from rapf import RunConfig, make_synthetic, run

store = make_synthetic(
    num_classes=20, dim=32, train_per_class=30, test_per_class=20,
    intra_class_spread=0.12, confusable_fraction=0.5, seed=3,
)

SEEDS = (0, 1, 2, 3, 4)
COMMON = dict(
    store_path="", base_size=5, inc_size=5, epochs=15,
    replay_per_epoch=30, batch_size=16, pair_samples_per_iter=4, bias_b=0.3,
)

variants = [
    ("baseline (replay only)", dict(no_hinge=True, no_fusion=True)),
    ("+ hinge, random pairs", dict(random_pairs=True, no_fusion=True)),
    ("+ hinge, text-guided", dict(no_fusion=True)),
    ("+ hinge + fusion (no decomposition)", dict(fusion_no_decompose=True)),
    ("+ hinge + decomposed fusion (full)", dict()),
]

print(f"benchmark: {store.num_classes} classes, 4 tasks of 5, seeds {SEEDS}\n")
results = {}
for name, extra in variants:
    metrics = run(RunConfig(seeds=SEEDS, **COMMON, **extra), store=store)
    results[name] = metrics
    print(f"{name:38s} Avg {metrics.avg:.4f}   Last {metrics.last:.4f}")

base = results["baseline (replay only)"].last
full = results["+ hinge + decomposed fusion (full)"].last
print(f"\nfull method vs baseline: {(full - base) * 100:+.2f} accuracy points on Last")

per_task = results["+ hinge + decomposed fusion (full)"].seed_results[0].per_task_avg
print(f"accuracy trajectory (seed 0): {[round(a, 3) for a in per_task]}")
