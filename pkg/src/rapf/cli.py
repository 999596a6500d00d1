"""Command-line interface: synth, run, inspect."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .driver import RunConfig, run
from .errors import RapfError
from .store import load_store, make_synthetic, save_store


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rapf",
        description="Class-incremental adapter training over frozen embeddings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic embedding store")
    p_synth.add_argument("--classes", type=int, default=20)
    p_synth.add_argument("--dim", type=int, default=32)
    p_synth.add_argument("--train-per-class", type=int, default=40)
    p_synth.add_argument("--test-per-class", type=int, default=10)
    p_synth.add_argument("--spread", type=float, default=0.15)
    p_synth.add_argument("--confusable", type=float, default=0.5,
                         help="fraction of classes planted with a close text neighbor")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="execute the incremental protocol")
    p_run.add_argument("--emb", required=True, help="embedding store path")
    p_run.add_argument("--base", type=int, required=True,
                       help="classes in task 0 (0 means same as --inc)")
    p_run.add_argument("--inc", type=int, required=True, help="classes per later task")
    p_run.add_argument("--epochs", type=int, default=15)
    p_run.add_argument("--lr", type=float, default=0.001)
    p_run.add_argument("--milestones", type=_int_list, default=(4, 10))
    p_run.add_argument("--lr-gamma", type=float, default=0.1)
    p_run.add_argument("--alpha", type=float, default=0.65)
    p_run.add_argument("--margin", type=float, default=0.1)
    p_run.add_argument("--tau", type=float, default=0.01)
    p_run.add_argument("--bias-b", type=float, default=0.0)
    p_run.add_argument("--replay-per-epoch", type=int, default=2000)
    p_run.add_argument("--pair-samples", type=int, default=20)
    p_run.add_argument("--batch-size", type=int, default=64)
    p_run.add_argument("--shrinkage", type=float, default=0.1)
    p_run.add_argument("--seeds", type=_int_list, default=(0,))
    p_run.add_argument("--no-hinge", action="store_true")
    p_run.add_argument("--random-pairs", action="store_true")
    p_run.add_argument("--no-fusion", action="store_true")
    p_run.add_argument("--fusion-no-decompose", action="store_true")
    p_run.add_argument("--fuse-first-task", action="store_true")
    p_run.add_argument("--strict-one-to-one", action="store_true")
    p_run.add_argument("--out", default=None, help="JSON report path")

    p_inspect = sub.add_parser("inspect", help="summarize a store and its text distances")
    p_inspect.add_argument("--emb", required=True)

    return parser


def _cmd_synth(args) -> int:
    store = make_synthetic(
        num_classes=args.classes,
        dim=args.dim,
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        intra_class_spread=args.spread,
        confusable_fraction=args.confusable,
        seed=args.seed,
    )
    save_store(store, args.out)
    print(
        f"wrote {args.out}: {store.num_classes} classes, dim {store.dim}, "
        f"{store.num_records} records"
    )
    return 0


def _cmd_run(args) -> int:
    config = RunConfig(
        store_path=args.emb,
        base_size=args.base,
        inc_size=args.inc,
        epochs=args.epochs,
        base_lr=args.lr,
        milestones=tuple(args.milestones),
        lr_gamma=args.lr_gamma,
        alpha=args.alpha,
        margin=args.margin,
        tau=args.tau,
        bias_b=args.bias_b,
        replay_per_epoch=args.replay_per_epoch,
        pair_samples_per_iter=args.pair_samples,
        batch_size=args.batch_size,
        shrinkage=args.shrinkage,
        seeds=tuple(args.seeds),
        no_hinge=args.no_hinge,
        random_pairs=args.random_pairs,
        no_fusion=args.no_fusion,
        fusion_no_decompose=args.fusion_no_decompose,
        fuse_first_task=args.fuse_first_task,
        strict_one_to_one=args.strict_one_to_one,
        output_path=args.out,
    )
    metrics = run(config)
    for result in metrics.seed_results:
        print(f"seed {result.order_seed}: Avg {result.avg:.4f}  Last {result.last:.4f}")
    print(f"mean over {len(metrics.seed_results)} seeds: "
          f"Avg {metrics.avg:.4f}  Last {metrics.last:.4f}")
    if config.output_path:
        print(f"report written to {config.output_path}")
    return 0


def _cmd_inspect(args) -> int:
    store = load_store(args.emb)
    train, test = store.class_counts()
    print(f"store: {args.emb}")
    print(f"  classes: {store.num_classes}  dim: {store.dim}  records: {store.num_records}")
    print(f"  train records: {int(train.sum())}  test records: {int(test.sum())}")
    if store.is_partial:
        print("  WARNING: partial store (some class lacks 2 train / 1 test records)")
    print(f"  per-class train counts: min {int(train.min())}  max {int(train.max())}")
    names = store.catalog.names
    preview = ", ".join(names[:5]) + (", ..." if len(names) > 5 else "")
    print(f"  names: {preview}")

    texts = store.catalog.text_embeddings.astype(np.float64)
    k = store.num_classes
    iu = np.triu_indices(k, 1)
    dists = np.linalg.norm(texts[iu[0]] - texts[iu[1]], axis=1)
    print(f"  text-distance range: {dists.min():.3f} .. {dists.max():.3f}")
    print(f"  pairs under 0.65: {int(np.sum(dists < 0.65))} of {len(dists)}")
    print("  text-distance histogram:")
    edges = np.linspace(0.0, 2.0, 11)
    counts, _ = np.histogram(dists, bins=edges)
    peak = max(int(counts.max()), 1)
    for lo, hi, n in zip(edges[:-1], edges[1:], counts):
        bar = "#" * round(40 * int(n) / peak)
        print(f"    [{lo:.1f}, {hi:.1f}) {int(n):6d} {bar}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_inspect(args)
    except RapfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
