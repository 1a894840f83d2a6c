"""Command-line entry points: gen / train / eval / sweep / report."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness, reports, scenes
from .baselines import BASELINES, init_baseline_params, make_baseline_forward
from .config import ModelConfig, WorldSpec
from .errors import DcpError
from .training import TrainConfig, train


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--platforms", type=int, default=4)
    p.add_argument("--view-size", type=int, default=64)
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--request-threshold", type=float, default=0.8)
    p.add_argument("--request-dim", type=int, default=32)


def _model_config(args) -> ModelConfig:
    return ModelConfig(
        n_platforms=args.platforms,
        view_size=args.view_size,
        classes=args.classes,
        request_threshold=args.request_threshold,
        request_dim=args.request_dim,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcpnet", description="collaborative perception workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic multi-view dataset")
    g.add_argument("--mode", choices=scenes.MODES, required=True)
    g.add_argument("--samples", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--world-size", type=int, default=128)
    g.add_argument("--view-size", type=int, default=64)
    g.add_argument("--classes", type=int, default=6)
    g.add_argument("--platforms", type=int, default=4)
    g.add_argument("--noise-strength", type=float, default=0.72)
    g.add_argument("--min-separation", type=int, default=None,
                   help="minimum partner-crop distance; default clamps 48 to the world")

    t = sub.add_parser("train", help="train a model on a generated dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--ckpt", required=True, help="output checkpoint directory")
    t.add_argument("--baseline", choices=BASELINES, default=None,
                   help="train a baseline head instead of the full network")
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--lr", type=float, default=2e-3)
    t.add_argument("--batch-size", type=int, default=2)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--supervision", choices=("victim_only", "all_platforms"), default="victim_only")
    t.add_argument("--curve", default=None, help="optional loss-curve CSV path")
    _add_model_flags(t)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--ckpt", required=True)
    e.add_argument("--baseline", choices=BASELINES, default=None)
    e.add_argument("--out", required=True)
    e.add_argument("--comm-accounting", choices=("feature_only", "total"), default="feature_only")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--dump-predictions", type=int, default=0,
                   help="dump the first N frames as PGM/PPM files")
    _add_model_flags(e)

    s = sub.add_parser("sweep", help="request-threshold or request-size ablation")
    s.add_argument("--kind", choices=("threshold", "request-size"), default="threshold")
    s.add_argument("--dataset", required=True)
    s.add_argument("--ckpt", default=None, help="trained checkpoint (threshold sweep)")
    s.add_argument("--train-dataset", default=None, help="training set (request-size sweep)")
    s.add_argument("--grid", type=float, nargs="*", default=None)
    s.add_argument("--epochs", type=int, default=20)
    s.add_argument("--lr", type=float, default=2e-3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    _add_model_flags(s)

    r = sub.add_parser("report", help="rewrite tables.csv from a metrics.json")
    r.add_argument("--metrics", required=True)
    r.add_argument("--out", required=True)

    return parser


def _cmd_gen(args) -> int:
    sep = args.min_separation
    if sep is None:
        sep = min(48, args.world_size - args.view_size)
    spec = WorldSpec(
        world_size=args.world_size, view_size=args.view_size, classes=args.classes,
        min_view_separation=sep, seed=args.seed,
    )
    samples = scenes.make_dataset(
        spec, args.mode, args.samples, args.seed,
        n_platforms=args.platforms, noise_strength=args.noise_strength,
    )
    scenes.save_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    dataset = scenes.load_dataset(args.dataset)
    cfg = _model_config(args)
    tcfg = TrainConfig(
        lr=args.lr, epochs=args.epochs, batch_size=args.batch_size,
        seed=args.seed, supervision=args.supervision,
    )
    if args.baseline:
        params = init_baseline_params(args.baseline, cfg, args.seed)
        curve = train(dataset, params, cfg, tcfg, forward_fn=make_baseline_forward(args.baseline, args.seed))
    else:
        params = harness.init_dcp_params(cfg, args.seed)
        curve = train(dataset, params, cfg, tcfg)
    harness.save_checkpoint(params, args.ckpt)
    if args.curve:
        curve.to_csv(args.curve)
    final = curve.losses[-1] if curve.losses else float("nan")
    print(f"trained {args.epochs} epochs, final loss {final:.4f}, checkpoint in {args.ckpt}")
    return 0


def _cmd_eval(args) -> int:
    dataset = scenes.load_dataset(args.dataset)
    cfg = _model_config(args)
    params = harness.load_checkpoint(args.ckpt)
    if args.baseline:
        record, results = harness.evaluate_baseline(
            args.baseline, dataset, params, cfg,
            comm_accounting=args.comm_accounting, seed=args.seed,
        )
    else:
        record, results = harness.evaluate_dcp(
            dataset, params, cfg, comm_accounting=args.comm_accounting
        )
    dumps = {}
    for i, (res, sample) in enumerate(zip(results, dataset)):
        if i >= args.dump_predictions:
            break
        dumps[f"frame{i:04d}_pred"] = res.predictions[sample.victim]
        dumps[f"frame{i:04d}_mask"] = sample.masks[sample.victim]
        dumps[f"frame{i:04d}_view"] = sample.views[sample.victim]
    reports.emit_report([record], args.out, dumps)
    print(f"avg mIoU {100 * record.miou_avg:.2f}, comm {record.comm_cost_mbpf:.4f} MBpf -> {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    dataset = scenes.load_dataset(args.dataset)
    cfg = _model_config(args)
    if args.kind == "threshold":
        if not args.ckpt:
            print("threshold sweep needs --ckpt", file=sys.stderr)
            return 2
        params = harness.load_checkpoint(args.ckpt)
        rows = harness.sweep_request_threshold(dataset, params, cfg, args.grid)
        harness.sweep_rows_to_csv(rows, args.out, "threshold")
    else:
        if not args.train_dataset:
            print("request-size sweep needs --train-dataset", file=sys.stderr)
            return 2
        train_set = scenes.load_dataset(args.train_dataset)
        tcfg = TrainConfig(lr=args.lr, epochs=args.epochs, seed=args.seed)
        grid = [int(g) for g in args.grid] if args.grid else (2, 8, 32, 128)
        rows = harness.sweep_request_size(train_set, dataset, cfg, tcfg, grid)
        harness.sweep_rows_to_csv(rows, args.out, "request_dim")
    print(f"wrote sweep table to {args.out}")
    return 0


def _cmd_report(args) -> int:
    records = reports.load_metrics(args.metrics)
    reports.emit_report(records, args.out)
    print(f"rewrote report in {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except (DcpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
