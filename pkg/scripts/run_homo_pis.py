"""Homo-PIS comparison table: every fusion policy on the same partial-
overlap world, with byte-exact communication accounting.

Produces the comparison table (noisy / normal / average mIoU, MBpf, CE)
for No-Interaction, ConcatAll, AuxViewAttention, RandomSelection and
DCP-Net, all trained with the identical budget.
"""

import argparse

from dcpnet import harness, reports, scenes, training
from dcpnet import baselines as bl
from dcpnet.config import ModelConfig, WorldSpec
from dcpnet.training import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train-samples", type=int, default=512)
    ap.add_argument("--val-samples", type=int, default=128)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="runs/homo-pis")
    args = ap.parse_args()

    cfg = ModelConfig()
    spec = WorldSpec(world_size=80, min_view_separation=0)   # dense overlap
    noise = dict(noise_kinds=("gaussian", "occlusion"), noise_strength=0.72)
    train_set = scenes.make_dataset(spec, "homo-pis", args.train_samples, seed=args.seed, **noise)
    val_set = scenes.make_dataset(spec, "homo-pis", args.val_samples, seed=args.seed + 1000, **noise)
    tcfg = TrainConfig(seed=args.seed)

    records = []
    ni_params = bl.init_baseline_params("no-interaction", cfg, args.seed)
    training.train(train_set, ni_params, cfg, tcfg,
                   forward_fn=bl.make_baseline_forward("no-interaction", args.seed))
    ni, _ = harness.evaluate_baseline("no-interaction", val_set, ni_params, cfg, seed=args.seed)
    records.append(ni)
    print(f"{ni.method}: avg {100 * ni.miou_avg:.2f}")

    for kind in ("concat-all", "aux-view-attention", "random-selection"):
        params = bl.init_baseline_params(kind, cfg, args.seed)
        training.train(train_set, params, cfg, tcfg,
                       forward_fn=bl.make_baseline_forward(kind, args.seed))
        rec, _ = harness.evaluate_baseline(kind, val_set, params, cfg,
                                           baseline_avg_miou=ni.miou_avg, seed=args.seed)
        records.append(rec)
        print(f"{kind}: avg {100 * rec.miou_avg:.2f}, {rec.comm_cost_mbpf:.4f} MBpf, CE {rec.ce:.1f}")

    params = harness.init_dcp_params(cfg, seed=args.seed)
    training.train(train_set, params, cfg, tcfg)
    dcp, _ = harness.evaluate_dcp(val_set, params, cfg, baseline_avg_miou=ni.miou_avg)
    records.append(dcp)
    print(f"{dcp.method}: avg {100 * dcp.miou_avg:.2f}, {dcp.comm_cost_mbpf:.4f} MBpf, CE {dcp.ce:.1f}")

    reports.emit_report(records, args.out)
    print(f"table written to {args.out}/tables.csv")


if __name__ == "__main__":
    main()
