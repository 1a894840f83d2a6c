"""Experiment harness: parameter bundles, evaluation, ablation sweeps."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import metrics as mt
from . import protocol as pr
from .autodiff import Tensor
from .config import ModelConfig
from .errors import InputError
from .network import init_decoder_params, init_encoder_params
from .rff import init_rff_params
from .scenes import SceneSample
from .smim import init_smim_params
from .tensorio import load_tensor_dict, save_tensor_dict
from .training import TrainConfig, train


def init_dcp_params(cfg: ModelConfig, seed: int) -> dict[str, Tensor]:
    """Fresh parameter bundle for the full collaborative network."""
    rng = np.random.default_rng(seed)
    params = init_encoder_params(cfg, rng)
    params.update(init_decoder_params(cfg, rng))
    params.update(init_smim_params(cfg, rng))
    params.update(init_rff_params(cfg, rng))
    return params


def save_checkpoint(params: dict[str, Tensor], dirpath) -> None:
    save_tensor_dict(dirpath, {k: v.data for k, v in params.items()})


def load_checkpoint(dirpath) -> dict[str, Tensor]:
    return {k: Tensor(v) for k, v in load_tensor_dict(dirpath).items()}


def evaluate_dcp(
    dataset: list[SceneSample],
    params: dict[str, Tensor],
    cfg: ModelConfig,
    baseline_avg_miou: float | None = None,
    comm_accounting: str = "feature_only",
    workers: int = 1,
) -> tuple[mt.MetricsRecord, list[pr.FrameResult]]:
    results, ledger = pr.run_frames(dataset, params, cfg, workers=workers)
    preds = [r.predictions for r in results]
    n_classes = cfg.classes
    noisy, normal, avg = mt.split_miou(preds, dataset, dataset[0].victim, n_classes)
    per_platform = [
        mt.miou([p[i] for p in preds], [s.masks[i] for s in dataset], n_classes)
        for i in range(dataset[0].n_platforms)
    ]
    comm = pr.mbpf(ledger, len(dataset), comm_accounting)
    ce = None
    if baseline_avg_miou is not None:
        ce = mt.collaboration_efficiency(avg, baseline_avg_miou, comm)
    detect = select = None
    if dataset[0].mode == "homo-cis":
        detect, select = mt.selection_accuracy([r.states for r in results], dataset)
    record = mt.MetricsRecord(
        "dcp-net", noisy, normal, avg, per_platform, comm, ce, detect, select
    )
    return record, results


def evaluate_baseline(
    kind: str,
    dataset: list[SceneSample],
    params: dict[str, Tensor],
    cfg: ModelConfig,
    baseline_avg_miou: float | None = None,
    comm_accounting: str = "feature_only",
    seed: int = 0,
) -> tuple[mt.MetricsRecord, list[pr.FrameResult]]:
    results, ledger = bl.run_baseline(kind, dataset, params, cfg, seed)
    preds = [r.predictions for r in results]
    victim = dataset[0].victim
    noisy, normal, avg = mt.split_miou(preds, dataset, victim, cfg.classes)
    per_platform = [
        mt.miou([p[i] for p in preds], [s.masks[i] for s in dataset], cfg.classes)
        for i in range(dataset[0].n_platforms)
    ]
    comm = pr.mbpf(ledger, len(dataset), comm_accounting)
    ce = None
    if baseline_avg_miou is not None:
        ce = mt.collaboration_efficiency(avg, baseline_avg_miou, comm)
    record = mt.MetricsRecord(kind, noisy, normal, avg, per_platform, comm, ce)
    return record, results


@dataclass
class SweepRow:
    knob: float
    avg_miou: float
    comm_mbpf: float
    ce: float | None
    request_bytes: int | None = None


def sweep_request_threshold(
    dataset: list[SceneSample],
    params: dict[str, Tensor],
    cfg: ModelConfig,
    grid=None,
    workers: int = 1,
) -> list[SweepRow]:
    """One inference pass per threshold over shared trained parameters."""
    grid = [round(0.1 * i, 1) for i in range(11)] if grid is None else list(grid)
    if any(t < 0 or t > 1 for t in grid):
        raise InputError("threshold grid must lie in [0, 1]")
    rows = []
    baseline_avg = None
    for thresh in grid:
        record, _ = evaluate_dcp(
            dataset, params, replace(cfg, request_threshold=thresh), workers=workers
        )
        if baseline_avg is None:
            # the zero-threshold protocol-off run is the CE referent
            off_record, _ = evaluate_dcp(dataset, params, replace(cfg, request_threshold=0.0))
            baseline_avg = off_record.miou_avg
        ce = mt.collaboration_efficiency(record.miou_avg, baseline_avg, record.comm_cost_mbpf)
        rows.append(SweepRow(thresh, record.miou_avg, record.comm_cost_mbpf, ce))
    return rows


def sweep_request_size(
    train_set: list[SceneSample],
    val_set: list[SceneSample],
    cfg: ModelConfig,
    tcfg: TrainConfig,
    grid=(2, 8, 32, 128),
) -> list[SweepRow]:
    """Retrain the request pathway per request size, then evaluate."""
    rows = []
    for r in grid:
        cfg_r = replace(cfg, request_dim=int(r))  # raises ConfigError when r > qk dim
        params = init_dcp_params(cfg_r, tcfg.seed)
        train(train_set, params, cfg_r, tcfg)
        record, _ = evaluate_dcp(val_set, params, cfg_r)
        off_record, _ = evaluate_dcp(val_set, params, replace(cfg_r, request_threshold=0.0))
        ce = mt.collaboration_efficiency(record.miou_avg, off_record.miou_avg, record.comm_cost_mbpf)
        rows.append(SweepRow(int(r), record.miou_avg, record.comm_cost_mbpf, ce, cfg_r.request_bytes))
    return rows


def sweep_rows_to_csv(rows: list[SweepRow], path, knob_name: str) -> None:
    sized = any(row.request_bytes is not None for row in rows)
    header = f"{knob_name},avg_miou,mbpf,ce" + (",request_bytes" if sized else "")
    lines = [header]
    for row in rows:
        ce = "" if row.ce is None else f"{row.ce:.6f}"
        line = f"{row.knob},{row.avg_miou:.6f},{row.comm_mbpf:.6f},{ce}"
        if sized:
            line += f",{row.request_bytes}"
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n")
