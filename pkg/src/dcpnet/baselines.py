"""Reference fusion policies trained with the same harness.

Each baseline owns its fusion head and is trained by the shared loop;
evaluation runs on the victim platform with the same byte accounting as
the full protocol (centralized policies pull all candidate features,
random selection pulls exactly one, no-interaction pulls none).
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import smim
from .autodiff import Tensor
from .config import ModelConfig
from .errors import InputError
from .network import (
    decode_segmentation,
    encode_view,
    glorot,
    init_decoder_params,
    init_encoder_params,
)
from .protocol import CommLedger, FrameResult, grant_message
from .scenes import SceneSample

BASELINES = ("no-interaction", "concat-all", "aux-view-attention", "random-selection")


def init_baseline_params(kind: str, cfg: ModelConfig, seed: int) -> dict[str, Tensor]:
    if kind not in BASELINES:
        raise InputError(f"unknown baseline {kind!r}")
    rng = np.random.default_rng(seed)
    params = init_encoder_params(cfg, rng)
    params.update(init_decoder_params(cfg, rng))
    if kind == "concat-all":
        cin = cfg.n_platforms * cfg.feature_channels
        params["cat.reduce.w"] = glorot(rng, (cin, cfg.feature_channels), cin, cfg.feature_channels)
        params["cat.reduce.b"] = Tensor(np.zeros(cfg.feature_channels))
    return params


def _pooled_attention_weights(feats: list[Tensor], i: int) -> list[Tensor]:
    """Softmax over platforms of pooled dot products with the local feature."""
    pools = [ad.mean_over(f, (0, 1)) for f in feats]
    logits = ad.concat(
        [ad.reshape(ad.sum_all(ad.mul(pools[i], p)), (1,)) for p in pools], axis=0
    )
    probs = ad.softmax(logits, axis=0)
    return [ad.take1d(probs, j) for j in range(len(feats))]


def _fuse_baseline(kind: str, feats: list[Tensor], i: int, params, cfg: ModelConfig, rng) -> Tensor:
    if kind == "no-interaction":
        return feats[i]
    if kind == "concat-all":
        ordered = [feats[i]] + [feats[j] for j in range(len(feats)) if j != i]
        cat = ad.concat(ordered, axis=2)
        return ad.conv1x1(cat, params["cat.reduce.w"], params["cat.reduce.b"])
    if kind == "aux-view-attention":
        weights = _pooled_attention_weights(feats, i)
        out = None
        for j, w in enumerate(weights):
            term = ad.scale_by(feats[j], w)
            out = term if out is None else ad.add(out, term)
        return out
    if kind == "random-selection":
        others = [j for j in range(len(feats)) if j != i]
        j = others[int(rng.integers(0, len(others)))]
        return ad.add(feats[i], feats[j])
    raise InputError(f"unknown baseline {kind!r}")


def make_baseline_forward(kind: str, seed: int = 0):
    """Forward function compatible with the shared training loop."""

    def forward(sample: SceneSample, params, cfg: ModelConfig, supervision: str) -> Tensor:
        n = sample.n_platforms
        feats = [encode_view(Tensor(sample.views[i]), params) for i in range(n)]
        supervised = [sample.victim] if supervision == "victim_only" else list(range(n))
        loss = None
        for i in supervised:
            rng = np.random.default_rng((seed, sample.frame, i))
            fused = _fuse_baseline(kind, feats, i, params, cfg, rng)
            logits = decode_segmentation(fused, params)
            term = ad.cross_entropy(logits, sample.masks[i])
            loss = term if loss is None else ad.add(loss, term)
        return loss

    return forward


def run_baseline_frame(
    kind: str, sample: SceneSample, params, cfg: ModelConfig, seed: int = 0
) -> FrameResult:
    """Victim-platform inference with the baseline's communication pattern."""
    n = sample.n_platforms
    i = sample.victim
    ledger = CommLedger()
    feats = [encode_view(Tensor(sample.views[j]), params) for j in range(n)]
    rng = np.random.default_rng((seed, sample.frame, i))
    if kind == "concat-all" or kind == "aux-view-attention":
        granted = [j for j in range(n) if j != i]
    elif kind == "random-selection":
        others = [j for j in range(n) if j != i]
        granted = [others[int(rng.integers(0, len(others)))]]
    elif kind == "no-interaction":
        granted = []
    else:
        raise InputError(f"unknown baseline {kind!r}")
    for j in granted:
        ledger.log(grant_message(j, i, sample.frame, feats[j].data))
    # re-seed so the fusion draw matches the training-time draw
    rng = np.random.default_rng((seed, sample.frame, i))
    fused = _fuse_baseline(kind, feats, i, params, cfg, rng)
    predictions = []
    for j in range(n):
        src = fused if j == i else feats[j]
        predictions.append(np.argmax(decode_segmentation(src, params).data, axis=2))
    states = [smim.SmimState(confidence=1.0) for _ in range(n)]
    return FrameResult(predictions, states, ledger)


def run_baseline(kind: str, dataset: list[SceneSample], params, cfg: ModelConfig, seed: int = 0):
    """All frames of a dataset; returns (results, merged ledger)."""
    results = [run_baseline_frame(kind, s, params, cfg, seed) for s in dataset]
    ledger = CommLedger()
    for res in results:
        ledger.merge(res.ledger)
    return results, ledger
