"""Round-based collaboration protocol with byte-exact accounting.

One frame runs four phase-barriered rounds: local encoding, request
decisions, request/relevance exchange, feature grants plus fusion and
decoding.  Every message is serialized with a fixed little-endian
framing (magic "DCPM", u8 kind, u16 src, u16 dst, u32 frame, u32 payload
length) and logged in a ledger from which MBpf is computed.  Frames are
independent given fixed parameters, so multi-threaded execution over
frames is bitwise identical to serial execution.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import rff, smim
from .autodiff import Tensor
from .config import ModelConfig
from .errors import FormatError, ProtocolError
from .network import decode_segmentation, encode_view
from .scenes import SceneSample

WIRE_MAGIC = b"DCPM"
HEADER_BYTES = 17  # 4 magic + 1 kind + 2 src + 2 dst + 4 frame + 4 payload length

KIND_REQUEST = 1
KIND_RELEVANCE = 2
KIND_GRANT = 3
KIND_NAMES = {KIND_REQUEST: "request", KIND_RELEVANCE: "relevance", KIND_GRANT: "grant"}


@dataclass
class ProtocolMessage:
    kind: int
    src: int
    dst: int
    frame: int
    payload: bytes

    @property
    def wire_bytes(self) -> int:
        return HEADER_BYTES + len(self.payload)


def serialize_message(msg: ProtocolMessage) -> bytes:
    if msg.kind not in KIND_NAMES:
        raise ProtocolError(f"unknown message kind {msg.kind}")
    header = WIRE_MAGIC + struct.pack("<BHHII", msg.kind, msg.src, msg.dst, msg.frame, len(msg.payload))
    return header + msg.payload


def parse_message(buf: bytes) -> ProtocolMessage:
    if len(buf) < HEADER_BYTES:
        raise FormatError(f"message truncated at {len(buf)} bytes")
    if buf[:4] != WIRE_MAGIC:
        raise FormatError(f"bad message magic {buf[:4]!r}")
    kind, src, dst, frame, plen = struct.unpack_from("<BHHII", buf, 4)
    if kind not in KIND_NAMES:
        raise FormatError(f"unknown message kind {kind}")
    if len(buf) != HEADER_BYTES + plen:
        raise FormatError(f"payload length {plen} disagrees with {len(buf) - HEADER_BYTES} bytes present")
    return ProtocolMessage(kind, src, dst, frame, buf[HEADER_BYTES:])


def request_message(src: int, dst: int, frame: int, request_vec: np.ndarray) -> ProtocolMessage:
    return ProtocolMessage(KIND_REQUEST, src, dst, frame, np.asarray(request_vec, "<f4").tobytes())


def relevance_message(src: int, dst: int, frame: int, relevance: float) -> ProtocolMessage:
    return ProtocolMessage(KIND_RELEVANCE, src, dst, frame, struct.pack("<f", relevance))


def grant_message(src: int, dst: int, frame: int, feature: np.ndarray) -> ProtocolMessage:
    return ProtocolMessage(KIND_GRANT, src, dst, frame, np.ascontiguousarray(feature, "<f4").tobytes())


def decode_feature_payload(msg: ProtocolMessage, shape) -> np.ndarray:
    count = int(np.prod(shape))
    if len(msg.payload) != 4 * count:
        raise FormatError(f"feature payload {len(msg.payload)} bytes, expected {4 * count}")
    return np.frombuffer(msg.payload, dtype="<f4").reshape(shape).astype(np.float64)


@dataclass
class CommLedger:
    """Per-message byte log; feature payloads separable from control plane."""

    entries: list[tuple[int, int, int, int, int]] = field(default_factory=list)
    feature_payload_bytes: int = 0
    total_wire_bytes: int = 0

    def log(self, msg: ProtocolMessage) -> None:
        self.entries.append((msg.frame, msg.src, msg.dst, msg.kind, msg.wire_bytes))
        self.total_wire_bytes += msg.wire_bytes
        if msg.kind == KIND_GRANT:
            self.feature_payload_bytes += len(msg.payload)

    def merge(self, other: "CommLedger") -> None:
        self.entries.extend(other.entries)
        self.feature_payload_bytes += other.feature_payload_bytes
        self.total_wire_bytes += other.total_wire_bytes

    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in KIND_NAMES.values()}
        for _, _, _, kind, _ in self.entries:
            out[KIND_NAMES[kind]] += 1
        return out

    def to_csv(self, path) -> None:
        lines = ["frame,src,dst,kind,bytes"]
        lines += [
            f"{frame},{src},{dst},{KIND_NAMES[kind]},{nbytes}"
            for frame, src, dst, kind, nbytes in self.entries
        ]
        Path(path).write_text("\n".join(lines) + "\n")


def mbpf(ledger: CommLedger, frames: int, mode: str = "feature_only") -> float:
    """Mean megabytes per frame; feature_only counts grant payloads only."""
    if frames < 1:
        raise ProtocolError("mbpf over zero frames")
    if mode == "feature_only":
        total = ledger.feature_payload_bytes
    elif mode == "total":
        total = ledger.total_wire_bytes
    else:
        raise ProtocolError(f"unknown accounting mode {mode!r}")
    return total / frames / 2**20


@dataclass
class FrameResult:
    predictions: list[np.ndarray]       # per-platform H x W class masks
    states: list[smim.SmimState]
    ledger: CommLedger


def run_frame(sample: SceneSample, params: dict[str, Tensor], cfg: ModelConfig) -> FrameResult:
    """Distributed inference for one frame, logging every message."""
    n = sample.n_platforms
    ledger = CommLedger()
    fshape = (cfg.feature_size, cfg.feature_size, cfg.feature_channels)

    # phase 1: local encoding
    feats = [encode_view(Tensor(sample.views[i]), params) for i in range(n)]

    # phase 2: self-information decisions
    states = []
    for i in range(n):
        q, k = smim.encode_query_key(feats[i], params)
        p = smim.self_confidence(q, k).item()
        st = smim.SmimState(q=q.data, k=k.data, confidence=p)
        st.requested = smim.decide_request(p, cfg)
        states.append(st)
    keys = [Tensor(st.k) for st in states]

    # phase 3: request broadcast and relevance replies
    for i in range(n):
        st = states[i]
        if not st.requested:
            continue
        r = smim.encode_request(feats[i], params)
        st.r = r.data
        replies: dict[int, Tensor] = {}
        for j in range(n):
            if j == i:
                continue
            req_msg = request_message(i, j, sample.frame, r.data)
            ledger.log(req_msg)
            # candidate j evaluates the (float32 wire copy of the) request
            r_wire = Tensor(decode_feature_payload(req_msg, (cfg.request_dim,)))
            rel = smim.candidate_relevance(r_wire, keys[j], params["smim.w_alpha"]).item()
            reply = relevance_message(j, i, sample.frame, rel)
            ledger.log(reply)
            (rel_wire,) = struct.unpack("<f", reply.payload)
            replies[j] = Tensor(float(rel_wire))
        scores = smim.match_scores(replies)
        st.scores = {j: s.item() for j, s in scores.items()}
        st.supporters = smim.select_supporters(st.scores, n, requested=True)

    # phase 4: feature grants, fusion, decoding
    predictions = []
    for i in range(n):
        st = states[i]
        if st.requested and st.supporters:
            related: dict[int, Tensor] = {}
            scores: dict[int, Tensor] = {}
            for j in sorted(st.supporters):
                msg = grant_message(j, i, sample.frame, feats[j].data)
                ledger.log(msg)
                f_collab = Tensor(decode_feature_payload(msg, fshape))
                related[j] = rff.compute_related(feats[i], f_collab, params)
                # dropped candidates are zeroed without renormalizing survivors
                scores[j] = Tensor(st.scores[j])
            fused = rff.fuse(feats[i], related, Tensor(st.confidence), scores, requested=True)
        else:
            fused = rff.fuse(feats[i], {}, Tensor(st.confidence), {}, requested=False,
                             strict_gate=cfg.strict_confidence_gate)
        logits = decode_segmentation(fused, params)
        predictions.append(np.argmax(logits.data, axis=2))
    return FrameResult(predictions, states, ledger)


def run_frames(
    samples: list[SceneSample],
    params: dict[str, Tensor],
    cfg: ModelConfig,
    workers: int = 1,
) -> tuple[list[FrameResult], CommLedger]:
    """Run many frames; results and ledger order are independent of the
    worker count."""
    if workers <= 1:
        results = [run_frame(s, params, cfg) for s in samples]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: run_frame(s, params, cfg), samples))
    ledger = CommLedger()
    for res in results:
        ledger.merge(res.ledger)
    return results, ledger
