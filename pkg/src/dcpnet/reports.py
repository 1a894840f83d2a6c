"""Report files: metrics.json, a method-comparison CSV table, PGM/PPM dumps."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .metrics import MetricsRecord

TABLE_HEADER = "Type,Method,Noisy,Normal,Avg.,Comm. Cost,CE"

_METHOD_TYPE = {
    "no-interaction": "individual",
    "concat-all": "centralized",
    "aux-view-attention": "centralized",
    "random-selection": "distributed",
    "dcp-net": "distributed",
}


def write_pgm(path, mask: np.ndarray, maxval: int = 255) -> None:
    """Binary (P5) grayscale image from an integer grid scaled to maxval."""
    mask = np.asarray(mask)
    top = max(1, int(mask.max()))
    gray = (mask.astype(np.float64) / top * maxval).round().astype(np.uint8)
    h, w = gray.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n{maxval}\n".encode() + gray.tobytes())


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    return _read_netpbm(buf, b"P5", channels=1)


def write_ppm(path, image: np.ndarray) -> None:
    """Binary (P6) color image from float values in [0, 1]."""
    rgb = (np.clip(np.asarray(image), 0.0, 1.0) * 255).round().astype(np.uint8)
    h, w, _ = rgb.shape
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + rgb.tobytes())


def read_ppm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    return _read_netpbm(buf, b"P6", channels=3)


def _read_netpbm(buf: bytes, magic: bytes, channels: int) -> np.ndarray:
    if not buf.startswith(magic):
        raise FormatError(f"bad netpbm magic {buf[:2]!r}")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(buf) and not buf[end : end + 1].isspace():
            end += 1
        fields.append(int(buf[pos:end]))
        pos = end
    pos += 1  # single whitespace after maxval
    w, h, _ = fields
    data = np.frombuffer(buf, dtype=np.uint8, count=h * w * channels, offset=pos)
    if data.size != h * w * channels:
        raise FormatError("netpbm payload truncated")
    return data.reshape((h, w) if channels == 1 else (h, w, channels))


def table_row(record: MetricsRecord) -> str:
    mtype = _METHOD_TYPE.get(record.method, "distributed")
    ce = "-" if record.ce is None else f"{record.ce:.2f}"

    def pct(x: float) -> str:
        return "-" if x != x else f"{100.0 * x:.2f}"  # NaN-safe

    return (
        f"{mtype},{record.method},{pct(record.miou_noisy)},{pct(record.miou_normal)},"
        f"{pct(record.miou_avg)},{record.comm_cost_mbpf:.3f},{ce}"
    )


def emit_report(records: list[MetricsRecord], dirpath, prediction_dumps=None) -> None:
    """Write metrics.json and tables.csv; optionally dump predictions.

    `prediction_dumps` maps a file stem to either an integer class mask
    (written as PGM) or a float color image (written as PPM).
    """
    d = Path(dirpath)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create report dir {d}: {exc}") from exc
    (d / "metrics.json").write_text(json.dumps([r.as_dict() for r in records], indent=2) + "\n")
    lines = [TABLE_HEADER] + [table_row(r) for r in records]
    (d / "tables.csv").write_text("\n".join(lines) + "\n")
    for stem, arr in (prediction_dumps or {}).items():
        arr = np.asarray(arr)
        if arr.ndim == 2:
            write_pgm(d / f"{stem}.pgm", arr)
        else:
            write_ppm(d / f"{stem}.ppm", arr)


def load_metrics(path) -> list[MetricsRecord]:
    raw = json.loads(Path(path).read_text())
    return [MetricsRecord(**{k: v for k, v in item.items()}) for item in raw]
