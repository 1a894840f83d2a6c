"""Flat binary tensor files and checkpoint manifests.

Tensor format (magic "DCPT"): u32 rank, u32 per dimension, then the
row-major little-endian float32 payload.  Values are float64 in memory;
arrays that round-trip bitwise must therefore hold float32-representable
values (everything the generator and the wire produce does).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"DCPT"


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape) if arr.ndim else b""
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise FormatError("tensor blob shorter than header")
    if buf[:4] != MAGIC:
        raise FormatError(f"bad tensor magic {buf[:4]!r}")
    (rank,) = struct.unpack_from("<I", buf, 4)
    if rank > 8:
        raise FormatError(f"implausible tensor rank {rank}")
    if len(buf) < 8 + 4 * rank:
        raise FormatError("tensor blob truncated in dimension list")
    dims = struct.unpack_from(f"<{rank}I", buf, 8) if rank else ()
    count = int(np.prod(dims)) if rank else 1
    payload = buf[8 + 4 * rank :]
    if len(payload) != 4 * count:
        raise FormatError(f"tensor payload is {len(payload)} bytes, expected {4 * count}")
    data = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return data.astype(np.float64)


def save_tensor(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_to_bytes(arr))


def load_tensor(path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())


def save_tensor_dict(dirpath, tensors: dict[str, np.ndarray], manifest_name: str = "manifest.txt") -> None:
    """Write a named set of tensors: a text manifest (key -> file) plus
    one DCPT file per tensor."""
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    lines = []
    for key in sorted(tensors):
        fname = key.replace("/", "_") + ".dcpt"
        save_tensor(d / fname, tensors[key])
        lines.append(f"{key} {fname}")
    (d / manifest_name).write_text("\n".join(lines) + "\n")


def load_tensor_dict(dirpath, manifest_name: str = "manifest.txt") -> dict[str, np.ndarray]:
    d = Path(dirpath)
    manifest = d / manifest_name
    if not manifest.is_file():
        raise FormatError(f"missing manifest {manifest}")
    out: dict[str, np.ndarray] = {}
    for line in manifest.read_text().splitlines():
        if not line.strip():
            continue
        try:
            key, fname = line.split()
        except ValueError as exc:
            raise FormatError(f"malformed manifest line {line!r}") from exc
        out[key] = load_tensor(d / fname)
    return out
