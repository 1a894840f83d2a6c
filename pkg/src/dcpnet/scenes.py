"""Procedural multi-view world: overlapping crops, degradation, modes.

A scene sample is built by painting a small world of colored shapes with
an exact per-pixel class mask, cropping N overlapping views from it, and
optionally degrading one designated victim platform.  Three assembly
modes mirror increasingly hard collaboration settings:

* homo-cis  — a clean copy of the victim's view is planted on another
  platform (complete information supplement);
* homo-pis  — partners only hold their own partially overlapping crops;
* hetero-pis — as homo-pis, but partner views additionally pass a fixed
  "second sensor" transform (channel remap + resolution round-trip).

All pixel data is float32-representable so dataset files round-trip
bitwise through the DCPT format.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import NoiseConfig, WorldSpec
from .errors import ConfigError, FormatError, InputError
from .tensorio import load_tensor, save_tensor

MODES = ("homo-cis", "homo-pis", "hetero-pis")

# fixed palette: one anchor color per class, background first
_PALETTE = np.array(
    [
        [0.15, 0.15, 0.15],
        [0.85, 0.20, 0.20],
        [0.20, 0.75, 0.25],
        [0.20, 0.35, 0.85],
        [0.90, 0.80, 0.20],
        [0.75, 0.25, 0.80],
        [0.25, 0.80, 0.80],
        [0.90, 0.55, 0.15],
    ]
)


@dataclass
class SceneSample:
    """One collaborative frame: N views with masks plus degradation info."""

    views: list[np.ndarray]          # N arrays H x W x 3, float64 values in [0, 1]
    masks: list[np.ndarray]          # N arrays H x W, int class ids
    degraded: list[bool]
    victim: int
    clean_twin: int | None           # platform holding the victim's noise-free view (homo-cis)
    mode: str
    seed: int
    frame: int

    @property
    def n_platforms(self) -> int:
        return len(self.views)


def _f32(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float32).astype(np.float64)


def generate_world(spec: WorldSpec, rng: np.random.Generator | None = None):
    """Paint one world: returns (image H x W x 3, mask H x W)."""
    if spec.classes > len(_PALETTE):
        raise ConfigError(f"at most {len(_PALETTE)} classes supported by the palette")
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    n = spec.world_size
    image = np.empty((n, n, 3))
    image[:] = _PALETTE[0]
    image += rng.normal(0.0, 0.02, size=image.shape)
    mask = np.zeros((n, n), dtype=np.int64)

    n_shapes = rng.poisson(spec.shape_density * (n / 32) ** 2) if spec.shape_density > 0 else 0
    yy, xx = np.mgrid[0:n, 0:n]
    for _ in range(n_shapes):
        cls = int(rng.integers(1, spec.classes))
        kind = rng.choice(("rect", "ellipse", "strip"))
        cy, cx = rng.integers(0, n, size=2)
        ry, rx = rng.integers(n // 16, n // 4, size=2)
        if kind == "rect":
            region = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        elif kind == "ellipse":
            region = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            angle = rng.uniform(0, np.pi)
            width = rng.integers(2, max(3, n // 20))
            region = np.abs((yy - cy) * np.cos(angle) - (xx - cx) * np.sin(angle)) <= width
        color = _PALETTE[cls] + rng.normal(0.0, 0.04, size=3)
        image[region] = color + rng.normal(0.0, 0.02, size=(int(region.sum()), 3))
        mask[region] = cls
    return _f32(np.clip(image, 0.0, 1.0)), mask


def crop_views(
    image: np.ndarray,
    mask: np.ndarray,
    view_size: int,
    n_views: int,
    rng: np.random.Generator,
    min_sep: int = 0,
):
    """N randomly placed crops; each view keeps its exact mask crop.

    The first crop lands anywhere; later crops are rejection-sampled to
    sit at least `min_sep` pixels (Chebyshev) from the first one.  Spread
    placement keeps partner views from collapsing onto the first view, so
    whole-view descriptors of different platforms stay distinguishable.
    When the first crop lands where the constraint cannot be met (or the
    retry budget runs out) the last uniform draw is kept as-is.
    """
    if n_views < 2:
        raise InputError("need at least 2 views")
    world = image.shape[0]
    if view_size > world:
        raise InputError(f"view {view_size} larger than world {world}")
    hi = world - view_size + 1
    ovy, ovx = (int(v) for v in rng.integers(0, hi, size=2))
    offsets = [(ovy, ovx)]
    for _ in range(n_views - 1):
        for _try in range(64):
            oy, ox = (int(v) for v in rng.integers(0, hi, size=2))
            if max(abs(oy - ovy), abs(ox - ovx)) >= min_sep:
                break
        offsets.append((oy, ox))
    views = [image[oy : oy + view_size, ox : ox + view_size].copy() for oy, ox in offsets]
    masks = [mask[oy : oy + view_size, ox : ox + view_size].copy() for oy, ox in offsets]
    return views, masks, offsets


def degrade(view: np.ndarray, cfg: NoiseConfig, rng: np.random.Generator) -> np.ndarray:
    """Apply one degradation; the mask is never touched."""
    if cfg.kind == "gaussian":
        out = view + rng.normal(0.0, cfg.strength, size=view.shape)
        return _f32(np.clip(out, 0.0, 1.0))
    if cfg.kind == "occlusion":
        h, w = view.shape[:2]
        # sampled strictly inside [0.25, 0.5] so integer rounding of the
        # rectangle sides cannot push the realized area outside the band
        frac = rng.uniform(0.26, 0.49)
        rh = int(rng.integers(h // 2, h + 1))
        rw = max(1, min(w, int(round(frac * h * w / rh))))
        oy = int(rng.integers(0, h - rh + 1))
        ox = int(rng.integers(0, w - rw + 1))
        out = view.copy()
        out[oy : oy + rh, ox : ox + rw] = 0.0
        return _f32(out)
    if cfg.kind == "blur":
        pad = 2
        xp = np.pad(view, ((pad, pad), (pad, pad), (0, 0)), mode="edge")
        acc = np.zeros_like(view)
        for i in range(5):
            for j in range(5):
                acc += xp[i : i + view.shape[0], j : j + view.shape[1]]
        return _f32(acc / 25.0)
    raise InputError(f"unknown noise kind {cfg.kind!r}")


def _hetero_transform(view: np.ndarray) -> np.ndarray:
    """Fixed stand-in for a different imaging payload: channel remap plus
    a 2x down/up resolution round-trip."""
    remap = view[:, :, [2, 0, 1]] * np.array([0.9, 1.05, 0.85]) + 0.03
    down = remap[::2, ::2]
    up = np.repeat(np.repeat(down, 2, axis=0), 2, axis=1)
    return _f32(np.clip(up, 0.0, 1.0))


def make_sample(
    spec: WorldSpec,
    mode: str,
    frame: int,
    seed: int,
    n_platforms: int = 4,
    noise_kinds: tuple[str, ...] = ("gaussian", "occlusion"),
    noise_strength: float = 0.72,
    degrade_prob: float = 0.5,
) -> SceneSample:
    """Build one sample deterministically from (seed, frame)."""
    if mode not in MODES:
        raise InputError(f"unknown mode {mode!r}, expected one of {MODES}")
    rng = np.random.default_rng((seed, frame))
    image, mask = generate_world(spec, rng)
    views, masks, _ = crop_views(
        image, mask, spec.view_size, n_platforms, rng, min_sep=spec.min_view_separation
    )

    victim = 0
    clean_view = views[victim].copy()
    degraded = [False] * n_platforms
    if rng.random() < degrade_prob:
        degraded[victim] = True
        for kind in noise_kinds:
            views[victim] = degrade(views[victim], NoiseConfig(kind, noise_strength), rng)

    clean_twin = None
    if mode == "homo-cis":
        clean_twin = int(rng.integers(1, n_platforms))
        views[clean_twin] = clean_view.copy()
        masks[clean_twin] = masks[victim].copy()
    elif mode == "hetero-pis":
        for j in range(n_platforms):
            if j != victim:
                views[j] = _hetero_transform(views[j])

    return SceneSample(views, masks, degraded, victim, clean_twin, mode, seed, frame)


def make_dataset(
    spec: WorldSpec,
    mode: str,
    n_samples: int,
    seed: int,
    n_platforms: int = 4,
    **kwargs,
) -> list[SceneSample]:
    return [
        make_sample(spec, mode, frame, seed, n_platforms=n_platforms, **kwargs)
        for frame in range(n_samples)
    ]


# ---------------------------------------------------------------------------
# on-disk layout: manifest.txt plus DCPT tensors per sample


def save_dataset(samples: list[SceneSample], dirpath) -> None:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    lines = [f"count {len(samples)}"]
    for s in samples:
        twin = -1 if s.clean_twin is None else s.clean_twin
        flags = "".join("1" if f else "0" for f in s.degraded)
        lines.append(f"sample {s.frame} {s.mode} {s.seed} {s.victim} {twin} {flags}")
        for i in range(s.n_platforms):
            save_tensor(d / f"f{s.frame:05d}_view{i}.dcpt", s.views[i])
            save_tensor(d / f"f{s.frame:05d}_mask{i}.dcpt", s.masks[i].astype(np.float64))
    (d / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_dataset(dirpath) -> list[SceneSample]:
    d = Path(dirpath)
    manifest = d / "manifest.txt"
    if not manifest.is_file():
        raise FormatError(f"missing manifest {manifest}")
    lines = manifest.read_text().splitlines()
    if not lines or not lines[0].startswith("count "):
        raise FormatError("manifest missing count header")
    samples = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 7 or parts[0] != "sample":
            raise FormatError(f"malformed manifest line {line!r}")
        frame, mode, seed, victim, twin = int(parts[1]), parts[2], int(parts[3]), int(parts[4]), int(parts[5])
        degraded = [c == "1" for c in parts[6]]
        n = len(degraded)
        views = [load_tensor(d / f"f{frame:05d}_view{i}.dcpt") for i in range(n)]
        masks = [load_tensor(d / f"f{frame:05d}_mask{i}.dcpt").astype(np.int64) for i in range(n)]
        samples.append(
            SceneSample(views, masks, degraded, victim, None if twin < 0 else twin, mode, seed, frame)
        )
    expected = int(lines[0].split()[1])
    if len(samples) != expected:
        raise FormatError(f"manifest promises {expected} samples, found {len(samples)}")
    return samples
