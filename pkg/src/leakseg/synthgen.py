"""Deterministic synthetic clip generator with exact soft ground truth.

A clip is a static background plus a plume of drifting, growing, flickering
Gaussian puffs composited additively (hot gas brightens the scene), with
opaque interfering objects painted over the top. Ground truth is the puff
opacity field thresholded at gt_alpha_threshold, so it is known analytically
and never includes interferers.

Everything is a pure function of the SceneSpec: one seeded PCG64 stream
drives background noise and per-puff randomness in a fixed draw order, so the
same spec yields bit-identical clips.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .core import (BinaryMask, Frame, Manifest, ManifestEntry, VideoClip,
                   manifest_text, write_clip)

# Internal compositing constants (not part of SceneSpec: they define the
# renderer, not the scene).
PLUME_GAIN = 200.0          # intensity added at opacity 1.0
FLICKER_DEPTH = 0.5         # per-puff sinusoidal amplitude modulation
FLICKER_PERIOD = (8.0, 22.0)  # frames, drawn uniformly per puff
SHIMMER_STD = 0.45          # per-pixel turbulent shimmer of the plume term
VELOCITY_JITTER = 0.15      # std of per-puff drift perturbation, px/frame
CULL_AMP = 8e-3             # drop puffs whose peak possible amplitude sinks below
CONTRIB_EPS = 5e-4          # per-pixel contribution floor inside the kernel


@dataclass(frozen=True)
class BackgroundSpec:
    kind: str = "gradient"  # gradient | noise
    noise_sigma: float = 6.0


@dataclass(frozen=True)
class PlumeSpec:
    origin: tuple[float, float] = (90.0, 170.0)  # emission point (x, y)
    drift: tuple[float, float] = (0.5, -0.3)     # px/frame
    birth_rate: float = 0.3                      # puffs/frame
    growth: float = 0.05                         # sigma px/frame
    peak_opacity: float = 0.6
    init_radius: float = 4.0


@dataclass(frozen=True)
class InterfererSpec:
    shape: str                      # rectangle | ellipse
    size: tuple[float, float]       # (width, height)
    intensity: int
    start: tuple[float, float]      # center at frame 0
    velocity: tuple[float, float]   # px/frame


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    width: int = 320
    height: int = 240
    frame_count: int = 300
    background: BackgroundSpec = field(default_factory=BackgroundSpec)
    plume: PlumeSpec = field(default_factory=PlumeSpec)
    interferers: tuple[InterfererSpec, ...] = ()
    gt_alpha_threshold: float = 0.05


def _validate(spec: SceneSpec):
    if spec.frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    if spec.width < 1 or spec.height < 1:
        raise ValueError("dimensions must be positive")
    ox, oy = spec.plume.origin
    if not (0 <= ox < spec.width and 0 <= oy < spec.height):
        raise ValueError(f"emission point {spec.plume.origin} out of bounds")
    if not 0.0 < spec.plume.peak_opacity <= 1.0:
        raise ValueError("peak_opacity must lie in (0, 1]")
    if spec.plume.birth_rate < 0 or spec.plume.growth < 0:
        raise ValueError("birth_rate and growth must be non-negative")
    if spec.plume.init_radius <= 0:
        raise ValueError("init_radius must be positive")
    if not 0.0 < spec.gt_alpha_threshold < 1.0:
        raise ValueError("gt_alpha_threshold must lie in (0, 1)")
    if spec.background.kind not in ("gradient", "noise"):
        raise ValueError(f"unknown background kind {spec.background.kind!r}")
    for itf in spec.interferers:
        if itf.shape not in ("rectangle", "ellipse"):
            raise ValueError(f"unknown interferer shape {itf.shape!r}")


def _box_blur3(values: np.ndarray) -> np.ndarray:
    """3x3 box mean with edge replication; keeps the draw order trivial."""
    padded = np.pad(values, 1, mode="edge")
    out = np.zeros_like(values)
    for dy in range(3):
        for dx in range(3):
            out += padded[dy:dy + values.shape[0], dx:dx + values.shape[1]]
    return out / 9.0


def _make_background(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    xx = np.linspace(0.0, 1.0, spec.width)[None, :]
    yy = np.linspace(0.0, 1.0, spec.height)[:, None]
    base = 60.0 + 35.0 * xx + 15.0 * yy
    if spec.background.kind == "noise":
        base = base + rng.normal(0.0, spec.background.noise_sigma,
                                 size=(spec.height, spec.width))
    return np.clip(np.rint(base), 0, 255).astype(np.uint8)


@dataclass
class _Puff:
    born: int
    x0: float
    y0: float
    vx: float
    vy: float
    phase: float
    omega: float
    death_age: float


def _paint_interferer(frame: np.ndarray, itf: InterfererSpec, t: int):
    h, w = frame.shape
    cx = itf.start[0] + itf.velocity[0] * t
    cy = itf.start[1] + itf.velocity[1] * t
    half_w, half_h = itf.size[0] / 2.0, itf.size[1] / 2.0
    x1 = max(0, int(math.floor(cx - half_w)))
    x2 = min(w, int(math.ceil(cx + half_w)))
    y1 = max(0, int(math.floor(cy - half_h)))
    y2 = min(h, int(math.ceil(cy + half_h)))
    if x1 >= x2 or y1 >= y2:
        return
    if itf.shape == "rectangle":
        frame[y1:y2, x1:x2] = itf.intensity
    else:
        ys = np.arange(y1, y2, dtype=np.float64)[:, None]
        xs = np.arange(x1, x2, dtype=np.float64)[None, :]
        inside = (((xs - cx) / half_w) ** 2 + ((ys - cy) / half_h) ** 2) <= 1.0
        region = frame[y1:y2, x1:x2]
        region[inside] = itf.intensity


def generate_clip(spec: SceneSpec, clip_id: str = "synthetic") -> VideoClip:
    """Render a full clip with ground truth; identical spec -> identical clip."""
    _validate(spec)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    bg = _make_background(spec, rng).astype(np.float64)

    plume = spec.plume
    peak = plume.peak_opacity
    r0 = plume.init_radius
    # Age at which even the flicker maximum falls below the cull floor.
    cull_ratio = peak * (1.0 + FLICKER_DEPTH) / CULL_AMP
    if plume.growth > 0 and cull_ratio > 1.0:
        death_age = (r0 * math.sqrt(cull_ratio) - r0) / plume.growth
    else:
        death_age = float("inf")

    puffs: list[_Puff] = []
    birth_acc = 0.0
    frames: list[Frame] = []
    gt: list[BinaryMask] = []

    for t in range(spec.frame_count):
        birth_acc += plume.birth_rate
        births = int(birth_acc)
        birth_acc -= births
        for _ in range(births):
            jx, jy = rng.normal(0.0, VELOCITY_JITTER, size=2)
            phase = rng.uniform(0.0, 2.0 * math.pi)
            period = rng.uniform(*FLICKER_PERIOD)
            puffs.append(_Puff(
                born=t,
                x0=plume.origin[0],
                y0=plume.origin[1],
                vx=plume.drift[0] + jx,
                vy=plume.drift[1] + jy,
                phase=phase,
                omega=2.0 * math.pi / period,
                death_age=death_age,
            ))
        puffs = [p for p in puffs if (t - p.born) <= p.death_age]

        opacity = np.zeros((spec.height, spec.width), dtype=np.float64)
        if puffs:
            age = np.array([t - p.born for p in puffs], dtype=np.float64)
            sigma = r0 + plume.growth * age
            dissipation = (r0 / sigma) ** 2
            flicker = 1.0 + FLICKER_DEPTH * np.sin(
                np.array([p.omega for p in puffs]) * age
                + np.array([p.phase for p in puffs])
            )
            amp = peak * dissipation * flicker
            cx = np.array([p.x0 for p in puffs]) + np.array(
                [p.vx for p in puffs]) * age
            cy = np.array([p.y0 for p in puffs]) + np.array(
                [p.vy for p in puffs]) * age
            visible = amp > CONTRIB_EPS
            if np.any(visible):
                ucut = np.minimum(
                    np.log(amp[visible] / CONTRIB_EPS), _kernels.EXP_TABLE_UMAX
                )
                _kernels.render_puffs(
                    opacity,
                    np.ascontiguousarray(cx[visible]),
                    np.ascontiguousarray(cy[visible]),
                    np.ascontiguousarray(sigma[visible]),
                    np.ascontiguousarray(amp[visible]),
                    np.ascontiguousarray(ucut),
                    _kernels.EXP_TABLE,
                    _kernels.EXP_TABLE_SCALE,
                )

        # Turbulent shimmer on the plume term only; ground truth comes from
        # the clean opacity field, mirroring compositing from the noiseless
        # source footage. The noise is box-blurred so eddies span a few
        # pixels (iid per-pixel noise is not how plumes shimmer).
        noise = rng.standard_normal((spec.height, spec.width))
        eddies = _box_blur3(noise) * 3.0  # restore unit variance after blur
        shimmer = np.clip(1.0 + SHIMMER_STD * eddies, 0.0, 2.0)
        plume_term = np.minimum(opacity, 1.0) * shimmer * PLUME_GAIN
        pixels = np.clip(np.rint(bg + plume_term), 0, 255).astype(np.uint8)
        for itf in spec.interferers:
            _paint_interferer(pixels, itf, t)

        frames.append(Frame(index=t, pixels=pixels))
        gt.append(BinaryMask(opacity > spec.gt_alpha_threshold))

    return VideoClip(
        id=clip_id,
        frames=frames,
        gt=gt,
        has_interference=bool(spec.interferers),
    )


def standard_suite() -> list[SceneSpec]:
    """Ten fixed 320x240x300 specs: five clean, five with interferers.

    Seeds are 101..110 in order; specs vary emission point, drift, birth
    rate, growth, and peak opacity to cover slow/fast and faint/strong
    plumes.
    """
    clean = [
        SceneSpec(seed=101, plume=PlumeSpec(origin=(90, 175), drift=(0.5, -0.30),
                  birth_rate=0.30, growth=0.050, peak_opacity=0.65)),
        SceneSpec(seed=102, plume=PlumeSpec(origin=(210, 180), drift=(-0.45, -0.35),
                  birth_rate=0.25, growth=0.045, peak_opacity=0.60)),
        SceneSpec(seed=103, plume=PlumeSpec(origin=(70, 120), drift=(0.55, -0.15),
                  birth_rate=0.35, growth=0.060, peak_opacity=0.70)),
        SceneSpec(seed=104, background=BackgroundSpec(kind="noise", noise_sigma=5.0),
                  plume=PlumeSpec(origin=(160, 190), drift=(0.30, -0.40),
                  birth_rate=0.28, growth=0.050, peak_opacity=0.55)),
        SceneSpec(seed=105, plume=PlumeSpec(origin=(120, 160), drift=(0.40, -0.25),
                  birth_rate=0.32, growth=0.055, peak_opacity=0.75)),
    ]
    crossing = [
        InterfererSpec(shape="rectangle", size=(18, 12), intensity=225,
                       start=(-15, 60), velocity=(1.3, 0.05)),
        InterfererSpec(shape="ellipse", size=(24, 14), intensity=205,
                       start=(330, 95), velocity=(-1.1, 0.0)),
        InterfererSpec(shape="rectangle", size=(12, 26), intensity=240,
                       start=(-10, 40), velocity=(1.6, 0.10)),
        InterfererSpec(shape="ellipse", size=(16, 16), intensity=215,
                       start=(335, 55), velocity=(-1.4, 0.15)),
        InterfererSpec(shape="rectangle", size=(22, 10), intensity=230,
                       start=(-20, 80), velocity=(1.2, -0.05)),
    ]
    noisy = [
        SceneSpec(seed=106, plume=PlumeSpec(origin=(95, 170), drift=(0.5, -0.30),
                  birth_rate=0.30, growth=0.050, peak_opacity=0.65),
                  interferers=(crossing[0],)),
        SceneSpec(seed=107, plume=PlumeSpec(origin=(220, 175), drift=(-0.5, -0.30),
                  birth_rate=0.26, growth=0.045, peak_opacity=0.60),
                  interferers=(crossing[1], crossing[2])),
        SceneSpec(seed=108, background=BackgroundSpec(kind="noise", noise_sigma=5.0),
                  plume=PlumeSpec(origin=(80, 130), drift=(0.55, -0.20),
                  birth_rate=0.34, growth=0.060, peak_opacity=0.70),
                  interferers=(crossing[3],)),
        SceneSpec(seed=109, plume=PlumeSpec(origin=(150, 185), drift=(0.35, -0.40),
                  birth_rate=0.28, growth=0.050, peak_opacity=0.55),
                  interferers=(crossing[4], crossing[1])),
        SceneSpec(seed=110, plume=PlumeSpec(origin=(125, 165), drift=(0.45, -0.25),
                  birth_rate=0.32, growth=0.055, peak_opacity=0.75),
                  interferers=(crossing[2],)),
    ]
    return clean + noisy


def suite_clip_id(index: int) -> str:
    return f"synth{index + 1:02d}"


def write_suite(out_dir, limit: int | None = None) -> Path:
    """Render the standard suite into the dataset layout plus a manifest.

    Returns the manifest path. `limit` emits only the first N clips.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    specs = standard_suite()
    if limit is not None:
        specs = specs[:limit]
    entries = []
    for i, spec in enumerate(specs):
        clip = generate_clip(spec, clip_id=suite_clip_id(i))
        write_clip(clip, out_dir)
        entries.append(ManifestEntry(
            id=clip.id, path=clip.id,
            has_interference=clip.has_interference, excluded=False,
        ))
    manifest = Manifest(root=out_dir, entries=entries)
    manifest_path = out_dir / "manifest.csv"
    manifest_path.write_text(manifest_text(manifest))
    return manifest_path
