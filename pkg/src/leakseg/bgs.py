"""Background modeling, difference enhancement, and the baseline mask.

Three background models share one contract: feed frames in order, get the
current background estimate back. The estimate is subtracted from the frame,
and the absolute difference is boosted by an adaptive gain
alpha = min(255 / (mu + sigma), 15) before any detection runs on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import BinaryMask, Frame, LeaksegError
from .imgops import StructuringElement, close_bits, open_bits

ALPHA_MAX = 15.0

BGS_METHODS = ("median", "mog2", "knn")


class BgsError(LeaksegError):
    pass


@dataclass
class BgsParams:
    method: str = "mog2"
    history: int = 30
    # mog2
    mog2_components: int = 5
    mog2_match_threshold: float = 16.0
    mog2_bg_ratio: float = 0.9
    mog2_var_init: float = 15.0
    mog2_var_min: float = 4.0
    mog2_var_max: float = 75.0
    learning_rate: float = 0.0  # 0 -> 1 / history
    # knn
    knn_samples: int = 0  # 0 -> ceil(history * 7 / 10)
    knn_radius2: float = 400.0
    knn_neighbors: int = 2
    seed: int = 7

    def effective_learning_rate(self) -> float:
        return self.learning_rate if self.learning_rate > 0 else 1.0 / self.history

    def effective_knn_samples(self) -> int:
        return self.knn_samples if self.knn_samples > 0 else math.ceil(self.history * 7 / 10)


def _round_u8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


class MedianModel:
    """Exact per-pixel median over a ring of the last `history` frames."""

    def __init__(self, params: BgsParams):
        self.history = params.history
        self._ring: np.ndarray | None = None
        self._count = 0
        self._pos = 0

    def update(self, pixels: np.ndarray) -> np.ndarray:
        if self._ring is None:
            self._ring = np.empty((self.history, *pixels.shape), dtype=np.uint8)
        elif self._ring.shape[1:] != pixels.shape:
            raise BgsError(
                f"frame shape changed mid-stream: {pixels.shape} vs {self._ring.shape[1:]}"
            )
        self._ring[self._pos] = pixels
        self._pos = (self._pos + 1) % self.history
        self._count = min(self._count + 1, self.history)

        n = self._count
        stack = self._ring[:n]
        if n % 2:
            med = np.partition(stack, n // 2, axis=0)[n // 2].astype(np.float64)
        else:
            part = np.partition(stack, (n // 2 - 1, n // 2), axis=0)
            med = (part[n // 2 - 1].astype(np.float64) + part[n // 2]) / 2.0
        return _round_u8(med)


class Mog2Model:
    """Per-pixel adaptive Gaussian mixture (weight, mean, variance per component)."""

    def __init__(self, params: BgsParams):
        self.p = params
        self.lr = params.effective_learning_rate()
        self.weights: np.ndarray | None = None
        self.means: np.ndarray | None = None
        self.variances: np.ndarray | None = None

    def update(self, pixels: np.ndarray) -> np.ndarray:
        k = self.p.mog2_components
        if self.weights is None:
            shape = (k, *pixels.shape)
            self.weights = np.zeros(shape, dtype=np.float64)
            self.means = np.zeros(shape, dtype=np.float64)
            self.variances = np.zeros(shape, dtype=np.float64)
            self.weights[0] = 1.0
            self.means[0] = pixels.astype(np.float64)
            self.variances[0] = self.p.mog2_var_init
            return pixels.copy()
        if self.weights.shape[1:] != pixels.shape:
            raise BgsError(
                f"frame shape changed mid-stream: {pixels.shape} vs {self.weights.shape[1:]}"
            )
        bg = _kernels.mog2_update(
            self.weights,
            self.means,
            self.variances,
            pixels.astype(np.float64),
            self.lr,
            self.p.mog2_var_init,
            self.p.mog2_var_min,
            self.p.mog2_var_max,
            self.p.mog2_match_threshold,
            self.p.mog2_bg_ratio,
        )
        return _round_u8(bg)


class KnnModel:
    """Per-pixel sample buffer; background = mean of density-supported samples.

    Once the buffer is full, incoming samples overwrite a uniformly random
    slot (seeded generator, so runs are reproducible).
    """

    def __init__(self, params: BgsParams):
        self.cap = params.effective_knn_samples()
        self.radius2 = params.knn_radius2
        self.kmin = params.knn_neighbors
        self._rng = np.random.Generator(np.random.PCG64(params.seed))
        self._samples: np.ndarray | None = None
        self._counts: np.ndarray | None = None
        self._full = False

    def update(self, pixels: np.ndarray) -> np.ndarray:
        if self._samples is None:
            self._samples = np.zeros((self.cap, *pixels.shape), dtype=np.uint8)
            self._counts = np.zeros(pixels.shape, dtype=np.int32)
        elif self._samples.shape[1:] != pixels.shape:
            raise BgsError(
                f"frame shape changed mid-stream: {pixels.shape} vs {self._samples.shape[1:]}"
            )
        if not self._full and int(self._counts.flat[0]) >= self.cap:
            self._full = True
        if self._full:
            slots = self._rng.integers(
                0, self.cap, size=pixels.shape, dtype=np.int32
            )
        else:
            slots = np.zeros(pixels.shape, dtype=np.int32)
        bg = _kernels.knn_background(
            self._samples, self._counts, pixels, slots, self.radius2, self.kmin
        )
        return _round_u8(bg)


_MODEL_CLASSES = {"median": MedianModel, "mog2": Mog2Model, "knn": KnnModel}


@dataclass
class BgsState:
    """Sequential per-video background model; single-owner mutation."""

    method: str
    params: BgsParams
    model: object = field(repr=False)
    frames_seen: int = 0


def bgs_init(method: str, params: BgsParams | None = None) -> BgsState:
    """Create an empty background model; the first update seeds it."""
    params = params or BgsParams(method=method)
    if method not in _MODEL_CLASSES:
        raise BgsError(f"unknown bgs method {method!r}; expected one of {BGS_METHODS}")
    if params.history < 1:
        raise BgsError(f"history must be >= 1, got {params.history}")
    if method == "mog2" and params.mog2_components < 1:
        raise BgsError(f"mog2 needs >= 1 component, got {params.mog2_components}")
    if method == "knn" and params.effective_knn_samples() < 1:
        raise BgsError("knn needs a positive sample capacity")
    return BgsState(method=method, params=params, model=_MODEL_CLASSES[method](params))


def bgs_update(state: BgsState, frame: Frame) -> Frame:
    """Feed one frame; returns the current background estimate."""
    bg = state.model.update(frame.pixels)
    state.frames_seen += 1
    return Frame(index=frame.index, pixels=bg)


@dataclass
class DiffImage:
    """Absolute frame/background difference, raw or gain-enhanced."""

    values: np.ndarray  # (H, W) uint8
    alpha_used: float = 1.0
    enhanced: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2 or self.values.dtype != np.uint8:
            raise ValueError("diff values must be a 2-D uint8 array")
        if not 0.0 < self.alpha_used <= ALPHA_MAX:
            raise ValueError(f"alpha_used {self.alpha_used} outside (0, {ALPHA_MAX}]")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def abs_diff(frame: Frame, background: Frame) -> DiffImage:
    """Per-pixel |frame - background| as a raw (un-enhanced) difference."""
    if frame.pixels.shape != background.pixels.shape:
        raise BgsError(
            f"frame {frame.pixels.shape} vs background {background.pixels.shape}"
        )
    diff = np.abs(frame.pixels.astype(np.int16) - background.pixels.astype(np.int16))
    return DiffImage(values=diff.astype(np.uint8), alpha_used=1.0, enhanced=False)


def adaptive_alpha(raw: DiffImage) -> float:
    """Adaptive gain min(255 / (mu + sigma), 15) over the raw difference.

    mu and sigma are the mean and population standard deviation over all
    pixels; a zero mu + sigma (all-zero difference) returns the clamp limit.
    """
    if raw.enhanced:
        raise ValueError("adaptive_alpha expects an un-enhanced difference")
    v = raw.values.astype(np.float64)
    denom = float(v.mean() + v.std())
    if denom <= 0.0:
        return ALPHA_MAX
    return min(255.0 / denom, ALPHA_MAX)


def enhance(raw: DiffImage, alpha: float) -> DiffImage:
    """Multiply by alpha and clip to [0, 255]."""
    if not 0.0 < alpha <= ALPHA_MAX:
        raise ValueError(f"alpha {alpha} outside (0, {ALPHA_MAX}]")
    boosted = np.clip(np.rint(raw.values.astype(np.float64) * alpha), 0, 255)
    return DiffImage(values=boosted.astype(np.uint8), alpha_used=alpha, enhanced=True)


def baseline_mask(
    raw: DiffImage,
    scale: float = 15.0,
    threshold: float = 40.0,
    open_se: StructuringElement | None = StructuringElement.square(3),
    close_se: StructuringElement | None = None,
) -> BinaryMask:
    """Fixed-gain thresholded mask: (min(raw * scale, 255) > threshold), then
    opening, then closing if a closing kernel is given."""
    if raw.enhanced:
        raise ValueError("baseline_mask expects an un-enhanced difference")
    scaled = np.minimum(raw.values.astype(np.float64) * scale, 255.0)
    bits = scaled > threshold
    if open_se is not None:
        bits = open_bits(bits, open_se)
    if close_se is not None:
        bits = close_bits(bits, close_se)
    return BinaryMask(bits)
