"""Primitive image/geometry operations: box IoU, morphology, Otsu, mask OR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import BBox, BinaryMask


@dataclass(frozen=True)
class StructuringElement:
    """Rectangular structuring element anchored at (height//2, width//2)."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("structuring element sides must be >= 1")

    @classmethod
    def square(cls, k: int) -> "StructuringElement":
        return cls(width=k, height=k)

    @property
    def anchor(self) -> tuple[int, int]:
        return self.height // 2, self.width // 2


def box_iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union of two boxes; 0.0 when disjoint."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area() + b.area() - inter)


def erode_bits(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    ay, ax = se.anchor
    return _kernels.erode(np.ascontiguousarray(bits), se.height, se.width, ay, ax)


def dilate_bits(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    ay, ax = se.anchor
    return _kernels.dilate(np.ascontiguousarray(bits), se.height, se.width, ay, ax)


def open_bits(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Morphological opening (erode then dilate), border padded with False."""
    return dilate_bits(erode_bits(bits, se), se)


def close_bits(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    """Morphological closing (dilate then erode).

    Evaluated on a canvas padded by the kernel size so the dilation's
    overhang beyond the image survives the erosion; plain pad-false erosion
    of the dilated image would eat true pixels at the border and closing
    would not be extensive there.
    """
    h, w = bits.shape
    ph, pw = se.height, se.width
    canvas = np.zeros((h + 2 * ph, w + 2 * pw), dtype=bool)
    canvas[ph:ph + h, pw:pw + w] = bits
    closed = erode_bits(dilate_bits(canvas, se), se)
    return closed[ph:ph + h, pw:pw + w]


def morph_open(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    return BinaryMask(open_bits(mask.bits, se))


def morph_close(mask: BinaryMask, se: StructuringElement) -> BinaryMask:
    return BinaryMask(close_bits(mask.bits, se))


def otsu_threshold(pixels: np.ndarray) -> int:
    """Threshold maximizing between-class variance; foreground is `> t`.

    Ties resolve to the smallest maximizing t. A uniform input returns its
    single value (every split has zero between-class variance), which makes
    the resulting foreground empty.

    The score w0*w1*(mu0-mu1)^2 is compared exactly: with integer class
    counts/sums it is proportional to (s0*n1 - s1*n0)^2 / (n0*n1), evaluated
    in arbitrary-precision ints to keep tie-breaking deterministic.
    """
    arr = np.asarray(pixels, dtype=np.uint8).ravel()
    if arr.size == 0:
        raise ValueError("otsu_threshold requires a non-empty input")
    hist = np.bincount(arr, minlength=256).astype(np.int64)
    nonzero = np.nonzero(hist)[0]
    if nonzero.size == 1:
        return int(nonzero[0])

    c0 = np.cumsum(hist)
    s0 = np.cumsum(hist * np.arange(256, dtype=np.int64))
    total_n = int(c0[-1])
    total_s = int(s0[-1])

    best_t = 0
    best_num = -1
    best_den = 1
    for t in range(256):
        n0 = int(c0[t])
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        diff = int(s0[t]) * n1 - (total_s - int(s0[t])) * n0
        num = diff * diff
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t = t
            best_num = num
            best_den = den
    return best_t


def mask_or(
    masks: list[BinaryMask], width: int | None = None, height: int | None = None
) -> BinaryMask:
    """Pixelwise OR; an empty list yields an all-false mask of the given size."""
    if not masks:
        if width is None or height is None:
            raise ValueError("mask_or of an empty list needs explicit dimensions")
        return BinaryMask(np.zeros((height, width), dtype=bool))
    shape = masks[0].bits.shape
    if width is not None and height is not None and shape != (height, width):
        raise ValueError(f"masks are {shape}, requested {(height, width)}")
    out = np.zeros(shape, dtype=bool)
    for m in masks:
        if m.bits.shape != shape:
            raise ValueError(f"mask shape {m.bits.shape} != {shape}")
        out |= m.bits
    return BinaryMask(out)
