"""Convert validated boxes into a frame mask.

Two paths: the traditional one (per-box Otsu + morphology on the enhanced
difference) and the promptable-segmenter one (one mask per box from a
backend, OR-combined). Per-box Otsu is deliberate: leaks are locally bright
against a near-black difference background, so a global threshold would be
dominated by background pixels.
"""

from __future__ import annotations

import math

import numpy as np
import requests

from .bgs import DiffImage
from .core import BBox, BinaryMask, ScoredBox
from .detect import (ProtocolError, ServiceStatusError, TransportError,
                     encode_gray_png)
from .imgops import StructuringElement, close_bits, open_bits, otsu_threshold


def box_to_slices(box: BBox, width: int, height: int):
    """Integer pixel window covered by a (possibly sub-pixel) box, or None."""
    x1 = max(0, int(math.floor(box.x1)))
    y1 = max(0, int(math.floor(box.y1)))
    x2 = min(width, int(math.ceil(box.x2)))
    y2 = min(height, int(math.ceil(box.y2)))
    if x1 >= x2 or y1 >= y2:
        return None
    return y1, y2, x1, x2


def segment_traditional(
    image: DiffImage,
    boxes: list[ScoredBox],
    open_se: StructuringElement | None = StructuringElement.square(3),
    close_se: StructuringElement | None = None,
) -> BinaryMask:
    """Otsu-threshold each box interior, clean it up morphologically, and OR
    the per-box masks into a frame mask (false outside every box)."""
    out = np.zeros((image.height, image.width), dtype=bool)
    for scored in boxes:
        window = box_to_slices(scored.box, image.width, image.height)
        if window is None:
            continue
        y1, y2, x1, x2 = window
        interior = image.values[y1:y2, x1:x2]
        t = otsu_threshold(interior)
        sub = interior > t
        if open_se is not None:
            sub = open_bits(sub, open_se)
        if close_se is not None:
            sub = close_bits(sub, close_se)
        out[y1:y2, x1:x2] |= sub
    return BinaryMask(out)


class MockSegmenter:
    """Test backend: each box segments to its filled rectangle."""

    def masks(self, image: DiffImage, boxes: list[ScoredBox]) -> list[np.ndarray]:
        out = []
        for scored in boxes:
            bits = np.zeros((image.height, image.width), dtype=bool)
            window = box_to_slices(scored.box, image.width, image.height)
            if window is not None:
                y1, y2, x1, x2 = window
                bits[y1:y2, x1:x2] = True
            out.append(bits)
        return out


def decode_rle(runs: list[int], width: int, height: int) -> np.ndarray:
    """Decode a row-major RLE (alternating counts, false-run first)."""
    total = width * height
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if run < 0:
            raise ProtocolError(f"negative RLE run {run}")
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    if pos != total:
        raise ProtocolError(f"RLE decodes to {pos} pixels, expected {total}")
    return flat.reshape(height, width)


class RemoteSegmenter:
    """Client for the POST /v1/segment endpoint of the inference service."""

    def __init__(self, endpoint: str, timeout: float = 30.0,
                 session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def masks(self, image: DiffImage, boxes: list[ScoredBox]) -> list[np.ndarray]:
        payload = {
            "image": encode_gray_png(image.values),
            "boxes": [
                {"x1": b.box.x1, "y1": b.box.y1, "x2": b.box.x2, "y2": b.box.y2}
                for b in boxes
            ],
        }
        try:
            resp = self.session.post(
                f"{self.endpoint}/v1/segment", json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"segment request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceStatusError(resp.status_code, resp.text[:200])
        try:
            body = resp.json()
            rles = body["masks"]
            width = int(body["width"])
            height = int(body["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed segment response: {exc}") from exc
        if len(rles) != len(boxes):
            raise ProtocolError(f"{len(rles)} masks for {len(boxes)} boxes")
        if (width, height) != (image.width, image.height):
            raise ProtocolError(
                f"mask dimensions {width}x{height} != image "
                f"{image.width}x{image.height}"
            )
        return [decode_rle(r, width, height) for r in rles]


def segment_promptable(backend, image: DiffImage,
                       boxes: list[ScoredBox]) -> BinaryMask:
    """One mask per box from the backend, OR-combined; no boxes -> all-false
    without touching the backend."""
    out = np.zeros((image.height, image.width), dtype=bool)
    if not boxes:
        return BinaryMask(out)
    for bits in backend.masks(image, boxes):
        if bits.shape != out.shape:
            raise ProtocolError(
                f"per-box mask shape {bits.shape} != {out.shape}"
            )
        out |= bits
    return BinaryMask(out)
