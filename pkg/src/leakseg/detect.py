"""Zero-shot detector abstraction: prompt pair + threshold, NMS, backends.

A backend proposes candidate boxes with a positive- and negative-prompt score
each; `detect` keeps only candidates whose best-matching prompt is the
positive one and whose positive score clears tau_vlm, clipped to the image.

Backends:
  * OracleDetector  - tight bounds of ground-truth connected components.
  * ScriptedDetector - replays a fixed per-frame script.
  * RemoteDetector  - speaks the inference-service wire protocol.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image
from scipy import ndimage

from .bgs import DiffImage
from .core import BBox, LeaksegError, ScoredBox
from .imgops import box_iou


class DetectorError(LeaksegError):
    """Backend failure; `retryable` hints whether a retry could succeed."""

    retryable = False


class TransportError(DetectorError):
    retryable = True


class ProtocolError(DetectorError):
    retryable = False


class ServiceStatusError(DetectorError):
    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"service returned status {status}: {detail}")
        self.status = status
        self.retryable = status >= 500


@dataclass(frozen=True)
class DetectorQuery:
    positive_prompt: str = "white steam"
    negative_prompt: str = "white human, car, bird, bike, and other objects"
    tau_vlm: float = 0.12

    def __post_init__(self):
        if not self.positive_prompt or not self.negative_prompt:
            raise ValueError("prompts must be non-empty")
        if not 0.0 < self.tau_vlm < 1.0:
            raise ValueError(f"tau_vlm {self.tau_vlm} outside (0, 1)")


Candidate = tuple[BBox, float, float]  # box, positive score, negative score


class OracleDetector:
    """Perfect detector over ground truth: one box per 8-connected GT
    component of at least `min_component` pixels, positive score 1.0."""

    def __init__(self, gt_masks, min_component: int = 4):
        self.gt_masks = gt_masks
        self.min_component = min_component

    def propose(self, image: DiffImage, query: DetectorQuery,
                frame_index: int) -> list[Candidate]:
        bits = self.gt_masks[frame_index].bits
        labels, count = ndimage.label(bits, structure=np.ones((3, 3), dtype=int))
        out: list[Candidate] = []
        for region in range(1, count + 1):
            ys, xs = np.nonzero(labels == region)
            if ys.size < self.min_component:
                continue
            box = BBox(float(xs.min()), float(ys.min()),
                       float(xs.max() + 1), float(ys.max() + 1))
            out.append((box, 1.0, 0.0))
        return out


class ScriptedDetector:
    """Replays a per-frame fixture script {frame_index: [(box, pos, neg)]}."""

    def __init__(self, script: dict[int, list[Candidate]]):
        self.script = script

    def propose(self, image: DiffImage, query: DetectorQuery,
                frame_index: int) -> list[Candidate]:
        return list(self.script.get(frame_index, []))


def encode_gray_png(values: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(values, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class RemoteDetector:
    """Client for the POST /v1/detect endpoint of the inference service."""

    def __init__(self, endpoint: str, timeout: float = 30.0,
                 session: requests.Session | None = None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = session or requests.Session()

    def propose(self, image: DiffImage, query: DetectorQuery,
                frame_index: int | None = None) -> list[Candidate]:
        payload = {
            "image": encode_gray_png(image.values),
            "queries": [query.positive_prompt, query.negative_prompt],
            "threshold": query.tau_vlm,
        }
        try:
            resp = self.session.post(
                f"{self.endpoint}/v1/detect", json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"detect request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ServiceStatusError(resp.status_code, resp.text[:200])
        try:
            boxes = resp.json()["boxes"]
            out: list[Candidate] = []
            for b in boxes:
                box = BBox(float(b["x1"]), float(b["y1"]),
                           float(b["x2"]), float(b["y2"]))
                score = float(b["score"])
                if int(b["query_index"]) == 0:
                    out.append((box, score, 0.0))
                else:
                    out.append((box, 0.0, score))
            return out
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed detect response: {exc}") from exc


def detect(backend, image: DiffImage, query: DetectorQuery,
           frame_index: int | None = None) -> list[ScoredBox]:
    """Run the backend and apply the acceptance rule.

    A candidate survives iff its positive score >= its negative score
    (argmax over the prompt pair, positive wins ties), its positive score
    >= tau_vlm, and it still has positive area after clipping to the image.
    """
    results: list[ScoredBox] = []
    for box, pos, neg in backend.propose(image, query, frame_index):
        if neg > pos or pos < query.tau_vlm:
            continue
        clipped = box.clipped(image.width, image.height)
        if clipped is None:
            continue
        results.append(ScoredBox(box=clipped, score=pos, query_index=0))
    return results


def nms(boxes: list[ScoredBox], iou_threshold: float = 0.5) -> list[ScoredBox]:
    """Greedy NMS: descending score (ties by input order); a box is kept iff
    its IoU with every already-kept box is <= iou_threshold."""
    order = sorted(range(len(boxes)), key=lambda i: (-boxes[i].score, i))
    kept: list[ScoredBox] = []
    for i in order:
        cand = boxes[i]
        if all(box_iou(cand.box, k.box) <= iou_threshold for k in kept):
            kept.append(cand)
    return kept
