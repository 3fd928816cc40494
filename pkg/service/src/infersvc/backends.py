"""Detection/segmentation backends: deterministic mock and real models.

The mock backend is fully deterministic and needs no model weights:
detections replay a fixture file keyed by the sha256 of the request's PNG
bytes (a "*" entry matches any image), and segmentation fills each box's
rectangle. The model backend loads OWLv2 via transformers and a SAM-2
predictor when those packages and weights are available.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .rle import encode_mask


class BackendError(Exception):
    """Model-side failure; mapped to HTTP 500."""


def _clip_box(box: dict, width: int, height: int) -> dict | None:
    x1 = min(max(float(box["x1"]), 0.0), float(width))
    y1 = min(max(float(box["y1"]), 0.0), float(height))
    x2 = min(max(float(box["x2"]), 0.0), float(width))
    y2 = min(max(float(box["y2"]), 0.0), float(height))
    if x1 >= x2 or y1 >= y2:
        return None
    return {**box, "x1": x1, "y1": y1, "x2": x2, "y2": y2}


def fill_box(bits: np.ndarray, box) -> None:
    h, w = bits.shape
    x1 = max(0, int(math.floor(box["x1"])))
    y1 = max(0, int(math.floor(box["y1"])))
    x2 = min(w, int(math.ceil(box["x2"])))
    y2 = min(h, int(math.ceil(box["y2"])))
    if x1 < x2 and y1 < y2:
        bits[y1:y2, x1:x2] = True


class MockBackend:
    """Scripted responses keyed by image content hash."""

    def __init__(self, fixtures_path: str | None = None):
        self.fixtures: dict[str, list[dict]] = {}
        if fixtures_path:
            raw = json.loads(Path(fixtures_path).read_text())
            for key, boxes in raw.items():
                self.fixtures[key] = [
                    {
                        "x1": float(b["x1"]), "y1": float(b["y1"]),
                        "x2": float(b["x2"]), "y2": float(b["y2"]),
                        "score": float(b["score"]),
                        "query_index": int(b["query_index"]),
                    }
                    for b in boxes
                ]

    @property
    def ready(self) -> bool:
        return True

    def detect(self, png_bytes: bytes, image: np.ndarray, queries: list[str],
               threshold: float) -> list[dict]:
        key = hashlib.sha256(png_bytes).hexdigest()
        scripted = self.fixtures.get(key, self.fixtures.get("*", []))
        height, width = image.shape
        out = []
        for box in scripted:
            # acceptance rule, applied server-side: positive-prompt argmax
            # and threshold, then clip to the image
            if box["query_index"] != 0 or box["score"] < threshold:
                continue
            clipped = _clip_box(box, width, height)
            if clipped is not None:
                out.append(clipped)
        return out

    def segment(self, image: np.ndarray, boxes: list[dict]) -> list[list[int]]:
        masks = []
        for box in boxes:
            bits = np.zeros(image.shape, dtype=bool)
            fill_box(bits, box)
            masks.append(encode_mask(bits))
        return masks


class ModelBackend:
    """OWLv2 detector + SAM-2 segmenter; heavyweight, lazily loaded.

    `load()` blocks until both models are up; the app serves 503 until then.
    """

    DETECTOR_ID = "google/owlv2-base-patch16-ensemble"
    SAM_ID = "facebook/sam2.1-hiera-small"

    def __init__(self):
        self._ready = False
        self._processor = None
        self._detector = None
        self._segmenter = None

    @property
    def ready(self) -> bool:
        return self._ready

    def load(self) -> None:
        import torch  # noqa: F401
        from transformers import Owlv2ForObjectDetection, Owlv2Processor

        self._processor = Owlv2Processor.from_pretrained(self.DETECTOR_ID)
        self._detector = Owlv2ForObjectDetection.from_pretrained(self.DETECTOR_ID)
        self._detector.eval()
        try:
            from sam2.sam2_image_predictor import SAM2ImagePredictor

            self._segmenter = SAM2ImagePredictor.from_pretrained(self.SAM_ID)
        except ImportError:
            self._segmenter = None
        self._ready = True

    def detect(self, png_bytes: bytes, image: np.ndarray, queries: list[str],
               threshold: float) -> list[dict]:
        import torch
        from PIL import Image

        rgb = Image.fromarray(image, mode="L").convert("RGB")
        inputs = self._processor(text=[queries], images=rgb, return_tensors="pt")
        with torch.no_grad():
            outputs = self._detector(**inputs)
        target_size = torch.tensor([[image.shape[0], image.shape[1]]])
        results = self._processor.post_process_object_detection(
            outputs, threshold=0.0, target_sizes=target_size)[0]
        out = []
        for score, label, box in zip(results["scores"], results["labels"],
                                     results["boxes"]):
            query_index = int(label)
            value = float(score)
            if query_index != 0 or value < threshold:
                continue
            x1, y1, x2, y2 = (float(v) for v in box)
            clipped = _clip_box(
                {"x1": x1, "y1": y1, "x2": x2, "y2": y2,
                 "score": value, "query_index": query_index},
                image.shape[1], image.shape[0])
            if clipped is not None:
                out.append(clipped)
        return out

    def segment(self, image: np.ndarray, boxes: list[dict]) -> list[list[int]]:
        if self._segmenter is None:
            raise BackendError("segmenter model is not available")
        import numpy as _np
        from PIL import Image

        rgb = _np.asarray(Image.fromarray(image, mode="L").convert("RGB"))
        self._segmenter.set_image(rgb)
        masks = []
        for box in boxes:
            prompt = _np.array([box["x1"], box["y1"], box["x2"], box["y2"]])
            pred, _, _ = self._segmenter.predict(box=prompt,
                                                 multimask_output=False)
            masks.append(encode_mask(pred[0].astype(bool)))
        return masks
