"""FastAPI app exposing /v1/detect, /v1/segment, and /healthz.

Env vars: MODE=model|mock (default mock), PORT (default 8750),
FIXTURES_PATH (mock-mode detection fixtures, JSON keyed by image sha256).
"""

from __future__ import annotations

import base64
import binascii
import io
import os
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from .backends import BackendError, MockBackend, ModelBackend

MAX_IMAGE_BYTES = 8 * 1024 * 1024
MAX_PIXELS = 4096 * 4096


class BoxIn(BaseModel):
    x1: float
    y1: float
    x2: float
    y2: float


class DetectRequest(BaseModel):
    image: str
    queries: list[str] = Field(min_length=1, max_length=8)
    threshold: float = Field(ge=0.0, le=1.0)


class BoxOut(BaseModel):
    x1: float
    y1: float
    x2: float
    y2: float
    score: float
    query_index: int


class DetectResponse(BaseModel):
    boxes: list[BoxOut]


class SegmentRequest(BaseModel):
    image: str
    boxes: list[BoxIn]


class SegmentResponse(BaseModel):
    masks: list[list[int]]
    width: int
    height: int


def _decode_image(b64: str) -> tuple[bytes, np.ndarray]:
    try:
        png_bytes = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(400, f"image is not valid base64: {exc}") from exc
    if len(png_bytes) > MAX_IMAGE_BYTES:
        raise HTTPException(413, "image payload too large")
    try:
        with Image.open(io.BytesIO(png_bytes)) as img:
            if img.width * img.height > MAX_PIXELS:
                raise HTTPException(413, "image dimensions too large")
            if img.mode != "L":
                img = img.convert("L")
            array = np.asarray(img, dtype=np.uint8)
    except HTTPException:
        raise
    except Exception as exc:
        raise HTTPException(400, f"image is not a decodable PNG: {exc}") from exc
    return png_bytes, array


def create_app(mode: str | None = None, fixtures_path: str | None = None,
               autoload: bool = True) -> FastAPI:
    mode = (mode or os.environ.get("MODE", "mock")).lower()
    if mode not in ("mock", "model"):
        raise ValueError(f"MODE must be 'mock' or 'model', got {mode!r}")
    fixtures_path = fixtures_path if fixtures_path is not None \
        else os.environ.get("FIXTURES_PATH")

    app = FastAPI(title="infersvc", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    def _validation_as_400(request, exc):
        # malformed request bodies are a client error, not a 422
        return JSONResponse({"detail": exc.errors()}, status_code=400)

    if mode == "mock":
        backend = MockBackend(fixtures_path)
    else:
        backend = ModelBackend()
        if autoload:
            def _load():
                try:
                    backend.load()
                except Exception:  # keep serving 503, but leave a trace
                    import traceback

                    traceback.print_exc()

            @app.on_event("startup")
            def _load_models():
                threading.Thread(target=_load, daemon=True).start()

    app.state.backend = backend
    app.state.mode = mode

    def require_ready():
        if not backend.ready:
            raise HTTPException(503, "models are still loading")

    @app.get("/healthz")
    def healthz():
        if not backend.ready:
            return JSONResponse({"status": "loading", "mode": mode},
                                status_code=503)
        return {"status": "ok", "mode": mode}

    @app.post("/v1/detect", response_model=DetectResponse)
    def detect(request: DetectRequest):
        require_ready()
        png_bytes, image = _decode_image(request.image)
        try:
            boxes = backend.detect(png_bytes, image, request.queries,
                                   request.threshold)
        except BackendError as exc:
            raise HTTPException(500, str(exc)) from exc
        return DetectResponse(boxes=[BoxOut(**b) for b in boxes])

    @app.post("/v1/segment", response_model=SegmentResponse)
    def segment(request: SegmentRequest):
        require_ready()
        _, image = _decode_image(request.image)
        height, width = image.shape
        boxes = []
        for box in request.boxes:
            if not (0 <= box.x1 < box.x2 <= width
                    and 0 <= box.y1 < box.y2 <= height):
                raise HTTPException(
                    400, f"box ({box.x1},{box.y1},{box.x2},{box.y2}) "
                         f"outside {width}x{height} image")
            boxes.append(box.model_dump())
        try:
            masks = backend.segment(image, boxes)
        except BackendError as exc:
            raise HTTPException(500, str(exc)) from exc
        return SegmentResponse(masks=masks, width=width, height=height)

    return app


def main() -> int:
    import uvicorn

    port = int(os.environ.get("PORT", "8750"))
    uvicorn.run(create_app(), host="0.0.0.0", port=port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
