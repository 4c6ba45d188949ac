"""HTTP inference service: translation, content extraction, and schema
discovery over JSON with base64-encoded PNG payloads.

Endpoints: GET /v1/schema, POST /v1/translate, POST /v1/content,
GET /v1/healthz. Error bodies are machine readable:
``{"error": code, "detail": text}`` with codes label_zero, alpha_range,
bad_base64, bad_png, schema_violation, gate_disabled, too_large, no_model,
busy.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading
import time

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from .errors import GateDisabled, SchemaViolation
from .inference import (ModelBundle, content_image, resolve_assignment,
                        translate_image)


class TranslateRequest(BaseModel):
    image: str
    set: dict[str, int] = {}
    alpha: dict[str, float] = {}
    source: dict[str, int] | None = None


class ContentRequest(BaseModel):
    image: str


def _error(status: int, code: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def _decode_png(payload: str) -> Image.Image:
    try:
        raw = base64.b64decode(payload, validate=True)
    except (binascii.Error, ValueError) as e:
        raise ValueError(f"bad_base64:{e}") from e
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
        return img
    except (UnidentifiedImageError, OSError) as e:
        raise ValueError(f"bad_png:{e}") from e


def _encode_png(img: Image.Image) -> str:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(bundle: ModelBundle | None, max_body_bytes: int = 4 * 1024 * 1024,
               workers: int = 2, queue_timeout: float = 30.0) -> FastAPI:
    """Build the service around one immutable model snapshot. A bounded
    semaphore caps concurrent forward passes; waiters beyond the timeout get
    a 503."""
    app = FastAPI(title="switchgan inference", docs_url=None, redoc_url=None)
    gate = threading.Semaphore(max(1, workers))

    @app.middleware("http")
    async def _limit_body(request: Request, call_next):
        length = request.headers.get("content-length")
        if length is not None and int(length) > max_body_bytes:
            return _error(413, "too_large",
                          f"request body exceeds {max_body_bytes} bytes")
        return await call_next(request)

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok", "model_loaded": bundle is not None}

    @app.get("/v1/schema")
    def schema():
        if bundle is None:
            return _error(503, "no_model", "no checkpoint is loaded")
        return {
            **bundle.schema.to_json_dict(),
            "gate_enabled": bundle.gate_enabled,
            "image_size": bundle.native_size,
            "native_size": bundle.native_size,
            "checkpoint_digest": bundle.checkpoint_digest,
        }

    def _with_worker(fn):
        if not gate.acquire(timeout=queue_timeout):
            return _error(503, "busy", "all inference workers are busy")
        try:
            return fn()
        finally:
            gate.release()

    @app.post("/v1/translate")
    def translate(req: TranslateRequest):
        if bundle is None:
            return _error(503, "no_model", "no checkpoint is loaded")
        try:
            img = _decode_png(req.image)
        except ValueError as e:
            code, _, detail = str(e).partition(":")
            return _error(400, code, detail)
        try:
            label, alpha = resolve_assignment(bundle.schema, req.set, req.alpha,
                                              req.source)
        except SchemaViolation as e:
            return _error(400, e.code or "schema_violation", str(e))

        def run():
            start = time.perf_counter()
            out = translate_image(bundle, img, label, alpha)
            return {
                "image": _encode_png(out),
                "resolved_label": list(label.bits),
                "resolved_alpha": list(alpha.alphas),
                "latency_ms": (time.perf_counter() - start) * 1000.0,
                "native_size": bundle.native_size,
            }

        return _with_worker(run)

    @app.post("/v1/content")
    def content(req: ContentRequest):
        if bundle is None:
            return _error(503, "no_model", "no checkpoint is loaded")
        try:
            img = _decode_png(req.image)
        except ValueError as e:
            code, _, detail = str(e).partition(":")
            return _error(400, code, detail)

        def run():
            start = time.perf_counter()
            try:
                out = content_image(bundle, img)
            except GateDisabled as e:
                return _error(409, "gate_disabled", str(e))
            return {
                "image": _encode_png(out),
                "latency_ms": (time.perf_counter() - start) * 1000.0,
                "native_size": bundle.native_size,
            }

        return _with_worker(run)

    return app
