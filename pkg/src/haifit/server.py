"""HTTP inference service: POST a sketch PNG, get the generated image PNG back."""

from __future__ import annotations

import io
import threading
import time

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from PIL import Image

from .core import denormalize_image, normalize_image
from .trainer import generate_images, load_generator

DEFAULT_MAX_BYTES = 8 * 1024 * 1024


def letterbox(img: Image.Image, resolution: int) -> Image.Image:
    """Fit the image on a white square canvas without stretching."""
    img = img.convert("RGB")
    if img.size == (resolution, resolution):
        return img
    scale = resolution / max(img.size)
    new_size = (max(1, round(img.width * scale)), max(1, round(img.height * scale)))
    resized = img.resize(new_size, Image.BOX)
    canvas = Image.new("RGB", (resolution, resolution), (255, 255, 255))
    canvas.paste(resized, ((resolution - new_size[0]) // 2, (resolution - new_size[1]) // 2))
    return canvas


def encode_png(arr: np.ndarray) -> bytes:
    """Deterministic PNG encoding (fixed settings, no metadata)."""
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def run_inference(generator, png_bytes: bytes, finest: int) -> bytes:
    """Decode sketch PNG, letterbox, run the frozen model, encode the result."""
    sketch = Image.open(io.BytesIO(png_bytes))
    sketch.load()
    fm = normalize_image(np.array(letterbox(sketch, finest)))
    out = generate_images(generator, fm)
    return encode_png(denormalize_image(out))


def create_app(checkpoint_path: str, max_bytes: int = DEFAULT_MAX_BYTES) -> FastAPI:
    app = FastAPI(title="haifit inference service")
    state = {"generator": None, "ckpt": None, "fingerprint": "", "started": time.monotonic()}
    lock = threading.Lock()  # inference is serialized per process

    generator, ckpt = load_generator(checkpoint_path)
    state["generator"] = generator
    state["ckpt"] = ckpt
    state["fingerprint"] = ckpt.fingerprint()

    @app.get("/api/health")
    def health():
        ready = state["generator"] is not None
        return {
            "status": "ready" if ready else "loading",
            "fingerprint": state["fingerprint"],
            "schedule": list(ckpt.config.schedule.levels),
            "finest_resolution": ckpt.config.schedule.finest,
            "uptime_seconds": time.monotonic() - state["started"],
        }

    @app.post("/api/generate")
    async def generate(request: Request):
        body = await request.body()
        if len(body) > max_bytes:
            return JSONResponse({"code": "too_large"}, status_code=413)
        if state["generator"] is None:
            return JSONResponse({"code": "no_model"}, status_code=503)
        t0 = time.perf_counter()
        try:
            with lock:
                png = run_inference(state["generator"], body, ckpt.config.schedule.finest)
        except Exception:
            return JSONResponse({"code": "bad_image"}, status_code=400)
        ms = (time.perf_counter() - t0) * 1000.0
        return Response(content=png, media_type="image/png", headers={
            "X-Model-Fingerprint": state["fingerprint"],
            "X-Inference-Ms": f"{ms:.1f}",
        })

    return app
