"""HTTP JSON API over the pipeline (all routes under /v1).

The engine is an immutable snapshot; reload builds a replacement off to
the side and swaps the reference atomically, so requests never observe a
half-loaded engine. Refusals are domain outcomes and travel as HTTP 200.
"""

from __future__ import annotations

import base64
import hashlib
import json
import threading

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from . import __version__
from .bench.manifest import Manifest, validate_manifest
from .cloudstore import load_store
from .engine import Engine, EngineConfig, build_engine
from .errors import BackendUnavailable

INLINE_SCORES_LIMIT = 10_000


def stats_json_bytes(manifest: Manifest) -> bytes:
    """Single serialization shared by the CLI and the stats endpoint."""
    stats, errors = validate_manifest(manifest)
    if errors:
        raise ValueError("manifest invalid: " + "; ".join(errors[:5]))
    return json.dumps(stats, indent=1, sort_keys=True).encode()


def _default_image_loader(manifest: Manifest):
    paths = {img.image_id: img.path for img in manifest.images}

    def load(image_id: str) -> bytes:
        with open(paths[image_id], "rb") as f:
            return f.read()

    return load


def build_engine_from_paths(
    manifest_path, store_path, config: EngineConfig
) -> Engine:
    manifest = Manifest.load(manifest_path)
    store = load_store(store_path)
    return build_engine(
        manifest, store, config, image_loader=_default_image_loader(manifest)
    )


class AppState:
    def __init__(self):
        self.engine: Engine | None = None
        self.paths: dict = {}
        self.reload_lock = threading.Lock()
        self.score_stash: dict[str, list] = {}


def create_app(
    engine: Engine | None = None,
    manifest_path=None,
    store_path=None,
    config: EngineConfig | None = None,
    cors_origins: list[str] | None = None,
) -> FastAPI:
    app = FastAPI(title="afford3d", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=cors_origins or ["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    state = AppState()
    state.paths = {"manifest": manifest_path, "store": store_path}
    state.config = config or EngineConfig()
    if engine is not None:
        state.engine = engine
    elif manifest_path and store_path:
        state.engine = build_engine_from_paths(manifest_path, store_path, state.config)
    app.state.afford3d = state

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok" if state.engine is not None else "empty",
            "versions": {"afford3d": __version__, "api": "v1"},
        }

    @app.post("/v1/query")
    async def query(request: Request):
        eng = state.engine
        if eng is None:
            return JSONResponse({"error": "engine not loaded"}, status_code=503)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "invalid JSON body"}, status_code=400)
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            return JSONResponse({"error": "missing 'text' field"}, status_code=400)
        image_id = body.get("image_id")
        image_b64 = body.get("image_b64")
        if image_id is None and image_b64 is None:
            return JSONResponse(
                {"error": "one of 'image_id' or 'image_b64' is required"},
                status_code=400,
            )
        image_bytes = None
        if image_b64 is not None:
            try:
                image_bytes = base64.b64decode(image_b64, validate=True)
            except Exception:
                return JSONResponse({"error": "invalid image_b64"}, status_code=400)
        if image_id is not None and image_id not in eng.annotations:
            return JSONResponse(
                {"error": f"unknown image_id {image_id!r}"}, status_code=404
            )
        try:
            result = eng.run_query(text, image_id=image_id, image_bytes=image_bytes)
        except BackendUnavailable as e:
            return JSONResponse({"error": str(e)}, status_code=503)
        doc = result.to_json()
        scores = doc.get("scores")
        if scores is not None and len(scores) > INLINE_SCORES_LIMIT:
            token = hashlib.sha256(
                json.dumps(scores).encode()
            ).hexdigest()[:24]
            state.score_stash[token] = scores
            del doc["scores"]
            doc["scores_token"] = token
        return doc

    @app.get("/v1/scores/{token}")
    def scores(token: str):
        data = state.score_stash.get(token)
        if data is None:
            return JSONResponse({"error": "unknown scores token"}, status_code=404)
        return {"scores": data}

    @app.get("/v1/images")
    def images():
        eng = state.engine
        if eng is None:
            return JSONResponse({"error": "engine not loaded"}, status_code=503)
        return {
            "images": [
                {
                    "image_id": img.image_id,
                    "scene_id": img.scene_id,
                    "labels": [a.label for a in img.annotations],
                }
                for img in eng.manifest.images
            ]
        }

    @app.get("/v1/images/{image_id}")
    def image_bytes_route(image_id: str):
        eng = state.engine
        if eng is None:
            return JSONResponse({"error": "engine not loaded"}, status_code=503)
        if eng.image_loader is None or image_id not in eng.annotations:
            return JSONResponse(
                {"error": f"unknown image {image_id!r}"}, status_code=404
            )
        try:
            payload = eng.image_loader(image_id)
        except OSError:
            return JSONResponse(
                {"error": f"image file for {image_id!r} unavailable"}, status_code=404
            )
        return Response(content=payload, media_type="image/png")

    @app.get("/v1/clouds/{cloud_id}")
    def cloud(cloud_id: str):
        eng = state.engine
        if eng is None:
            return JSONResponse({"error": "engine not loaded"}, status_code=503)
        rec = eng.store.records.get(cloud_id)
        if rec is None:
            return JSONResponse(
                {"error": f"unknown cloud {cloud_id!r}"}, status_code=404
            )
        return {
            "id": cloud_id,
            "label": rec.label,
            "points": rec.cloud.points.tolist(),
            "gt_map_names": [m.affordance for m in rec.gt_maps],
        }

    @app.get("/v1/manifest/stats")
    def manifest_stats():
        eng = state.engine
        if eng is None:
            return JSONResponse({"error": "engine not loaded"}, status_code=503)
        try:
            payload = stats_json_bytes(eng.manifest)
        except ValueError as e:
            return JSONResponse({"error": str(e)}, status_code=500)
        return Response(content=payload, media_type="application/json")

    @app.post("/v1/admin/reload")
    async def reload(request: Request):
        if not state.reload_lock.acquire(blocking=False):
            return JSONResponse({"error": "reload already in progress"}, status_code=409)
        try:
            try:
                body = await request.json()
            except Exception:
                body = {}
            manifest_path = body.get("manifest") or state.paths.get("manifest")
            store_path = body.get("store") or state.paths.get("store")
            if not manifest_path or not store_path:
                return JSONResponse(
                    {"status": "failed", "error": "no manifest/store paths configured"},
                    status_code=400,
                )
            try:
                new_engine = build_engine_from_paths(
                    manifest_path, store_path, state.config
                )
            except Exception as e:
                # old engine keeps serving
                return {"status": "failed", "error": str(e)}
            state.engine = new_engine  # atomic reference swap
            state.paths = {"manifest": manifest_path, "store": store_path}
            return {"status": "reloaded"}
        finally:
            state.reload_lock.release()

    return app
