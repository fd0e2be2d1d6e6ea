"""HTTP render service.

Sessions own a fitted renderer (the reusable scene representation); renders
against a session never rebuild it, so the second render of a session is
much cheaper than the first.  Sessions live in memory under LRU eviction;
requests for evicted sessions get 410, unknown ids 404, and every
malformed request a 4xx with a JSON error body.

API (all numbers decimal JSON):
    POST /session   multipart image+disparity (optional gamma, planes,
                    occlusion knobs)            -> {id, width, height}
    POST /render    {id, A, d_f? | focus:{x,y}, gamma?} -> image/png
    GET  /disparity ?id&x&y                     -> {d}
    GET  /health                                -> {ok}
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import OrderedDict

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .core import (
    disparity_from_png_bytes,
    image_from_png_bytes,
    image_to_png_bytes,
)
from .estimator import MpiBokehRenderer

DEFAULT_SESSION_CAP = 8
DEFAULT_MAX_BYTES = 32 * 1024 * 1024


class _Session:
    def __init__(self, renderer: MpiBokehRenderer):
        self.id = uuid.uuid4().hex
        self.renderer = renderer
        self.created_at = time.time()


class _SessionStore:
    """LRU session map; eviction is by last render access."""

    def __init__(self, cap: int):
        self.cap = cap
        self._lock = threading.Lock()
        self._sessions: OrderedDict[str, _Session] = OrderedDict()
        self._evicted: set[str] = set()

    def insert(self, session: _Session):
        with self._lock:
            self._sessions[session.id] = session
            while len(self._sessions) > self.cap:
                old_id, _ = self._sessions.popitem(last=False)
                self._evicted.add(old_id)

    def get(self, session_id: str) -> _Session:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is not None:
                self._sessions.move_to_end(session_id)
                return session
            if session_id in self._evicted:
                raise _HttpError(410, f"session {session_id} was evicted")
            raise _HttpError(404, f"unknown session {session_id}")


class _HttpError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class _FocusPoint(BaseModel):
    x: float
    y: float


class _RenderRequest(BaseModel):
    id: str
    A: float | None = None
    d_f: float | None = None
    focus: _FocusPoint | None = None
    gamma: float | None = None


def create_app(
    session_cap: int = DEFAULT_SESSION_CAP,
    max_bytes: int = DEFAULT_MAX_BYTES,
    ui_dir=None,
) -> FastAPI:
    app = FastAPI(title="refocus render service")
    store = _SessionStore(session_cap)

    @app.exception_handler(_HttpError)
    async def _http_error(_req: Request, exc: _HttpError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors())})

    @app.get("/health")
    def health():
        return {"ok": True}

    @app.post("/session")
    async def create_session(
        image: UploadFile = File(...),
        disparity: UploadFile = File(...),
        gamma: float = Form(2.2),
        planes: int = Form(32),
        grad_threshold: float = Form(0.05),
        min_segment: int = Form(20),
        extend_iters: int | None = Form(None),
        dilate_px: int = Form(5),
        backgrounds: int = Form(1),
        inpaint_iters: int = Form(1000),
    ):
        image_bytes = await image.read()
        disparity_bytes = await disparity.read()
        if len(image_bytes) + len(disparity_bytes) > max_bytes:
            raise _HttpError(413, f"payload exceeds {max_bytes} bytes")
        try:
            img = image_from_png_bytes(image_bytes)
            disp = disparity_from_png_bytes(disparity_bytes)
            renderer = MpiBokehRenderer(
                n_planes=planes,
                gamma=gamma,
                grad_threshold=grad_threshold,
                min_segment=min_segment,
                extend_iters=extend_iters,
                dilate_px=dilate_px,
                n_backgrounds=backgrounds,
                inpaint_iters=inpaint_iters,
            )
            renderer.fit(img, disp)
            # build the default-gamma stack now so renders only composite
            renderer.stack_for_gamma(renderer.gamma)
        except (ValueError, TypeError) as exc:
            raise _HttpError(400, str(exc))
        session = _Session(renderer)
        store.insert(session)
        return {"id": session.id, "width": img.width, "height": img.height}

    @app.post("/render")
    def render(body: _RenderRequest):
        session = store.get(body.id)
        if body.A is None:
            raise _HttpError(400, "missing blur parameter A")
        if (body.d_f is None) == (body.focus is None):
            raise _HttpError(400, "give exactly one of d_f or focus")
        try:
            out = session.renderer.render(
                body.A,
                refocus_disparity=body.d_f,
                focus_xy=(body.focus.x, body.focus.y) if body.focus else None,
                gamma=body.gamma,
            )
        except (ValueError, TypeError) as exc:
            raise _HttpError(400, str(exc))
        return Response(content=image_to_png_bytes(out), media_type="image/png")

    @app.get("/disparity")
    def disparity_lookup(id: str, x: float, y: float):
        session = store.get(id)
        return {"d": session.renderer.disparity_.sample_bilinear(x, y)}

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(host: str = "127.0.0.1", port: int = 8000, **app_kwargs):
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(**app_kwargs), host=host, port=port)
