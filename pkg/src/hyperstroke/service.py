"""HTTP suggestion service: session state plus the suggest-then-accept loop.

Sessions are held in memory, one writer at a time per session; the canvas of
a session always equals its last uploaded canvas composed with every accepted
stroke, in order. Suggestions are pending until accepted, and any canvas
mutation invalidates them (stale-context safety). Model inference is a
shared resource guarded by one lock, so concurrent requests across sessions
are safe and seeded requests stay reproducible.
"""

from __future__ import annotations

import base64
import hashlib
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel, Field

from .raster import (
    BBoxTokens,
    Canvas,
    GridSpec,
    Hyperstroke,
    alpha_png_bytes,
    blend,
    canvas_from_png_bytes,
    canvas_png_bytes,
)
from .seq import (
    SuggestionRequest,
    checkpoint_sha256,
    load_seq_checkpoint,
    sample,
)
from .vq import load_vq_checkpoint


@dataclass
class ServiceConfig:
    vq_checkpoint: str | None = None
    seq_checkpoint: str | None = None
    canvas_size: int = 128
    grid_c: int = 16
    max_sessions: int = 64


class ModelBundle:
    """Loaded checkpoints plus a lock serializing inference access."""

    def __init__(self, config: ServiceConfig):
        self.lock = threading.Lock()
        self.vq = None
        self.seq = None
        self.info: dict = {"loaded": False}
        if config.vq_checkpoint and config.seq_checkpoint:
            self.vq, _ = load_vq_checkpoint(config.vq_checkpoint)
            self.seq, _ = load_seq_checkpoint(config.seq_checkpoint)
            vocab = self.seq.vocab
            if vocab.codebook_size != self.vq.codebook_size:
                raise ValueError(
                    "sequence checkpoint vocabulary does not match the tokenizer"
                )
            self.info = {
                "loaded": True,
                "k": self.vq.k,
                "C": vocab.grid_c,
                "bbox_vocab": vocab.bbox_vocab,
                "visual_vocab": vocab.codebook_size,
                "flat_vocab": vocab.size,
                "n_max": self.seq.config.n_max,
                "vq_checkpoint_sha256": checkpoint_sha256(config.vq_checkpoint),
                "seq_checkpoint_sha256": checkpoint_sha256(config.seq_checkpoint),
            }

    @property
    def loaded(self) -> bool:
        return self.vq is not None and self.seq is not None


@dataclass
class Session:
    id: str
    canvas: Canvas
    accepted: list[Hyperstroke] = field(default_factory=list)
    accepted_tokens: list[dict] = field(default_factory=list)
    pending: dict = field(default_factory=dict)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, limit: int):
        self.limit = limit
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, canvas: Canvas) -> Session:
        with self._lock:
            if len(self._sessions) >= self.limit:
                raise HTTPException(503, "session capacity reached")
            session = Session(id=uuid.uuid4().hex, canvas=canvas)
            self._sessions[session.id] = session
            return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id}")
        return session


class StrokeTokensIn(BaseModel):
    bbox: list[int] = Field(min_length=4, max_length=4)
    visual: list[int]


class SuggestIn(BaseModel):
    condition: str | None = None
    prompt_strokes: list[StrokeTokensIn] | None = None
    prompt_bbox: list[int] | None = Field(default=None, min_length=4, max_length=4)
    n: int = Field(default=1, ge=1)
    temperature: float = 1.0
    top_k: int = 100
    seed: int = 0


class AcceptIn(BaseModel):
    suggestion_id: str


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="hyperstroke suggestion service")
    models = ModelBundle(config)
    store = SessionStore(config.max_sessions)
    app.state.config = config
    app.state.models = models
    app.state.store = store

    def blank_canvas() -> Canvas:
        return Canvas.blank(config.canvas_size, config.canvas_size)

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.get("/v1/model/info")
    def model_info():
        return {"canvas_size": config.canvas_size, **models.info}

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        session = store.create(blank_canvas())
        return {"session_id": session.id}

    @app.get("/v1/sessions/{session_id}/canvas")
    def get_canvas(session_id: str):
        session = store.get(session_id)
        with session.lock:
            data = canvas_png_bytes(session.canvas)
        return Response(content=data, media_type="image/png")

    @app.put("/v1/sessions/{session_id}/canvas", status_code=204)
    async def put_canvas(session_id: str, request: Request):
        session = store.get(session_id)
        body = await request.body()
        try:
            canvas = canvas_from_png_bytes(body)
        except Exception:
            raise HTTPException(422, "body is not a decodable PNG")
        if canvas.width != config.canvas_size or canvas.height != config.canvas_size:
            raise HTTPException(
                422,
                f"canvas must be {config.canvas_size}x{config.canvas_size}, "
                f"got {canvas.width}x{canvas.height}",
            )
        with session.lock:
            session.canvas = canvas
            session.accepted.clear()
            session.accepted_tokens.clear()
            session.pending.clear()
            session.updated_at = time.time()
        return Response(status_code=204)

    @app.post("/v1/sessions/{session_id}/suggest")
    def suggest(session_id: str, body: SuggestIn):
        session = store.get(session_id)
        if not models.loaded:
            raise HTTPException(409, "model checkpoints not loaded")
        vocab = models.seq.vocab
        try:
            prompt_bbox = (
                BBoxTokens(*body.prompt_bbox, grid_c=vocab.grid_c)
                if body.prompt_bbox
                else None
            )
            prompt_strokes = None
            if body.prompt_strokes:
                prompt_strokes = tuple(
                    (
                        BBoxTokens(*s.bbox, grid_c=vocab.grid_c),
                        np.asarray(s.visual, dtype=np.int64),
                    )
                    for s in body.prompt_strokes
                )
                for _, codes in prompt_strokes:
                    if codes.shape != (models.vq.k,):
                        raise ValueError(f"each prompt stroke needs {models.vq.k} visual tokens")
                    if codes.min() < 0 or codes.max() >= vocab.codebook_size:
                        raise ValueError("prompt visual token outside codebook")
            with session.lock:
                canvas = session.canvas
            request = SuggestionRequest(
                canvas=canvas,
                condition=body.condition,
                prompt_strokes=prompt_strokes,
                prompt_bbox=prompt_bbox,
                n=body.n,
                temperature=body.temperature,
                top_k=body.top_k,
                seed=body.seed,
            )
        except (ValueError, TypeError) as exc:
            raise HTTPException(422, str(exc))

        grid = GridSpec(config.canvas_size, config.canvas_size, vocab.grid_c)
        try:
            with models.lock:
                strokes = sample(models.seq, models.vq, request, grid=grid)
        except ValueError as exc:
            raise HTTPException(422, str(exc))

        canvas_digest = hashlib.sha1(canvas.pixels.tobytes()).hexdigest()[:8]
        suggestions = []
        preview = canvas
        with session.lock:
            session.pending.clear()
            for i, stroke in enumerate(strokes):
                preview = blend(preview, stroke.stroke)
                sid = hashlib.sha1(
                    f"{canvas_digest}:{body.seed}:{i}:".encode()
                    + stroke.visual_codes.tobytes()
                    + bytes(stroke.box_tokens.as_tuple())
                ).hexdigest()[:16]
                session.pending[sid] = (stroke, preview)
                suggestions.append(
                    {
                        "suggestion_id": sid,
                        "bbox_tokens": list(stroke.box_tokens.as_tuple()),
                        "visual_tokens": [int(c) for c in stroke.visual_codes],
                        "bbox_pixels": list(stroke.stroke.box.as_tuple()),
                        "stroke_png": _b64(alpha_png_bytes(stroke.stroke.image)),
                        "preview_png": _b64(canvas_png_bytes(preview)),
                    }
                )
            session.updated_at = time.time()
        return {"suggestions": suggestions}

    @app.post("/v1/sessions/{session_id}/accept")
    def accept(session_id: str, body: AcceptIn):
        session = store.get(session_id)
        with session.lock:
            entry = session.pending.get(body.suggestion_id)
            if entry is None:
                raise HTTPException(404, f"no pending suggestion {body.suggestion_id}")
            stroke, _ = entry
            session.canvas = blend(session.canvas, stroke.stroke)
            session.accepted.append(stroke.stroke)
            session.accepted_tokens.append(
                {
                    "bbox_tokens": list(stroke.box_tokens.as_tuple()),
                    "visual_tokens": [int(c) for c in stroke.visual_codes],
                }
            )
            session.pending.clear()
            session.updated_at = time.time()
            data = canvas_png_bytes(session.canvas)
        return {"canvas_png": _b64(data)}

    return app


def run_service(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="info")
