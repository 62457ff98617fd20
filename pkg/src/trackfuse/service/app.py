"""Session-based tracking service.

Each session owns one detection stream: a TrackerConfig fixed at creation,
a TrackerState, and a lock that serializes frame submissions (the state has
a single-writer contract; distinct sessions run in parallel freely).
"""

from __future__ import annotations

import base64
import binascii
import threading
import uuid

from fastapi import FastAPI, HTTPException

from ..model import (
    ACTIVE,
    BoundingBox,
    ConfigError,
    Detection,
    FrameBuffer,
    TrackerConfig,
    TrackerState,
)
from ..tracker import FrameInput, step
from .schemas import (
    BoxOut,
    CreateSessionRequest,
    CreateSessionResponse,
    FrameRequest,
    SessionStatus,
    StepResponse,
    TrackOutputModel,
)


class _Session:
    def __init__(self, config: TrackerConfig):
        self.config = config
        self.state = TrackerState()
        self.lock = threading.Lock()


def _decode_frame(req: FrameRequest) -> FrameBuffer:
    try:
        raw = base64.b64decode(req.pixels, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=400, detail="pixels is not valid base64") from None
    if len(raw) != req.width * req.height:
        raise HTTPException(
            status_code=400,
            detail=f"pixel payload is {len(raw)} bytes, expected "
            f"{req.width * req.height} for {req.width}x{req.height}",
        )
    return FrameBuffer(req.width, req.height, raw)


def create_app() -> FastAPI:
    app = FastAPI(title="trackfuse", description="detection stabilization service")
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    def _session(session_id: str) -> _Session:
        with registry_lock:
            s = sessions.get(session_id)
        if s is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return s

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/sessions", response_model=CreateSessionResponse, status_code=201)
    def create_session(req: CreateSessionRequest) -> CreateSessionResponse:
        try:
            config = TrackerConfig(**req.config.model_dump())
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        session_id = uuid.uuid4().hex
        with registry_lock:
            sessions[session_id] = _Session(config)
        return CreateSessionResponse(session_id=session_id)

    @app.post("/sessions/{session_id}/frames", response_model=StepResponse)
    def push_frame(session_id: str, req: FrameRequest) -> StepResponse:
        s = _session(session_id)
        frame = _decode_frame(req)
        try:
            detections = tuple(
                Detection(box=BoundingBox(d.x, d.y, d.w, d.h), confidence=d.conf)
                for d in req.detections
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        frame_input = FrameInput(
            frame_index=req.frame_index, frame=frame, detections=detections
        )
        with s.lock:
            try:
                _, outputs = step(s.state, frame_input, s.config)
            except ValueError as exc:
                # frame_index ordering violations and similar stream misuse
                raise HTTPException(status_code=409, detail=str(exc)) from None
        return StepResponse(
            outputs=[
                TrackOutputModel(
                    frame_index=o.frame_index,
                    track_id=o.track_id,
                    box=BoxOut(x=o.box.x, y=o.box.y, w=o.box.w, h=o.box.h),
                    confidence=o.confidence,
                    provenance=o.provenance,
                )
                for o in outputs
            ]
        )

    @app.get("/sessions/{session_id}", response_model=SessionStatus)
    def session_status(session_id: str) -> SessionStatus:
        s = _session(session_id)
        with s.lock:
            active = sum(1 for t in s.state.tracks if t.status == ACTIVE)
            total = len(s.state.tracks)
            last = s.state.last_frame_index
        return SessionStatus(
            session_id=session_id,
            last_frame_index=last,
            active_tracks=active,
            waiting_tracks=total - active,
        )

    @app.delete("/sessions/{session_id}", status_code=204)
    def close_session(session_id: str) -> None:
        with registry_lock:
            if sessions.pop(session_id, None) is None:
                raise HTTPException(status_code=404, detail=f"no session {session_id}")

    return app


app = create_app()
