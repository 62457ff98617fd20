"""Request/response bodies for the tracking service.

Detection entries use the same flat {x, y, w, h, conf} shape as the
detections JSONL format, so detector output can be forwarded verbatim.
Frame pixels travel as base64-encoded row-major 8-bit intensities.
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class TrackerConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    conf_high: float = 0.6
    conf_low: float = 0.25
    iou_thresh: float = 0.3
    ncc_thresh: float = 0.5
    search_margin: float = 0.5
    max_substitutions: int = 10
    assoc_iou_weight: float = 1.0
    assoc_distance_weight: float = 1.0
    assoc_size_weight: float = 0.5
    assoc_cost_cutoff: float = 1.5
    template_mode: str = "rolling"
    max_waiting_frames: int = 100


class CreateSessionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: TrackerConfigModel = Field(default_factory=TrackerConfigModel)


class CreateSessionResponse(BaseModel):
    session_id: str


class DetectionIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    x: float
    y: float
    w: float
    h: float
    conf: float


class FrameRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    frame_index: int = Field(ge=0)
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    pixels: str = Field(description="base64 of width*height row-major 8-bit intensities")
    detections: list[DetectionIn] = Field(default_factory=list)


class BoxOut(BaseModel):
    x: float
    y: float
    w: float
    h: float


class TrackOutputModel(BaseModel):
    frame_index: int
    track_id: int
    box: BoxOut
    confidence: float
    provenance: str


class StepResponse(BaseModel):
    outputs: list[TrackOutputModel]


class SessionStatus(BaseModel):
    session_id: str
    last_frame_index: int
    active_tracks: int
    waiting_tracks: int
