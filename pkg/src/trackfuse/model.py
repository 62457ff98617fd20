"""Shared value types: boxes, detections, frames, tracker configuration and state."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVE = "active"
WAITING = "waiting"

PROVENANCE_DETECTED = "detected"
PROVENANCE_SUBSTITUTED_IOU = "substituted_iou"
PROVENANCE_SUBSTITUTED_NCC = "substituted_ncc"


class ConfigError(ValueError):
    """A tracker configuration violates one of its constraints."""


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel rectangle stored as (left, top, width, height).

    Coordinates are real-valued; width and height must be strictly positive.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extent must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_corners(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "BoundingBox":
        return cls(xmin, ymin, xmax - xmin, ymax - ymin)

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    def translate(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)

    def clamp(self, frame_w: float, frame_h: float) -> "BoundingBox":
        """Intersect the box with a frame of size frame_w x frame_h.

        Raises ValueError if the box lies entirely outside the frame
        (nothing positive remains). Idempotent for boxes already inside.
        """
        x0 = min(max(self.x, 0.0), float(frame_w))
        y0 = min(max(self.y, 0.0), float(frame_h))
        x1 = min(max(self.x + self.w, 0.0), float(frame_w))
        y1 = min(max(self.y + self.h, 0.0), float(frame_h))
        if x1 - x0 <= 0 or y1 - y0 <= 0:
            raise ValueError(f"box {self} lies outside a {frame_w}x{frame_h} frame")
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


@dataclass(frozen=True)
class Detection:
    """A detector output for one frame: a box plus a confidence in [0, 1]."""

    box: BoundingBox
    confidence: float

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


class FrameBuffer:
    """Single-channel 8-bit intensity image, immutable after construction.

    ``data`` may be raw bytes, any flat sequence of values in 0..255, or a
    2-D array of shape (height, width). Pixel (row, col) access goes through
    the read-only ``pixels`` array.
    """

    __slots__ = ("width", "height", "pixels")

    def __init__(self, width: int, height: int, data):
        width = int(width)
        height = int(height)
        if width <= 0 or height <= 0:
            raise ValueError(f"frame dimensions must be positive, got {width}x{height}")
        if isinstance(data, (bytes, bytearray, memoryview)):
            arr = np.frombuffer(data, dtype=np.uint8)
        else:
            arr = np.asarray(data)
            if arr.dtype != np.uint8:
                if arr.size and (arr.min() < 0 or arr.max() > 255):
                    raise ValueError("pixel values must lie in 0..255")
                arr = arr.astype(np.uint8)
        if arr.size != width * height:
            raise ValueError(
                f"data length {arr.size} does not match {width}x{height}={width * height}"
            )
        arr = arr.reshape(height, width).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "height", height)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("FrameBuffer is immutable")

    @classmethod
    def from_array(cls, arr) -> "FrameBuffer":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        return cls(arr.shape[1], arr.shape[0], arr)

    @property
    def data(self) -> bytes:
        """Row-major raw pixel bytes, length width*height."""
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, FrameBuffer):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.width, self.height, self.data))

    def __repr__(self):
        return f"FrameBuffer({self.width}x{self.height})"


@dataclass(frozen=True)
class TrackerConfig:
    """Tunable thresholds of the stabilizer.

    conf_high gates valid detections, conf_low gates provisional ones;
    iou_thresh and ncc_thresh accept substitutions; search_margin is the
    fractional per-side enlargement of the correlation search region;
    max_substitutions caps consecutive confidence substitutions.
    Association weights, the cost cutoff, the template refresh mode and the
    waiting-track retirement horizon are secondary knobs with working
    defaults.
    """

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

    def __post_init__(self):
        validate_config(self)


def validate_config(cfg: TrackerConfig) -> None:
    """Check every TrackerConfig constraint; raise ConfigError naming the first violation."""
    if not (0.0 < cfg.conf_high <= 1.0):
        raise ConfigError("conf_high in (0, 1] violated")
    if not (cfg.conf_low >= 0.0):
        raise ConfigError("conf_low >= 0 violated")
    if not (cfg.conf_low < cfg.conf_high):
        raise ConfigError("conf_low < conf_high violated")
    if not (0.0 <= cfg.iou_thresh <= 1.0):
        raise ConfigError("iou_thresh in [0, 1] violated")
    if not (-1.0 <= cfg.ncc_thresh <= 1.0):
        raise ConfigError("ncc_thresh in [-1, 1] violated")
    if not (cfg.search_margin >= 0.0):
        raise ConfigError("search_margin >= 0 violated")
    if not (isinstance(cfg.max_substitutions, int) and cfg.max_substitutions >= 0):
        raise ConfigError("max_substitutions >= 0 violated")
    for name in ("assoc_iou_weight", "assoc_distance_weight", "assoc_size_weight"):
        if not (getattr(cfg, name) >= 0.0):
            raise ConfigError(f"{name} >= 0 violated")
    if not (cfg.assoc_cost_cutoff > 0.0):
        raise ConfigError("assoc_cost_cutoff > 0 violated")
    if cfg.template_mode not in ("rolling", "frozen"):
        raise ConfigError("template_mode in {rolling, frozen} violated")
    if not (isinstance(cfg.max_waiting_frames, int) and cfg.max_waiting_frames >= 1):
        raise ConfigError("max_waiting_frames >= 1 violated")


@dataclass
class TrackEntry:
    """Per-track memory: last accepted box, its template patch, and counters.

    template is None when the box rounds to an empty pixel region; such a
    track cannot predict and can only be continued by fresh detections.
    """

    id: int
    last_box: BoundingBox
    last_confidence: float
    template: FrameBuffer | None
    substitution_count: int = 0
    status: str = ACTIVE
    waiting_frames: int = 0


@dataclass
class TrackerState:
    """Mutable per-stream state; updated only by the tracker under a single writer."""

    tracks: list[TrackEntry] = field(default_factory=list)
    next_track_id: int = 1
    last_frame_index: int = -1


@dataclass(frozen=True)
class AnnotationRecord:
    """One labeled object from a dataset file.

    Construction enforces that the box lies within the image bounds; parsers
    clamp out-of-range input before building records.
    """

    image_id: str
    image_width: int
    image_height: int
    box: BoundingBox
    difficult: bool = False

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError(
                f"image dimensions must be positive, got {self.image_width}x{self.image_height}"
            )
        b = self.box
        eps = 1e-9
        if b.x < -eps or b.y < -eps or b.x + b.w > self.image_width + eps or b.y + b.h > self.image_height + eps:
            raise ValueError(f"box {b} exceeds image bounds {self.image_width}x{self.image_height}")
