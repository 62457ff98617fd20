"""Deterministic synthetic scenarios: rendering, detector emulation, scoring.

A scenario scripts a single textured rectangle moving over a noisy
background, plus a detector model that jitters the true box and follows a
confidence script (normal frames, dip frames with a fixed lowered
confidence, dropout frames with no detection). Everything derives from one
seed through fixed-algorithm generators, so identical scenarios produce
bit-identical frames and detections on any platform.

Scoring compares tracker output against the scripted truth per frame, using
IOU >= 0.5 as the detection criterion, and reports how many frames the
tracker recovered beyond plain high-confidence thresholding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .formats import FormatError
from .geometry import iou, round_px
from .model import BoundingBox, Detection, FrameBuffer
from .rng import Xorshift64Star, derive_seed, gaussian_field
from .tracker import FrameInput, TrackOutput

_BORDER_DROP = 60  # object border is this much darker than the fill

_NOISE_TAG = 0  # seed-derivation tags: per-frame pixel noise
_DETECTOR_TAG = 1  # detector jitter/confidence stream


@dataclass(frozen=True)
class Background:
    noise_sigma: float = 0.0
    base_level: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not (0 <= int(self.base_level) <= 255):
            raise ValueError(f"base_level must be in 0..255, got {self.base_level}")
        object.__setattr__(self, "base_level", int(self.base_level))


@dataclass(frozen=True)
class MovingObject:
    """The rendered rectangle: fill intensity with a one-pixel darker border."""

    size: tuple[int, int]
    intensity: int
    start: tuple[float, float]
    velocity: tuple[float, float]

    def __post_init__(self):
        w, h = (int(v) for v in self.size)
        if w < 1 or h < 1:
            raise ValueError(f"object size must be >= 1, got {self.size}")
        if not (0 <= int(self.intensity) <= 255):
            raise ValueError(f"intensity must be in 0..255, got {self.intensity}")
        object.__setattr__(self, "size", (w, h))
        object.__setattr__(self, "intensity", int(self.intensity))
        object.__setattr__(self, "start", (float(self.start[0]), float(self.start[1])))
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))


@dataclass(frozen=True)
class DetectorModel:
    jitter_sigma: float
    base_conf: float
    dip_frames: frozenset[int]
    dip_conf: float
    dropout_frames: frozenset[int]

    def __post_init__(self):
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")
        for name in ("base_conf", "dip_conf"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        dip = frozenset(int(f) for f in self.dip_frames)
        drop = frozenset(int(f) for f in self.dropout_frames)
        if any(f < 0 for f in dip | drop):
            raise ValueError("frame indices must be >= 0")
        both = dip & drop
        if both:
            raise ValueError(f"dip_frames and dropout_frames overlap: {sorted(both)}")
        object.__setattr__(self, "dip_frames", dip)
        object.__setattr__(self, "dropout_frames", drop)


@dataclass(frozen=True)
class Scenario:
    seed: int
    frame_size: tuple[int, int]
    frame_count: int
    background: Background
    target: MovingObject
    detector: DetectorModel

    def __post_init__(self):
        w, h = (int(v) for v in self.frame_size)
        if w < 1 or h < 1:
            raise ValueError(f"frame_size must be positive, got {self.frame_size}")
        if self.frame_count < 1:
            raise ValueError(f"frame_count must be >= 1, got {self.frame_count}")
        ow, oh = self.target.size
        if ow > w or oh > h:
            raise ValueError(f"object {ow}x{oh} larger than frame {w}x{h}")
        for name in ("dip_frames", "dropout_frames"):
            bad = [f for f in getattr(self.detector, name) if f >= self.frame_count]
            if bad:
                raise ValueError(f"{name} beyond frame_count {self.frame_count}: {sorted(bad)}")
        object.__setattr__(self, "frame_size", (w, h))


# ---------------------------------------------------------------------------
# JSON form. Key sets are exact: unknown keys are rejected at every level.

def _as_dict(value, name: str, source: str) -> dict:
    if not isinstance(value, dict):
        raise FormatError(f"{name} must be a JSON object", source)
    return value


def _exact_keys(d: dict, allowed: tuple[str, ...], name: str, source: str) -> None:
    missing = [k for k in allowed if k not in d]
    extra = sorted(set(d) - set(allowed))
    if missing:
        raise FormatError(f"{name}: missing key(s) {missing}", source)
    if extra:
        raise FormatError(f"{name}: unknown key(s) {extra}", source)


def _as_int(v, name: str, source: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise FormatError(f"{name} must be an integer, got {v!r}", source)
    return v


def _as_real(v, name: str, source: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"{name} must be a number, got {v!r}", source)
    return float(v)


def _as_pair(v, name: str, source: str, integer: bool) -> tuple:
    if not isinstance(v, list) or len(v) != 2:
        raise FormatError(f"{name} must be a 2-element array, got {v!r}", source)
    if integer:
        return (_as_int(v[0], name, source), _as_int(v[1], name, source))
    return (_as_real(v[0], name, source), _as_real(v[1], name, source))


def _as_frame_list(v, name: str, source: str) -> frozenset[int]:
    if not isinstance(v, list):
        raise FormatError(f"{name} must be an array of frame indices", source)
    return frozenset(_as_int(f, name, source) for f in v)


def scenario_from_json(text: str, source: str = "<scenario>") -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", source, exc.lineno) from None
    top = _as_dict(raw, "scenario", source)
    _exact_keys(
        top,
        ("seed", "frame_size", "frame_count", "background", "object", "detector"),
        "scenario",
        source,
    )
    bg = _as_dict(top["background"], "background", source)
    _exact_keys(bg, ("noise_sigma", "base_level"), "background", source)
    obj = _as_dict(top["object"], "object", source)
    _exact_keys(obj, ("size", "intensity", "start", "velocity"), "object", source)
    det = _as_dict(top["detector"], "detector", source)
    _exact_keys(
        det,
        ("jitter_sigma", "base_conf", "dip_frames", "dip_conf", "dropout_frames"),
        "detector",
        source,
    )
    try:
        return Scenario(
            seed=_as_int(top["seed"], "seed", source),
            frame_size=_as_pair(top["frame_size"], "frame_size", source, integer=True),
            frame_count=_as_int(top["frame_count"], "frame_count", source),
            background=Background(
                noise_sigma=_as_real(bg["noise_sigma"], "noise_sigma", source),
                base_level=_as_int(bg["base_level"], "base_level", source),
            ),
            target=MovingObject(
                size=_as_pair(obj["size"], "object.size", source, integer=True),
                intensity=_as_int(obj["intensity"], "object.intensity", source),
                start=_as_pair(obj["start"], "object.start", source, integer=False),
                velocity=_as_pair(obj["velocity"], "object.velocity", source, integer=False),
            ),
            detector=DetectorModel(
                jitter_sigma=_as_real(det["jitter_sigma"], "jitter_sigma", source),
                base_conf=_as_real(det["base_conf"], "base_conf", source),
                dip_frames=_as_frame_list(det["dip_frames"], "dip_frames", source),
                dip_conf=_as_real(det["dip_conf"], "dip_conf", source),
                dropout_frames=_as_frame_list(det["dropout_frames"], "dropout_frames", source),
            ),
        )
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(str(exc), source) from None


def scenario_to_json(sc: Scenario) -> str:
    doc = {
        "seed": sc.seed,
        "frame_size": list(sc.frame_size),
        "frame_count": sc.frame_count,
        "background": {
            "noise_sigma": sc.background.noise_sigma,
            "base_level": sc.background.base_level,
        },
        "object": {
            "size": list(sc.target.size),
            "intensity": sc.target.intensity,
            "start": list(sc.target.start),
            "velocity": list(sc.target.velocity),
        },
        "detector": {
            "jitter_sigma": sc.detector.jitter_sigma,
            "base_conf": sc.detector.base_conf,
            "dip_frames": sorted(sc.detector.dip_frames),
            "dip_conf": sc.detector.dip_conf,
            "dropout_frames": sorted(sc.detector.dropout_frames),
        },
    }
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Rendering and detector emulation

def true_box(sc: Scenario, frame_index: int) -> BoundingBox:
    """Scripted object box at a frame: start + t*velocity, kept inside the frame.

    The float position is clamped so the box never exits, then snapped to
    integer pixels; the rendered rectangle sits exactly on this box.
    """
    w, h = sc.frame_size
    ow, oh = sc.target.size
    x = sc.target.start[0] + frame_index * sc.target.velocity[0]
    y = sc.target.start[1] + frame_index * sc.target.velocity[1]
    x = min(max(x, 0.0), float(w - ow))
    y = min(max(y, 0.0), float(h - oh))
    return BoundingBox(float(round_px(x)), float(round_px(y)), float(ow), float(oh))


def render_frame(sc: Scenario, frame_index: int) -> tuple[FrameBuffer, BoundingBox]:
    """Render one frame independently of the others (parallel-safe)."""
    w, h = sc.frame_size
    base = float(sc.background.base_level)
    sigma = sc.background.noise_sigma
    if sigma > 0:
        noise = gaussian_field(derive_seed(sc.seed, _NOISE_TAG, frame_index), w * h)
        vals = np.floor(base + sigma * noise.reshape(h, w) + 0.5)
        px = np.clip(vals, 0.0, 255.0).astype(np.uint8)
    else:
        px = np.full((h, w), sc.background.base_level, dtype=np.uint8)

    tb = true_box(sc, frame_index)
    x0, y0 = int(tb.x), int(tb.y)
    ow, oh = sc.target.size
    fill = sc.target.intensity
    border = max(fill - _BORDER_DROP, 0)
    px[y0 : y0 + oh, x0 : x0 + ow] = fill
    px[y0, x0 : x0 + ow] = border
    px[y0 + oh - 1, x0 : x0 + ow] = border
    px[y0 : y0 + oh, x0] = border
    px[y0 : y0 + oh, x0 + ow - 1] = border
    return FrameBuffer.from_array(px), tb


def render(sc: Scenario) -> list[tuple[FrameBuffer, BoundingBox]]:
    """All frames with their true boxes; deterministic in the scenario seed."""
    return [render_frame(sc, t) for t in range(sc.frame_count)]


def emulate_detector(sc: Scenario, true_boxes: Sequence[BoundingBox]) -> list[list[Detection]]:
    """Scripted detector output per frame: exactly one detection, or none on dropout.

    The true box is jittered by seeded Gaussian position noise, keeping its
    size and staying inside the frame; confidence is dip_conf on dip frames,
    base_conf with +-0.05 seeded uniform noise otherwise. The random stream
    advances identically on every frame, so editing the dip/dropout script
    never changes the boxes of the remaining frames.
    """
    w, h = sc.frame_size
    d = sc.detector
    gen = Xorshift64Star(derive_seed(sc.seed, _DETECTOR_TAG))
    out: list[list[Detection]] = []
    for t, tb in enumerate(true_boxes):
        jx = gen.gaussian()
        jy = gen.gaussian()
        u = gen.uniform()
        if t in d.dropout_frames:
            out.append([])
            continue
        # jitter moves the box but never resizes it or pushes it out of frame
        bx = min(max(tb.x + d.jitter_sigma * jx, 0.0), w - tb.w)
        by = min(max(tb.y + d.jitter_sigma * jy, 0.0), h - tb.h)
        box = BoundingBox(bx, by, tb.w, tb.h)
        if t in d.dip_frames:
            conf = d.dip_conf
        else:
            conf = min(1.0, max(0.0, d.base_conf + (u - 0.5) * 0.1))
        out.append([Detection(box=box, confidence=conf)])
    return out


def simulate(sc: Scenario) -> tuple[list[FrameBuffer], list[BoundingBox], list[list[Detection]]]:
    """Render a scenario and run the detector model over it."""
    rendered = render(sc)
    frames = [f for f, _ in rendered]
    boxes = [b for _, b in rendered]
    return frames, boxes, emulate_detector(sc, boxes)


def to_frame_inputs(
    frames: Sequence[FrameBuffer], detections: Sequence[Sequence[Detection]]
) -> list[FrameInput]:
    if len(frames) != len(detections):
        raise ValueError(f"{len(frames)} frames but {len(detections)} detection sets")
    return [
        FrameInput(frame_index=i, frame=f, detections=tuple(d))
        for i, (f, d) in enumerate(zip(frames, detections))
    ]


# ---------------------------------------------------------------------------
# Scoring

def _truth_map(true_boxes) -> dict[int, BoundingBox]:
    if isinstance(true_boxes, Mapping):
        return dict(true_boxes)
    return dict(enumerate(true_boxes))


def _detections_map(detections) -> dict[int, Sequence[Detection]]:
    if isinstance(detections, Mapping):
        return dict(detections)
    return dict(enumerate(detections))


def score(
    track_outputs: Iterable[TrackOutput | tuple[int, BoundingBox]],
    true_boxes: Sequence[BoundingBox] | Mapping[int, BoundingBox],
    detections: Sequence[Sequence[Detection]] | Mapping[int, Sequence[Detection]],
    conf_high: float = 0.6,
) -> dict:
    """Per-frame detection scoring against scripted truth.

    baseline_detected counts frames where the raw detector already had a
    confident (>= conf_high), correct (IOU >= 0.5) box; tracker_detected
    counts frames where any tracker output is correct; recovered counts
    frames only the tracker got. improvement_pct normalizes recovered by the
    number of truth frames. mean_iou averages output-vs-truth IOU over all
    outputs on truth frames.
    """
    truth = _truth_map(true_boxes)
    dets = _detections_map(detections)
    frame_count = len(truth)

    baseline: set[int] = set()
    for t, frame_dets in dets.items():
        tb = truth.get(t)
        if tb is None:
            continue
        if any(d.confidence >= conf_high and iou(d.box, tb) >= 0.5 for d in frame_dets):
            baseline.add(t)

    tracked: set[int] = set()
    ious: list[float] = []
    for item in track_outputs:
        if isinstance(item, tuple):
            frame_index, box = item
        else:
            frame_index, box = item.frame_index, item.box
        tb = truth.get(frame_index)
        if tb is None:
            continue
        v = iou(box, tb)
        ious.append(v)
        if v >= 0.5:
            tracked.add(frame_index)

    recovered = tracked - baseline
    return {
        "baseline_detected": len(baseline),
        "tracker_detected": len(tracked),
        "recovered": len(recovered),
        "improvement_pct": (100.0 * len(recovered) / frame_count) if frame_count else 0.0,
        "mean_iou": (sum(ious) / len(ious)) if ious else 0.0,
    }
