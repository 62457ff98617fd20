"""Detection stabilization: threshold gating, association, substitution.

Per frame, detections are split by confidence into valid / provisional /
discarded. Valid detections extend or seed tracks directly. A track that
only finds a provisional detection predicts its box by patch correlation
against the current frame; the provisional box is accepted when it overlaps
the prediction, or the predicted box itself is accepted when the correlation
peak is strong enough. Either way the emitted confidence is the track's last
detector-reported score, never an invented value. A track with no acceptable
continuation emits nothing and waits; waiting tracks are revived only by a
valid detection and are retired after a fixed number of idle frames.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .correlation import FlatPatchError, extract_patch, register_regions
from .geometry import center_distance, iou, size_dissimilarity
from .model import (
    ACTIVE,
    PROVENANCE_DETECTED,
    PROVENANCE_SUBSTITUTED_IOU,
    PROVENANCE_SUBSTITUTED_NCC,
    WAITING,
    BoundingBox,
    Detection,
    FrameBuffer,
    TrackEntry,
    TrackerConfig,
    TrackerState,
)

log = logging.getLogger(__name__)

_PROVENANCES = (
    PROVENANCE_DETECTED,
    PROVENANCE_SUBSTITUTED_IOU,
    PROVENANCE_SUBSTITUTED_NCC,
)


@dataclass(frozen=True)
class FrameInput:
    """One frame of work: pixel data plus the detector's raw output."""

    frame_index: int
    frame: FrameBuffer
    detections: tuple[Detection, ...]

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class TrackOutput:
    """One stabilized box: where it came from and the confidence carried."""

    frame_index: int
    track_id: int
    box: BoundingBox
    confidence: float
    provenance: str

    def __post_init__(self):
        if self.provenance not in _PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


def classify(
    detections: Sequence[Detection], cfg: TrackerConfig
) -> tuple[list[Detection], list[Detection], list[Detection]]:
    """Partition detections into (valid, provisional, discarded) by confidence.

    conf >= conf_high is valid, conf_low <= conf < conf_high is provisional,
    the rest is discarded. Both boundaries are inclusive on the low side.
    Input order is preserved within each class.
    """
    valid: list[Detection] = []
    provisional: list[Detection] = []
    discarded: list[Detection] = []
    for d in detections:
        if d.confidence >= cfg.conf_high:
            valid.append(d)
        elif d.confidence >= cfg.conf_low:
            provisional.append(d)
        else:
            discarded.append(d)
    return valid, provisional, discarded


def pair_cost(
    track_box: BoundingBox, det_box: BoundingBox, frame_diag: float, cfg: TrackerConfig
) -> float:
    """Association cost: weighted overlap complement, distance, size mismatch."""
    c = cfg.assoc_iou_weight * (1.0 - iou(track_box, det_box))
    c += cfg.assoc_distance_weight * center_distance(track_box, det_box) / frame_diag
    c += cfg.assoc_size_weight * size_dissimilarity(track_box, det_box)
    return c


def associate(
    tracks: Sequence[TrackEntry],
    candidates: Sequence[Detection],
    frame_width: int,
    frame_height: int,
    cfg: TrackerConfig,
) -> dict[int, int]:
    """Greedy one-to-one matching of tracks to candidate detections.

    Pairs are taken in ascending cost order; a pair costing more than
    assoc_cost_cutoff is never matched. Returns {track id: candidate index};
    the mapping is partial and injective. Cost ties resolve by track order,
    then candidate order.
    """
    diag = math.hypot(frame_width, frame_height)
    pairs = []
    for ti, track in enumerate(tracks):
        for ci, det in enumerate(candidates):
            c = pair_cost(track.last_box, det.box, diag, cfg)
            if c <= cfg.assoc_cost_cutoff:
                pairs.append((c, ti, ci))
    pairs.sort()
    matched: dict[int, int] = {}
    used_tracks: set[int] = set()
    used_candidates: set[int] = set()
    for _, ti, ci in pairs:
        if ti in used_tracks or ci in used_candidates:
            continue
        used_tracks.add(ti)
        used_candidates.add(ci)
        matched[tracks[ti].id] = ci
    return matched


def _safe_patch(frame: FrameBuffer, box: BoundingBox) -> FrameBuffer | None:
    try:
        return extract_patch(frame, box)
    except ValueError:
        return None


def _clamp_detections(
    detections: Iterable[Detection], width: int, height: int
) -> list[Detection]:
    out = []
    for d in detections:
        b = d.box
        if b.x >= 0 and b.y >= 0 and b.x + b.w <= width and b.y + b.h <= height:
            out.append(d)
            continue
        try:
            clamped = b.clamp(width, height)
        except ValueError:
            log.warning("detection box %s lies outside the %dx%d frame; dropped", b, width, height)
            continue
        log.warning("detection box %s clipped to the %dx%d frame", b, width, height)
        out.append(Detection(box=clamped, confidence=d.confidence))
    return out


def _predict(
    track: TrackEntry, frame: FrameBuffer, cfg: TrackerConfig
) -> tuple[BoundingBox | None, float]:
    """Correlation-predicted position of the track in this frame.

    Returns (box, peak), or (None, 0.0) when no usable prediction exists:
    missing or flat template, search region flat or smaller than the
    template, or the shifted box leaving the frame entirely.
    """
    if track.template is None:
        return None, 0.0
    try:
        est = register_regions(track.template, frame, track.last_box, cfg.search_margin)
    except (FlatPatchError, ValueError):
        return None, 0.0
    box = track.last_box.translate(est.dx, est.dy)
    try:
        box = box.clamp(frame.width, frame.height)
    except ValueError:
        return None, 0.0
    return box, est.peak


def _seed(
    state: TrackerState,
    frame: FrameBuffer,
    frame_index: int,
    det: Detection,
    outputs: list[TrackOutput],
) -> None:
    track = TrackEntry(
        id=state.next_track_id,
        last_box=det.box,
        last_confidence=det.confidence,
        template=_safe_patch(frame, det.box),
    )
    state.next_track_id += 1
    state.tracks.append(track)
    outputs.append(
        TrackOutput(frame_index, track.id, det.box, det.confidence, PROVENANCE_DETECTED)
    )


def step(
    state: TrackerState, frame_input: FrameInput, cfg: TrackerConfig
) -> tuple[TrackerState, list[TrackOutput]]:
    """Advance one frame; returns the updated state and this frame's outputs.

    Outputs are ordered by track id, newly seeded tracks last. frame_index
    must exceed the previous call's on the same state.
    """
    fi = frame_input.frame_index
    if fi <= state.last_frame_index:
        raise ValueError(
            f"frame_index {fi} is not greater than the last processed index {state.last_frame_index}"
        )
    frame = frame_input.frame
    detections = _clamp_detections(frame_input.detections, frame.width, frame.height)
    valid, provisional, _ = classify(detections, cfg)
    outputs: list[TrackOutput] = []

    if not state.tracks:
        for det in valid:
            _seed(state, frame, fi, det, outputs)
        state.last_frame_index = fi
        return state, outputs

    candidates = valid + provisional
    n_valid = len(valid)
    matches = associate(state.tracks, candidates, frame.width, frame.height, cfg)

    surviving: list[TrackEntry] = []
    for track in state.tracks:
        ci = matches.get(track.id)
        emitted: TrackOutput | None = None

        if ci is not None and ci < n_valid:
            det = candidates[ci]
            track.last_box = det.box
            track.last_confidence = det.confidence
            track.template = _safe_patch(frame, det.box)
            track.substitution_count = 0
            track.status = ACTIVE
            track.waiting_frames = 0
            emitted = TrackOutput(fi, track.id, det.box, det.confidence, PROVENANCE_DETECTED)
        elif (
            ci is not None
            and track.status == ACTIVE
            and track.substitution_count < cfg.max_substitutions
        ):
            det = candidates[ci]
            predicted, peak = _predict(track, frame, cfg)
            accepted: BoundingBox | None = None
            provenance = ""
            if predicted is not None:
                if iou(predicted, det.box) >= cfg.iou_thresh:
                    accepted = det.box
                    provenance = PROVENANCE_SUBSTITUTED_IOU
                elif peak >= cfg.ncc_thresh:
                    accepted = predicted
                    provenance = PROVENANCE_SUBSTITUTED_NCC
            if accepted is not None:
                track.last_box = accepted
                track.substitution_count += 1
                if cfg.template_mode == "rolling":
                    track.template = _safe_patch(frame, accepted)
                emitted = TrackOutput(fi, track.id, accepted, track.last_confidence, provenance)

        if emitted is None:
            track.status = WAITING
            track.waiting_frames += 1
            if track.waiting_frames >= cfg.max_waiting_frames:
                continue
        else:
            outputs.append(emitted)
        surviving.append(track)
    state.tracks = surviving

    matched_candidates = set(matches.values())
    for ci in range(n_valid):
        if ci not in matched_candidates:
            _seed(state, frame, fi, candidates[ci], outputs)

    state.last_frame_index = fi
    return state, outputs


def run_stream(
    frames: Iterable[FrameInput], cfg: TrackerConfig | None = None
) -> list[TrackOutput]:
    """Fold step over an ordered stream, starting from an empty state."""
    if cfg is None:
        cfg = TrackerConfig()
    state = TrackerState()
    outputs: list[TrackOutput] = []
    for frame_input in frames:
        state, out = step(state, frame_input, cfg)
        outputs.extend(out)
    return outputs
