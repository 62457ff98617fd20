"""Detector-agnostic stabilization of per-frame object detections.

The core idea: keep two confidence gates instead of one. Detections above
the high gate are trusted; detections between the gates are accepted only
when they agree with a correlation-based prediction from the previous
frame, and carry the track's last trusted confidence when they are. A
deterministic scenario simulator and Pascal VOC dataset tooling round out
the package.
"""

from .correlation import (
    FlatPatchError,
    ShiftEstimate,
    best_shift,
    extract_patch,
    register_regions,
    to_luma,
    zncc,
)
from .dataset import (
    CorpusStats,
    Heatmap,
    accumulate_heatmap,
    corpus_stats,
    merge_heatmaps,
    merge_stats,
    parse_voc,
    text_to_record,
    voc_to_text,
    write_voc,
)
from .formats import FormatError
from .geometry import (
    REFERENCE_SIZE,
    center_distance,
    expand,
    iou,
    round_px,
    scaled_area,
    size_dissimilarity,
)
from .model import (
    ACTIVE,
    PROVENANCE_DETECTED,
    PROVENANCE_SUBSTITUTED_IOU,
    PROVENANCE_SUBSTITUTED_NCC,
    WAITING,
    AnnotationRecord,
    BoundingBox,
    ConfigError,
    Detection,
    FrameBuffer,
    TrackEntry,
    TrackerConfig,
    TrackerState,
    validate_config,
)
from .simulator import (
    Background,
    DetectorModel,
    MovingObject,
    Scenario,
    emulate_detector,
    render,
    scenario_from_json,
    scenario_to_json,
    score,
    simulate,
)
from .tracker import FrameInput, TrackOutput, associate, classify, run_stream, step

__version__ = "0.1.0"

__all__ = [
    "ACTIVE",
    "WAITING",
    "PROVENANCE_DETECTED",
    "PROVENANCE_SUBSTITUTED_IOU",
    "PROVENANCE_SUBSTITUTED_NCC",
    "REFERENCE_SIZE",
    "AnnotationRecord",
    "Background",
    "BoundingBox",
    "ConfigError",
    "CorpusStats",
    "Detection",
    "DetectorModel",
    "FlatPatchError",
    "FormatError",
    "FrameBuffer",
    "FrameInput",
    "Heatmap",
    "MovingObject",
    "Scenario",
    "ShiftEstimate",
    "TrackEntry",
    "TrackOutput",
    "TrackerConfig",
    "TrackerState",
    "accumulate_heatmap",
    "associate",
    "best_shift",
    "center_distance",
    "classify",
    "corpus_stats",
    "emulate_detector",
    "expand",
    "extract_patch",
    "iou",
    "merge_heatmaps",
    "merge_stats",
    "parse_voc",
    "register_regions",
    "render",
    "round_px",
    "run_stream",
    "scaled_area",
    "scenario_from_json",
    "scenario_to_json",
    "score",
    "simulate",
    "size_dissimilarity",
    "step",
    "text_to_record",
    "to_luma",
    "validate_config",
    "voc_to_text",
    "write_voc",
    "zncc",
]
