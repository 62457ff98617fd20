"""Pure box arithmetic shared by association, prediction, and dataset statistics."""

from __future__ import annotations

import math

from .model import BoundingBox

REFERENCE_SIZE = 1280


def round_px(v: float) -> int:
    """Round to the nearest integer pixel, halves away from the origin side (floor(v + 0.5))."""
    return int(math.floor(v + 0.5))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two positive-area boxes, in [0, 1].

    All areas derive from the same corner values, so iou(a, a) is exactly
    1.0 even when x + w rounds in float.
    """
    ax0, ay0, ax1, ay1 = a.corners()
    bx0, by0, bx1, by1 = b.corners()
    ix = min(ax1, bx1) - max(ax0, bx0)
    iy = min(ay1, by1) - max(ay0, by0)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    """Euclidean distance between box centers, in pixels."""
    ax, ay = a.center
    bx, by = b.center
    return math.hypot(ax - bx, ay - by)


def size_dissimilarity(a: BoundingBox, b: BoundingBox) -> float:
    """Absolute log ratio of box areas; 0 for equal areas, symmetric, scale-friendly."""
    return abs(math.log(a.area / b.area))


def expand(b: BoundingBox, margin: float, frame_w: float, frame_h: float) -> BoundingBox:
    """Grow a box by margin*w per side horizontally and margin*h vertically, clamped to the frame."""
    grown = BoundingBox(
        b.x - margin * b.w,
        b.y - margin * b.h,
        b.w * (1.0 + 2.0 * margin),
        b.h * (1.0 + 2.0 * margin),
    )
    return grown.clamp(frame_w, frame_h)


def scaled_area(b: BoundingBox, src_w: float, src_h: float, ref: float = REFERENCE_SIZE) -> float:
    """Box area re-expressed as if the source image were ref x ref pixels."""
    return b.w * (ref / src_w) * b.h * (ref / src_h)
