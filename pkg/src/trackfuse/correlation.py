"""Patch extraction and zero-normalized cross-correlation (ZNCC) shift search.

ZNCC compares mean-subtracted, variance-normalized patches, so it is
insensitive to brightness and contrast changes between frames. Patches with
zero intensity variance carry no spatial information and are rejected with
FlatPatchError rather than silently scoring 0; flatness is decided exactly
(integer arithmetic on the 8-bit pixel sums), never by a float epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .geometry import expand, round_px
from .model import BoundingBox, FrameBuffer


class FlatPatchError(ValueError):
    """A patch or window has zero intensity variance and cannot be matched."""


@dataclass(frozen=True)
class ShiftEstimate:
    """An integer pixel shift plus the ZNCC value at that shift."""

    dx: int
    dy: int
    peak: float

    def __post_init__(self):
        if abs(self.peak) > 1.0 + 1e-9:
            raise ValueError(f"peak {self.peak} outside [-1, 1]")


def to_luma(width: int, height: int, rgb_data) -> FrameBuffer:
    """Reduce row-major 8-bit RGB triplets to BT.601 luma.

    luma = round(0.299 R + 0.587 G + 0.114 B), clamped to 0..255.
    """
    if isinstance(rgb_data, (bytes, bytearray, memoryview)):
        arr = np.frombuffer(rgb_data, dtype=np.uint8)
    else:
        arr = np.asarray(rgb_data, dtype=np.uint8)
    if arr.size != 3 * width * height:
        raise ValueError(
            f"rgb data length {arr.size} does not match 3*{width}*{height}={3 * width * height}"
        )
    rgb = arr.reshape(height, width, 3).astype(np.float64)
    y = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    y = np.clip(np.floor(y + 0.5), 0.0, 255.0)
    return FrameBuffer.from_array(y.astype(np.uint8))


def extract_patch(frame: FrameBuffer, box: BoundingBox) -> FrameBuffer:
    """Copy the integer-pixel region [round(x), round(x)+round(w)) x [round(y), ...).

    The region is intersected with the frame; an empty intersection raises
    ValueError.
    """
    x0 = max(round_px(box.x), 0)
    y0 = max(round_px(box.y), 0)
    x1 = min(x0 + round_px(box.w), frame.width)
    y1 = min(y0 + round_px(box.h), frame.height)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise ValueError(f"box {box} rounds to an empty region in a {frame.width}x{frame.height} frame")
    return FrameBuffer.from_array(frame.pixels[y0:y1, x0:x1])


def _is_flat(px: np.ndarray) -> bool:
    # n*sum(v^2) == (sum v)^2 iff all values equal; exact in python ints
    s1 = int(px.sum(dtype=np.int64))
    s2 = int((px.astype(np.int64) ** 2).sum())
    return px.size * s2 == s1 * s1


def _zncc_f64(t: np.ndarray, w: np.ndarray) -> float:
    t0 = (t - t.mean()).ravel()
    w0 = (w - w.mean()).ravel()
    num = float(np.dot(t0, w0))
    den = float(np.sqrt(np.dot(t0, t0) * np.dot(w0, w0)))
    return min(1.0, max(-1.0, num / den))


def zncc(template: FrameBuffer, window: FrameBuffer) -> float:
    """ZNCC of two equal-size patches: sum((T-mean)(W-mean)) / sqrt(var sums).

    Computed in double precision; result in [-1, 1]. Raises FlatPatchError
    for a zero-variance template or window.
    """
    if (template.height, template.width) != (window.height, window.width):
        raise ValueError(
            f"patch sizes differ: {template.width}x{template.height} vs {window.width}x{window.height}"
        )
    if _is_flat(template.pixels):
        raise FlatPatchError("flat patch: template has zero variance")
    if _is_flat(window.pixels):
        raise FlatPatchError("flat patch: window has zero variance")
    return _zncc_f64(template.pixels.astype(np.float64), window.pixels.astype(np.float64))


def best_shift(template: FrameBuffer, search: FrameBuffer) -> ShiftEstimate:
    """Exhaustive integer-shift ZNCC match of template inside search.

    Every placement of the template inside the search window is scored; the
    returned (dx, dy) is relative to the centered placement
    ((sw-tw)//2, (sh-th)//2). Ties are broken by smallest dx*dx+dy*dy, then
    smallest dy, then smallest dx. Zero-variance windows are skipped; if no
    placement has variance the search is unmatchable and FlatPatchError is
    raised.
    """
    th, tw = template.height, template.width
    sh, sw = search.height, search.width
    if th > sh or tw > sw:
        raise ValueError(f"search {sw}x{sh} smaller than template {tw}x{th}")
    if _is_flat(template.pixels):
        raise FlatPatchError("flat patch: template has zero variance")

    t = template.pixels.astype(np.float64)
    n = t.size
    t0 = t - t.mean()
    t0_sum = float(t0.sum())
    st = float(np.dot(t0.ravel(), t0.ravel()))

    s_f = search.pixels.astype(np.float64)
    s_i = search.pixels.astype(np.int64)
    win_f = sliding_window_view(s_f, (th, tw))
    win_i = sliding_window_view(s_i, (th, tw))

    cross = np.einsum("ijkl,kl->ij", win_f, t0)
    s1 = np.einsum("ijkl->ij", win_i)
    s2 = np.einsum("ijkl,ijkl->ij", win_i, win_i)
    # exact: a window is flat iff n*sum(v^2) == (sum v)^2
    var_n = n * s2 - s1 * s1
    flat = var_n == 0

    if bool(flat.all()):
        raise FlatPatchError("flat patch: every search window has zero variance")

    num = cross - (s1.astype(np.float64) / n) * t0_sum
    den = np.sqrt(st * (var_n.astype(np.float64) / n))
    zmap = np.full(cross.shape, -2.0)
    np.divide(num, den, out=zmap, where=~flat)

    zmax = zmap.max()
    ys, xs = np.nonzero(zmap == zmax)
    cx = (sw - tw) // 2
    cy = (sh - th) // 2
    dxs = xs - cx
    dys = ys - cy
    order = np.lexsort((dxs, dys, dxs * dxs + dys * dys))
    k = order[0]
    px, py = int(xs[k]), int(ys[k])
    peak = _zncc_f64(t, s_f[py : py + th, px : px + tw])
    return ShiftEstimate(dx=px - cx, dy=py - cy, peak=peak)


def register_regions(
    patch_a: FrameBuffer, frame_b: FrameBuffer, seed_box: BoundingBox, margin: float
) -> ShiftEstimate:
    """Locate patch_a inside frame_b near seed_box.

    The seed box is expanded by margin within frame_b and patch_a is matched
    against that region. The returned (dx, dy) is frame-anchored: the found
    patch origin minus the rounded seed origin, so an exact cut at the seed
    box yields (0, 0) regardless of how the expanded region was clipped.
    A poor peak signals an unusable pair; the caller decides the cutoff.
    """
    region_box = expand(seed_box, margin, frame_b.width, frame_b.height)
    region = extract_patch(frame_b, region_box)
    est = best_shift(patch_a, region)
    cx = (region.width - patch_a.width) // 2
    cy = (region.height - patch_a.height) // 2
    x0 = max(round_px(region_box.x), 0)
    y0 = max(round_px(region_box.y), 0)
    dx = x0 + cx + est.dx - round_px(seed_box.x)
    dy = y0 + cy + est.dy - round_px(seed_box.y)
    return ShiftEstimate(dx=dx, dy=dy, peak=est.peak)
