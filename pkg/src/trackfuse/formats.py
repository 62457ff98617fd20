"""On-disk interchange formats: PGM frames, detection/truth JSONL, MOT CSV.

Every reader raises FormatError naming the offending file (and line, where
the format has lines) so the CLI can fail with a precise message. Every
writer is byte-deterministic: fixed field order, fixed float formatting,
sorted iteration.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import BoundingBox, Detection, FrameBuffer
from .tracker import TrackOutput


class FormatError(ValueError):
    """Malformed input data; message carries file and line when known."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        self.source = source
        self.line = line
        prefix = ""
        if source is not None:
            prefix = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(prefix + message)


# ---------------------------------------------------------------------------
# PGM (binary PNM, P5)

def _pnm_header(data: bytes, source: str) -> tuple[list[int], int]:
    """Parse 'P5 <w> <h> <maxval>' allowing comments; return values and body offset."""
    if data[:2] != b"P5":
        raise FormatError("not a P5 PGM (bad magic)", source)
    i = 2
    n = len(data)
    fields: list[int] = []
    while len(fields) < 3:
        if i >= n:
            raise FormatError("truncated PGM header", source)
        c = data[i]
        if c == ord("#"):
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
        elif data[i : i + 1].isspace():
            i += 1
        else:
            j = i
            while j < n and not data[j : j + 1].isspace() and data[j] != ord("#"):
                j += 1
            token = data[i:j]
            if not token.isdigit():
                raise FormatError(f"bad PGM header token {token!r}", source)
            fields.append(int(token))
            i = j
    if i >= n or not data[i : i + 1].isspace():
        raise FormatError("PGM header not terminated by whitespace", source)
    return fields, i + 1


def read_pgm_any(data: bytes, source: str = "<pgm>") -> tuple[int, np.ndarray]:
    """Decode a P5 PGM of either depth; returns (maxval, array of shape (h, w))."""
    (width, height, maxval), offset = _pnm_header(data, source)
    if width <= 0 or height <= 0:
        raise FormatError(f"non-positive PGM size {width}x{height}", source)
    if not (0 < maxval < 65536):
        raise FormatError(f"PGM maxval {maxval} out of range", source)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    body = data[offset:]
    if len(body) != expected:
        raise FormatError(
            f"PGM body is {len(body)} bytes, expected {expected} for {width}x{height}", source
        )
    pixels = np.frombuffer(body, dtype=dtype).reshape(height, width)
    return maxval, pixels


def read_pgm(data: bytes, source: str = "<pgm>") -> FrameBuffer:
    """Decode an 8-bit P5 PGM frame."""
    maxval, pixels = read_pgm_any(data, source)
    if maxval != 255:
        raise FormatError(f"expected 8-bit PGM (maxval 255), got maxval {maxval}", source)
    return FrameBuffer.from_array(pixels.astype(np.uint8))


def write_pgm(frame: FrameBuffer) -> bytes:
    return b"P5\n%d %d\n255\n" % (frame.width, frame.height) + frame.data


def write_pgm16(counts: np.ndarray) -> bytes:
    """16-bit big-endian P5; values above 65535 saturate."""
    arr = np.asarray(counts)
    if arr.ndim != 2:
        raise ValueError(f"expected 2-D array, got shape {arr.shape}")
    clipped = np.clip(arr, 0, 65535).astype(">u2")
    h, w = clipped.shape
    return b"P5\n%d %d\n65535\n" % (w, h) + clipped.tobytes()


def load_pgm(path: str | Path) -> FrameBuffer:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc}", str(p)) from None
    return read_pgm(data, str(p))


def save_pgm(path: str | Path, frame: FrameBuffer) -> None:
    Path(path).write_bytes(write_pgm(frame))


def save_pgm16(path: str | Path, counts: np.ndarray) -> None:
    Path(path).write_bytes(write_pgm16(counts))


# ---------------------------------------------------------------------------
# JSONL detection and truth streams

def _jsonl_objects(path: Path) -> Iterable[tuple[int, dict]]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc}", str(path)) from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", str(path), lineno) from None
        if not isinstance(obj, dict):
            raise FormatError("line is not a JSON object", str(path), lineno)
        yield lineno, obj


def _check_keys(obj: dict, required: tuple[str, ...], source: str, lineno: int) -> None:
    keys = set(obj)
    missing = [k for k in required if k not in keys]
    extra = sorted(keys - set(required))
    if missing:
        raise FormatError(f"missing key(s) {missing}", source, lineno)
    if extra:
        raise FormatError(f"unknown key(s) {extra}", source, lineno)


def _num(obj: dict, key: str, source: str, lineno: int) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise FormatError(f"{key} must be a number, got {v!r}", source, lineno)
    return float(v)


def _frame_number(obj: dict, source: str, lineno: int) -> int:
    v = obj["frame"]
    if isinstance(v, bool) or not isinstance(v, int):
        raise FormatError(f"frame must be an integer, got {v!r}", source, lineno)
    if v < 0:
        raise FormatError(f"frame must be >= 0, got {v}", source, lineno)
    return v


def read_detections_jsonl(path: str | Path) -> dict[int, list[Detection]]:
    """Read per-frame detections: {"frame": n, "detections": [{x,y,w,h,conf}]}.

    Frames may be omitted (treated as having no detections); a frame listed
    twice is an error.
    """
    p = Path(path)
    out: dict[int, list[Detection]] = {}
    for lineno, obj in _jsonl_objects(p):
        _check_keys(obj, ("frame", "detections"), str(p), lineno)
        frame = _frame_number(obj, str(p), lineno)
        if frame in out:
            raise FormatError(f"duplicate frame {frame}", str(p), lineno)
        dets_raw = obj["detections"]
        if not isinstance(dets_raw, list):
            raise FormatError("detections must be an array", str(p), lineno)
        dets = []
        for d in dets_raw:
            if not isinstance(d, dict):
                raise FormatError("detection entry is not an object", str(p), lineno)
            _check_keys(d, ("x", "y", "w", "h", "conf"), str(p), lineno)
            try:
                box = BoundingBox(
                    _num(d, "x", str(p), lineno),
                    _num(d, "y", str(p), lineno),
                    _num(d, "w", str(p), lineno),
                    _num(d, "h", str(p), lineno),
                )
                dets.append(Detection(box=box, confidence=_num(d, "conf", str(p), lineno)))
            except ValueError as exc:
                raise FormatError(str(exc), str(p), lineno) from None
        out[frame] = dets
    return out


def write_detections_jsonl(path: str | Path, per_frame: Mapping[int, Sequence[Detection]]) -> None:
    lines = []
    for frame in sorted(per_frame):
        dets = [
            {"x": d.box.x, "y": d.box.y, "w": d.box.w, "h": d.box.h, "conf": d.confidence}
            for d in per_frame[frame]
        ]
        lines.append(json.dumps({"frame": frame, "detections": dets}, separators=(",", ":")))
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_truth_jsonl(path: str | Path) -> dict[int, BoundingBox]:
    """Read per-frame ground-truth boxes: {"frame": n, "box": {x,y,w,h}}."""
    p = Path(path)
    out: dict[int, BoundingBox] = {}
    for lineno, obj in _jsonl_objects(p):
        _check_keys(obj, ("frame", "box"), str(p), lineno)
        frame = _frame_number(obj, str(p), lineno)
        if frame in out:
            raise FormatError(f"duplicate frame {frame}", str(p), lineno)
        b = obj["box"]
        if not isinstance(b, dict):
            raise FormatError("box must be an object", str(p), lineno)
        _check_keys(b, ("x", "y", "w", "h"), str(p), lineno)
        try:
            out[frame] = BoundingBox(
                _num(b, "x", str(p), lineno),
                _num(b, "y", str(p), lineno),
                _num(b, "w", str(p), lineno),
                _num(b, "h", str(p), lineno),
            )
        except ValueError as exc:
            raise FormatError(str(exc), str(p), lineno) from None
    return out


def write_truth_jsonl(path: str | Path, boxes: Mapping[int, BoundingBox]) -> None:
    lines = []
    for frame in sorted(boxes):
        b = boxes[frame]
        lines.append(
            json.dumps(
                {"frame": frame, "box": {"x": b.x, "y": b.y, "w": b.w, "h": b.h}},
                separators=(",", ":"),
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines))


# ---------------------------------------------------------------------------
# MOT-style CSV

def mot_csv_lines(outputs: Iterable[TrackOutput]) -> str:
    """Rows 'frame,id,bb_left,bb_top,bb_width,bb_height,conf,-1,-1,-1'.

    Frame numbering starts at 1; coordinates use 2 decimals, confidence 6.
    """
    rows = []
    for o in outputs:
        b = o.box
        rows.append(
            f"{o.frame_index + 1},{o.track_id},{b.x:.2f},{b.y:.2f},{b.w:.2f},{b.h:.2f},"
            f"{o.confidence:.6f},-1,-1,-1"
        )
    return "".join(r + "\n" for r in rows)


def write_mot_csv(path: str | Path, outputs: Iterable[TrackOutput]) -> None:
    Path(path).write_text(mot_csv_lines(outputs))


def read_mot_csv(path: str | Path) -> list[tuple[int, int, BoundingBox, float]]:
    """Parse rows back to (frame_index, track_id, box, confidence)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read file: {exc}", str(p)) from None
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 10:
            raise FormatError(f"expected 10 comma-separated fields, got {len(parts)}", str(p), lineno)
        try:
            frame = int(parts[0])
            track_id = int(parts[1])
            x, y, w, h = (float(v) for v in parts[2:6])
            conf = float(parts[6])
        except ValueError:
            raise FormatError(f"non-numeric field in row: {line!r}", str(p), lineno) from None
        if frame < 1:
            raise FormatError(f"frame numbers start at 1, got {frame}", str(p), lineno)
        try:
            box = BoundingBox(x, y, w, h)
        except ValueError as exc:
            raise FormatError(str(exc), str(p), lineno) from None
        out.append((frame - 1, track_id, box, conf))
    return out
