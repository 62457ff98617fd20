"""Annotation parsing, label conversion, coverage heatmaps, corpus statistics.

Pascal VOC XML is the input format; boxes convert between corner form
(xmin, ymin, xmax, ymax) and the internal (x, y, w, h) form at the parse
boundary. Box areas are always reported at the 1280x1280 reference scale so
corpora with mixed resolutions are comparable. Stats and heatmaps merge
associatively, so directory trees can be processed in parallel per file.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import REFERENCE_SIZE, scaled_area
from .model import AnnotationRecord, BoundingBox

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Heatmap:
    """Per-pixel annotation coverage counts on the reference canvas."""

    counts: np.ndarray
    width: int = REFERENCE_SIZE
    height: int = REFERENCE_SIZE

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (self.height, self.width):
            raise ValueError(f"counts shape {c.shape} != ({self.height}, {self.width})")
        if (c < 0).any():
            raise ValueError("heatmap counts must be non-negative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    def normalized(self, image_count: int) -> np.ndarray:
        """Counts divided by image_count; a display view, not stored state."""
        if image_count <= 0:
            raise ValueError("image_count must be positive")
        return self.counts.astype(np.float64) / image_count


def empty_heatmap() -> Heatmap:
    return Heatmap(np.zeros((REFERENCE_SIZE, REFERENCE_SIZE), dtype=np.int64))


def merge_heatmaps(a: Heatmap, b: Heatmap) -> Heatmap:
    return Heatmap(a.counts + b.counts)


@dataclass(frozen=True)
class CorpusStats:
    """Corpus-level annotation counts and box-area extremes.

    Areas are in reference-scale pixels^2. area_sum is carried so that two
    partial stats merge exactly; mean_area derives from it. An empty corpus
    has no areas (None).
    """

    image_count: int = 0
    drone_count: int = 0
    difficult_count: int = 0
    per_image_histogram: dict[int, int] = field(default_factory=dict)
    min_area: float | None = None
    max_area: float | None = None
    area_sum: float = 0.0

    @property
    def mean_area(self) -> float | None:
        if self.drone_count == 0:
            return None
        return self.area_sum / self.drone_count

    def as_dict(self) -> dict:
        return {
            "image_count": self.image_count,
            "drone_count": self.drone_count,
            "difficult_count": self.difficult_count,
            "per_image_histogram": {str(k): self.per_image_histogram[k] for k in sorted(self.per_image_histogram)},
            "min_area": self.min_area,
            "max_area": self.max_area,
            "mean_area": self.mean_area,
        }


def merge_stats(a: CorpusStats, b: CorpusStats) -> CorpusStats:
    """Combine two partial stats; associative and commutative."""
    histogram = dict(a.per_image_histogram)
    for k, v in b.per_image_histogram.items():
        histogram[k] = histogram.get(k, 0) + v
    mins = [v for v in (a.min_area, b.min_area) if v is not None]
    maxs = [v for v in (a.max_area, b.max_area) if v is not None]
    return CorpusStats(
        image_count=a.image_count + b.image_count,
        drone_count=a.drone_count + b.drone_count,
        difficult_count=a.difficult_count + b.difficult_count,
        per_image_histogram=histogram,
        min_area=min(mins) if mins else None,
        max_area=max(maxs) if maxs else None,
        area_sum=a.area_sum + b.area_sum,
    )


def _require(elem: ET.Element | None, name: str, source: str) -> ET.Element:
    if elem is None:
        raise ValueError(f"{source}: missing <{name}> element")
    return elem


def _text_float(parent: ET.Element, name: str, source: str) -> float:
    elem = _require(parent.find(name), name, source)
    try:
        return float(elem.text)
    except (TypeError, ValueError):
        raise ValueError(f"{source}: <{name}> is not a number: {elem.text!r}") from None


def parse_voc(xml_text: str, source: str = "<xml>") -> list[AnnotationRecord]:
    """Parse one Pascal VOC annotation document into records.

    Yields one record per <object>; an annotation without objects parses to
    an empty list. Corner coordinates become (x, y, w, h). Boxes that
    overhang the stated image size are clamped and logged, matching how the
    record type rejects out-of-bounds boxes.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise ValueError(f"{source}: malformed XML: {exc}") from None
    filename_elem = root.find("filename")
    image_id = (filename_elem.text or "").strip() if filename_elem is not None else ""
    size = _require(root.find("size"), "size", source)
    width = int(_text_float(size, "width", source))
    height = int(_text_float(size, "height", source))
    if width <= 0 or height <= 0:
        raise ValueError(f"{source}: non-positive image size {width}x{height}")

    records = []
    for obj in root.findall("object"):
        difficult_elem = obj.find("difficult")
        difficult = difficult_elem is not None and (difficult_elem.text or "").strip() == "1"
        bnd = _require(obj.find("bndbox"), "bndbox", source)
        xmin = _text_float(bnd, "xmin", source)
        ymin = _text_float(bnd, "ymin", source)
        xmax = _text_float(bnd, "xmax", source)
        ymax = _text_float(bnd, "ymax", source)
        if xmax <= xmin or ymax <= ymin:
            raise ValueError(f"{source}: degenerate box corners ({xmin}, {ymin}, {xmax}, {ymax})")
        box = BoundingBox.from_corners(xmin, ymin, xmax, ymax)
        if box.x < 0 or box.y < 0 or xmax > width or ymax > height:
            log.warning("%s: box %s exceeds image size %dx%d; clamped", source, box, width, height)
            box = box.clamp(width, height)
        records.append(
            AnnotationRecord(
                image_id=image_id,
                image_width=width,
                image_height=height,
                box=box,
                difficult=difficult,
            )
        )
    return records


def _fmt_coord(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_voc(
    records: Sequence[AnnotationRecord],
    image_id: str | None = None,
    image_width: int | None = None,
    image_height: int | None = None,
) -> str:
    """Serialize one image's records to a VOC document; inverse of parse_voc.

    For an empty record list the image identity and size must be given
    explicitly; otherwise they are taken from the records, which must agree.
    """
    if records:
        image_id = records[0].image_id
        image_width = records[0].image_width
        image_height = records[0].image_height
        for r in records:
            if (r.image_id, r.image_width, r.image_height) != (image_id, image_width, image_height):
                raise ValueError("records describe different images")
    elif image_id is None or image_width is None or image_height is None:
        raise ValueError("empty record list needs explicit image_id and dimensions")

    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = image_id
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(image_width)
    ET.SubElement(size, "height").text = str(image_height)
    ET.SubElement(size, "depth").text = "1"
    for r in records:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = "object"
        ET.SubElement(obj, "difficult").text = "1" if r.difficult else "0"
        bnd = ET.SubElement(obj, "bndbox")
        ET.SubElement(bnd, "xmin").text = _fmt_coord(r.box.x)
        ET.SubElement(bnd, "ymin").text = _fmt_coord(r.box.y)
        ET.SubElement(bnd, "xmax").text = _fmt_coord(r.box.x + r.box.w)
        ET.SubElement(bnd, "ymax").text = _fmt_coord(r.box.y + r.box.h)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def voc_to_text(rec: AnnotationRecord) -> str:
    """One normalized label line: '0 cx cy w h' with six decimals."""
    cx = (rec.box.x + rec.box.w / 2.0) / rec.image_width
    cy = (rec.box.y + rec.box.h / 2.0) / rec.image_height
    w = rec.box.w / rec.image_width
    h = rec.box.h / rec.image_height
    return f"0 {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}"


def text_to_record(
    line: str, image_id: str, image_width: int, image_height: int
) -> AnnotationRecord:
    """Parse a normalized label line back into a record.

    The six-decimal quantization bounds the round-trip error by
    0.75e-6 * image size per coordinate, well under half a pixel for any
    realistic resolution; residual overhang from that quantization is
    clamped away.
    """
    parts = line.split()
    if len(parts) != 5:
        raise ValueError(f"label line must have 5 fields, got {len(parts)}: {line!r}")
    if parts[0] != "0":
        raise ValueError(f"unknown class id {parts[0]!r}")
    cx, cy, w, h = (float(p) for p in parts[1:])
    if w <= 0 or h <= 0:
        raise ValueError(f"non-positive normalized size in {line!r}")
    box = BoundingBox(
        x=(cx - w / 2.0) * image_width,
        y=(cy - h / 2.0) * image_height,
        w=w * image_width,
        h=h * image_height,
    ).clamp(image_width, image_height)
    return AnnotationRecord(
        image_id=image_id, image_width=image_width, image_height=image_height, box=box
    )


def rasterize_to_canvas(rec: AnnotationRecord) -> tuple[int, int, int, int]:
    """Reference-canvas integer cell range (x0, y0, x1, y1) covered by a box.

    Scaled corners are rounded outward so even sub-pixel boxes cover at
    least one cell; the range is half-open and clipped to the canvas.
    """
    sx = REFERENCE_SIZE / rec.image_width
    sy = REFERENCE_SIZE / rec.image_height
    x0 = max(int(np.floor(rec.box.x * sx)), 0)
    y0 = max(int(np.floor(rec.box.y * sy)), 0)
    x1 = min(int(np.ceil((rec.box.x + rec.box.w) * sx)), REFERENCE_SIZE)
    y1 = min(int(np.ceil((rec.box.y + rec.box.h) * sy)), REFERENCE_SIZE)
    return x0, y0, x1, y1


def accumulate_heatmap(
    records: Iterable[AnnotationRecord], include_difficult: bool = True
) -> Heatmap:
    """Sum per-box coverage over the reference canvas.

    Order-independent by construction: each box adds 1 to every canvas cell
    it covers after scaling.
    """
    counts = np.zeros((REFERENCE_SIZE, REFERENCE_SIZE), dtype=np.int64)
    for rec in records:
        if rec.difficult and not include_difficult:
            continue
        x0, y0, x1, y1 = rasterize_to_canvas(rec)
        counts[y0:y1, x0:x1] += 1
    return Heatmap(counts)


def corpus_stats(images: Iterable[Sequence[AnnotationRecord]]) -> CorpusStats:
    """Fold per-image record groups into corpus counts and area extremes.

    Difficult annotations are included in every figure and additionally
    counted on their own; images with no annotations count toward
    image_count only.
    """
    image_count = 0
    drone_count = 0
    difficult_count = 0
    histogram: dict[int, int] = {}
    min_area: float | None = None
    max_area: float | None = None
    area_sum = 0.0
    for group in images:
        image_count += 1
        n = len(group)
        if n == 0:
            continue
        histogram[n] = histogram.get(n, 0) + 1
        drone_count += n
        for rec in group:
            if rec.difficult:
                difficult_count += 1
            area = scaled_area(rec.box, rec.image_width, rec.image_height)
            area_sum += area
            min_area = area if min_area is None else min(min_area, area)
            max_area = area if max_area is None else max(max_area, area)
    return CorpusStats(
        image_count=image_count,
        drone_count=drone_count,
        difficult_count=difficult_count,
        per_image_histogram=histogram,
        min_area=min_area,
        max_area=max_area,
        area_sum=area_sum,
    )
