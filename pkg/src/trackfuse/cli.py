"""Command-line surface.

Commands wire the file formats to the library operations and nothing else;
all I/O is local files and standard streams. Exit codes: 0 success, 2
malformed input data (message names the file and, where applicable, the
line), 3 invalid configuration.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import simulator as sim
from .dataset import accumulate_heatmap, corpus_stats, parse_voc, voc_to_text
from .formats import (
    FormatError,
    load_pgm,
    read_detections_jsonl,
    read_mot_csv,
    read_truth_jsonl,
    save_pgm,
    save_pgm16,
    write_detections_jsonl,
    write_mot_csv,
    write_truth_jsonl,
)
from .model import ConfigError, TrackerConfig
from .tracker import FrameInput, run_stream

THREADS_ENV = "TRACKFUSE_THREADS"


def _guard(fn):
    """Map domain errors to the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FormatError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)

    return wrapper


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {n}")
    return n


def _config_options(fn):
    options = [
        click.option("--conf-high", type=float, default=0.6, show_default=True,
                     help="confidence at or above which a detection is valid"),
        click.option("--conf-low", type=float, default=0.25, show_default=True,
                     help="confidence at or above which a detection is provisional"),
        click.option("--iou-thresh", type=float, default=0.3, show_default=True,
                     help="minimum IOU between prediction and provisional box"),
        click.option("--ncc-thresh", type=float, default=0.5, show_default=True,
                     help="minimum correlation peak to accept a predicted box"),
        click.option("--search-margin", type=float, default=0.5, show_default=True,
                     help="fractional box enlargement per side for the search region"),
        click.option("--max-substitutions", type=int, default=10, show_default=True,
                     help="consecutive substituted outputs allowed per track"),
        click.option("--template-mode", type=click.Choice(["rolling", "frozen"]),
                     default="rolling", show_default=True,
                     help="refresh the template every accepted box, or only on valid detections"),
        click.option("--assoc-iou-weight", type=float, default=1.0, show_default=True),
        click.option("--assoc-distance-weight", type=float, default=1.0, show_default=True),
        click.option("--assoc-size-weight", type=float, default=0.5, show_default=True),
        click.option("--assoc-cost-cutoff", type=float, default=1.5, show_default=True),
        click.option("--max-waiting-frames", type=int, default=100, show_default=True,
                     help="idle frames before a waiting track is retired"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(kwargs: dict) -> TrackerConfig:
    return TrackerConfig(
        conf_high=kwargs.pop("conf_high"),
        conf_low=kwargs.pop("conf_low"),
        iou_thresh=kwargs.pop("iou_thresh"),
        ncc_thresh=kwargs.pop("ncc_thresh"),
        search_margin=kwargs.pop("search_margin"),
        max_substitutions=kwargs.pop("max_substitutions"),
        template_mode=kwargs.pop("template_mode"),
        assoc_iou_weight=kwargs.pop("assoc_iou_weight"),
        assoc_distance_weight=kwargs.pop("assoc_distance_weight"),
        assoc_size_weight=kwargs.pop("assoc_size_weight"),
        assoc_cost_cutoff=kwargs.pop("assoc_cost_cutoff"),
        max_waiting_frames=kwargs.pop("max_waiting_frames"),
    )


@click.group()
def main():
    """Detection stabilization toolkit: tracking, simulation, dataset tools."""


@main.command()
@click.option("--frames", "frames_dir", type=click.Path(exists=True, file_okay=False),
              help="directory of PGM frames, consumed in lexicographic order")
@click.option("--video-list", type=click.Path(exists=True, dir_okay=False),
              help="text file listing frame paths, one per line")
@click.option("--detections", "detections_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="detections JSONL")
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False),
              help="MOT-style CSV destination")
@_config_options
@_guard
def track(frames_dir, video_list, detections_path, output_path, **kwargs):
    """Stabilize a detection stream over a frame sequence."""
    cfg = _build_config(kwargs)
    if (frames_dir is None) == (video_list is None):
        raise ConfigError("exactly one of --frames or --video-list must be given")
    if frames_dir is not None:
        frame_paths = sorted(p for p in Path(frames_dir).iterdir() if p.suffix == ".pgm")
    else:
        lines = Path(video_list).read_text().splitlines()
        frame_paths = [Path(line.strip()) for line in lines if line.strip()]

    per_frame = read_detections_jsonl(detections_path)
    highest = max(per_frame, default=-1)
    if highest >= len(frame_paths):
        raise FormatError(
            f"detections reference frame {highest} but only {len(frame_paths)} frames are provided",
            str(detections_path),
        )

    inputs = (
        FrameInput(frame_index=i, frame=load_pgm(p), detections=tuple(per_frame.get(i, ())))
        for i, p in enumerate(frame_paths)
    )
    outputs = run_stream(inputs, cfg)
    write_mot_csv(output_path, outputs)


@main.command()
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="scenario JSON")
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@_guard
def simulate(scenario_path, output_dir):
    """Render a scenario to frames/, detections.jsonl and truth.jsonl."""
    sc = sim.scenario_from_json(Path(scenario_path).read_text(), str(scenario_path))
    frames, boxes, detections = sim.simulate(sc)
    out = Path(output_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        save_pgm(frames_dir / f"frame_{i:06d}.pgm", frame)
    write_detections_jsonl(out / "detections.jsonl", dict(enumerate(detections)))
    write_truth_jsonl(out / "truth.jsonl", dict(enumerate(boxes)))


@main.command()
@click.option("--truth", "truth_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="truth JSONL")
@click.option("--detections", "detections_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="raw detections JSONL")
@click.option("--tracker-csv", required=True,
              type=click.Path(exists=True, dir_okay=False), help="tracker output CSV")
@click.option("--conf-high", type=float, default=0.6, show_default=True,
              help="baseline validity threshold")
@_guard
def score(truth_path, detections_path, tracker_csv, conf_high):
    """Compare tracker output against scripted truth; print metrics JSON."""
    truth = read_truth_jsonl(truth_path)
    detections = read_detections_jsonl(detections_path)
    rows = read_mot_csv(tracker_csv)
    outputs = [(frame_index, box) for frame_index, _track, box, _conf in rows]
    metrics = sim.score(outputs, truth, detections, conf_high)
    click.echo(json.dumps(metrics, indent=2))


def _voc_groups(annotations_dir: str) -> list[list]:
    """Parse every .xml under the directory tree, in sorted order."""
    files = sorted(Path(annotations_dir).rglob("*.xml"))

    def parse_one(path: Path):
        try:
            return parse_voc(path.read_text(), str(path))
        except OSError as exc:
            raise FormatError(f"cannot read file: {exc}", str(path)) from None
        except FormatError:
            raise
        except ValueError as exc:
            raise FormatError(str(exc)) from None

    workers = _thread_count()  # validate the env var even for an empty corpus
    if not files:
        return []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(parse_one, files))


@main.command()
@click.option("--annotations", "annotations_dir", required=True,
              type=click.Path(exists=True, file_okay=False), help="VOC XML directory tree")
@click.option("--output", "output_path", type=click.Path(dir_okay=False), default=None,
              help="write the stats JSON here instead of stdout")
@_guard
def stats(annotations_dir, output_path):
    """Corpus statistics: image/object counts, histogram, area extremes."""
    groups = _voc_groups(annotations_dir)
    text = json.dumps(corpus_stats(groups).as_dict(), indent=2) + "\n"
    if output_path is None:
        click.echo(text, nl=False)
    else:
        Path(output_path).write_text(text)


@main.command()
@click.option("--annotations", "annotations_dir", required=True,
              type=click.Path(exists=True, file_okay=False), help="VOC XML directory tree")
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False),
              help="16-bit PGM destination")
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False), default=None,
              help="plain-text summary destination [default: <output>.txt]")
@click.option("--include-difficult/--exclude-difficult", default=True, show_default=True)
@_guard
def heatmap(annotations_dir, output_path, summary_path, include_difficult):
    """Annotation coverage heatmap on the 1280x1280 reference canvas."""
    groups = _voc_groups(annotations_dir)
    records = [rec for group in groups for rec in group]
    if not include_difficult:
        records = [rec for rec in records if not rec.difficult]
    hm = accumulate_heatmap(records)
    save_pgm16(output_path, hm.counts)
    covered = int((hm.counts > 0).sum())
    summary = (
        f"annotations: {len(records)}\n"
        f"covered_cells: {covered}\n"
        f"max_count: {int(hm.counts.max())}\n"
        f"total_coverage: {int(hm.counts.sum())}\n"
    )
    target = Path(summary_path) if summary_path else Path(str(output_path) + ".txt")
    target.write_text(summary)


@main.command()
@click.option("--annotations", "annotations_dir", required=True,
              type=click.Path(exists=True, file_okay=False), help="VOC XML directory tree")
@click.option("--output-dir", required=True, type=click.Path(file_okay=False),
              help="destination for normalized .txt label files (tree is mirrored)")
@_guard
def convert(annotations_dir, output_dir):
    """Convert VOC XML annotations to normalized text labels."""
    root = Path(annotations_dir)
    out_root = Path(output_dir)
    files = sorted(root.rglob("*.xml"))
    groups = _voc_groups(annotations_dir)
    for path, records in zip(files, groups):
        lines = [voc_to_text(rec) for rec in records]
        target = out_root / path.relative_to(root).with_suffix(".txt")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("".join(line + "\n" for line in lines))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@_guard
def serve(host, port):
    """Run the HTTP tracking service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
