"""End-to-end driver: background -> morphology -> regions -> association.

Also renders annotated frames and writes ``tracks.jsonl`` /
``trajectories.csv``.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import meanshift
from .association import (
    InsufficientHistory,
    TrackSet,
    TrackState,
    build_graph,
    resolve,
    speed_and_direction,
)
from .background import AdaptiveModel, MixtureModel
from .config import PipelineConfig
from .frame_io import Frame, FrameError, IoFailure, SequenceManifest, to_grayscale, to_rgb, write_frame
from .morphology import clean
from .regions import RegionFeatures, detect_regions, downsample_histogram

log = logging.getLogger(__name__)

YELLOW = (255, 255, 0)
# green and red as in the two-object demo, then a fixed cycle; later rounds are dashed
PALETTE = [(0, 255, 0), (255, 0, 0), (0, 0, 255), (255, 0, 255), (0, 255, 255)]


class InputError(Exception):
    pass


class PipelineError(Exception):
    def __init__(self, frame_index: int, cause: Exception):
        super().__init__(f"frame {frame_index}: {cause}")
        self.frame_index = frame_index
        self.cause = cause


@dataclass
class FrameResult:
    frame: int
    warmup: bool = False
    tracks: list = field(default_factory=list)
    events: dict = field(default_factory=lambda: {"births": [], "deaths": [], "merges": [], "splits": []})
    annotated: Frame | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"frame": self.frame, "warmup": self.warmup, "tracks": self.tracks, "events": self.events}


class Pipeline:
    """Stateful per-frame processor; feed frames strictly in order."""

    def __init__(self, config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self.tracks = TrackSet(self.config.max_missed)
        self.bg = None
        self.seen = 0

    def _foreground(self, frame: Frame) -> np.ndarray:
        cfg = self.config
        if cfg.bg_model == "adaptive":
            gray = frame if frame.channels == 1 else to_grayscale(frame)
            if self.bg is None:
                self.bg = AdaptiveModel.from_frame(gray, alpha_bg=cfg.alpha_bg, t_floor=cfg.t_floor, t_gain=cfg.t_gain)
                return np.zeros(gray.data.shape, dtype=bool)
            return self.bg.apply(gray)
        if self.bg is None:
            self.bg = MixtureModel(frame.height, frame.width, frame.channels, cfg.gmm_params())
        return self.bg.apply(frame)

    def _appearance(self, det: RegionFeatures) -> RegionFeatures:
        cfg = self.config
        if not cfg.hist_downsample_bins:
            return det
        return RegionFeatures(
            det.label, det.bbox, det.area, det.centroid,
            downsample_histogram(det.hist_upper, cfg.hist_downsample_bins, cfg.hist_downsample),
            downsample_histogram(det.hist_lower, cfg.hist_downsample_bins, cfg.hist_downsample),
        )

    def process(self, frame: Frame) -> FrameResult:
        cfg = self.config
        mask = clean(self._foreground(frame), cfg.morph_radius)
        self.seen += 1
        if self.seen <= cfg.warmup:
            result = FrameResult(frame.index, warmup=True)
        else:
            dets = [self._appearance(d) for d in detect_regions(mask, frame, cfg.min_area, cfg.bins_per_channel)]
            graph = build_graph(self.tracks.centroids(), dets, cfg.lambda_px)
            report = resolve(graph, self.tracks, dets, frame.index)
            if cfg.refine == "meanshift":
                self._refine(frame, report.births)
            result = FrameResult(frame.index)
            result.events = {
                "births": report.births,
                "deaths": report.deaths,
                "merges": report.merges,
                "splits": report.splits,
            }
            result.tracks = [self._record(t, frame.index) for t in self.tracks]
        if cfg.annotate:
            result.annotated = annotate_frame(frame, result)
        return result

    def _refine(self, frame: Frame, births) -> None:
        cfg = self.config
        rgb = frame
        for t in self.tracks:
            if t.state is not TrackState.ACTIVE or t.last_seen != frame.index:
                continue
            try:
                if t.model is None or t.id in births:
                    bb = t.bbox
                    t.model = meanshift.build_target_model(
                        rgb, t.position, max(1.0, bb.width / 2), max(1.0, bb.height / 2), cfg.bins_per_channel)
                    continue
                start = t.trajectory[-2][1] if len(t.trajectory) > 1 else t.position
                res = meanshift.track(rgb, t.model, start, cfg.ms_epsilon, cfg.ms_max_iter)
                geometry = meanshift.estimate_geometry(rgb, t.model, res.position)
                t.model = meanshift.reseed(t.model, res.position, geometry, cfg.ms_gamma)
            except (meanshift.ZeroWeightField, meanshift.EmptyWindow) as exc:
                log.debug("track %d: mean-shift skipped (%s)", t.id, exc)
                continue
            t.position = res.position
            t.trajectory[-1] = (frame.index, res.position)

    def _record(self, track, frame_index: int) -> dict:
        try:
            speed, direction = speed_and_direction(track, self.config.speed_window)
        except InsufficientHistory:
            speed = direction = None
        return {
            "id": track.id,
            "state": track.state.value,
            "bbox": track.bbox.as_list(),
            "centroid": list(track.position),
            "observed": track.last_seen == frame_index,
            "group": track.group,
            "speed": speed,
            "direction": direction,
        }


def open_input(config: PipelineConfig) -> SequenceManifest:
    if not config.input:
        raise InputError("no input directory configured")
    try:
        return SequenceManifest(config.input, config.input_pattern, config.input_first,
                                config.input_count, config.input_channels)
    except (FrameError, TypeError) as exc:
        raise InputError(str(exc)) from exc


def run_pipeline(config: PipelineConfig, frames: Iterable[Frame] | None = None) -> Iterator[FrameResult]:
    """Yield one FrameResult per input frame, in order."""
    if frames is None:
        frames = open_input(config)
    pipe = Pipeline(config)
    it = iter(frames)
    index = 0
    while True:
        try:
            frame = next(it)
        except StopIteration:
            return
        except FrameError as exc:
            raise InputError(f"frame {index}: {exc}") from exc
        try:
            result = pipe.process(frame)
        except Exception as exc:
            raise PipelineError(frame.index, exc) from exc
        index += 1
        yield result


def box_styles(result: FrameResult) -> list[tuple[list[int], tuple, bool]]:
    """(bbox, colour, dashed) for every box the annotation draws."""
    active = sorted((t for t in result.tracks if t["state"] == TrackState.ACTIVE.value), key=lambda t: t["id"])
    boxes = []
    if len(active) == 1:
        boxes.append((active[0]["bbox"], YELLOW, False))
    else:
        for k, t in enumerate(active):
            boxes.append((t["bbox"], PALETTE[k % len(PALETTE)], k >= len(PALETTE)))
    groups = {}
    for t in result.tracks:
        if t["state"] == TrackState.OCCLUDED.value:
            groups.setdefault(t["group"], t["bbox"])
    for gid in sorted(groups):
        boxes.append((groups[gid], YELLOW, False))
    return boxes


def annotate_frame(frame: Frame, result: FrameResult) -> Frame:
    img = to_rgb(frame).data.copy()
    h, w = img.shape[:2]
    for (x0, y0, x1, y1), color, dashed in box_styles(result):
        x0, x1 = max(0, x0), min(w - 1, x1)
        y0, y1 = max(0, y0), min(h - 1, y1)
        perimeter = (
            [(x, y0) for x in range(x0, x1 + 1)]
            + [(x1, y) for y in range(y0 + 1, y1 + 1)]
            + [(x, y1) for x in range(x1 - 1, x0 - 1, -1)]
            + [(x0, y) for y in range(y1 - 1, y0, -1)]
        )
        for k, (x, y) in enumerate(dict.fromkeys(perimeter)):
            if dashed and (k // 2) % 2:
                continue
            img[y, x] = color
    return Frame(img, frame.index)


def emit_results(results: Iterable[FrameResult], out_dir) -> int:
    """Write tracks.jsonl, trajectories.csv and any annotated frames; return frame count."""
    out = Path(out_dir)
    count = 0
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "tracks.jsonl", "w") as jf, open(out / "trajectories.csv", "w", newline="") as cf:
            writer = csv.writer(cf, lineterminator="\n")
            writer.writerow(["track_id", "frame", "x", "y", "speed", "direction"])
            for res in results:
                jf.write(json.dumps(res.to_json()) + "\n")
                for t in res.tracks:
                    if not t["observed"] or t["state"] != TrackState.ACTIVE.value:
                        continue
                    writer.writerow([
                        t["id"], res.frame, repr(t["centroid"][0]), repr(t["centroid"][1]),
                        "" if t["speed"] is None else repr(t["speed"]),
                        "" if t["direction"] is None else repr(t["direction"]),
                    ])
                if res.annotated is not None:
                    write_frame(res.annotated, out / f"ann_{res.frame:06d}.ppm")
                count += 1
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return count
