import csv
import json

import numpy as np
import pytest

from tracklet.config import ConfigError, PipelineConfig, dump_config, parse_config
from tracklet.frame_io import Frame
from tracklet.pipeline import (
    PALETTE,
    YELLOW,
    FrameResult,
    Pipeline,
    PipelineError,
    annotate_frame,
    box_styles,
    emit_results,
    run_pipeline,
)
from tracklet.synthgen import SceneObject, SceneScript, render

GREEN, RED = (0, 255, 0), (255, 0, 0)


def rec(tid, bbox, state="Active", group=None, observed=True, centroid=(0.0, 0.0)):
    return {"id": tid, "state": state, "bbox": list(bbox), "centroid": list(centroid),
            "observed": observed, "group": group, "speed": None, "direction": None}


# --- config -----------------------------------------------------------------

def test_config_defaults_and_parse():
    cfg = parse_config("# comment\nlambda_px = 30   # gate\nbg_model = adaptive\nannotate = true\n")
    assert cfg.lambda_px == 30.0 and cfg.bg_model == "adaptive" and cfg.annotate is True
    assert cfg.alpha == 0.02 and cfg.warmup == 30


@pytest.mark.parametrize("text", ["nonsense = 1", "alpha = fast", "bg_model = kalman", "min_area"])
def test_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_dump_config_round_trip():
    text = dump_config(PipelineConfig())
    assert "init_mixprop = 1e-5\n" in text
    assert "deviation_sq_threshold = 49\n" in text
    assert "ms_epsilon = 0.1\n" in text
    assert parse_config(text) == PipelineConfig()


# --- annotation policy ------------------------------------------------------

def test_single_track_is_yellow():
    r = FrameResult(0, tracks=[rec(4, (1, 1, 5, 5))])
    assert box_styles(r) == [([1, 1, 5, 5], YELLOW, False)]


def test_two_tracks_green_then_red():
    r = FrameResult(0, tracks=[rec(7, (10, 1, 14, 5)), rec(3, (1, 1, 5, 5))])
    assert [(b[0][0], b[1]) for b in box_styles(r)] == [(1, GREEN), (10, RED)]


def test_merge_frame_single_yellow_box():
    r = FrameResult(0, tracks=[rec(1, (2, 2, 9, 9), "Occluded", 1), rec(2, (2, 2, 9, 9), "Occluded", 1)])
    assert box_styles(r) == [([2, 2, 9, 9], YELLOW, False)]


def test_palette_cycles_dashed():
    tracks = [rec(i, (i, 0, i, 0)) for i in range(1, 8)]
    styles = box_styles(FrameResult(0, tracks=tracks))
    assert [s[1] for s in styles] == PALETTE + PALETTE[:2]
    assert [s[2] for s in styles] == [False] * 5 + [True] * 2


def test_annotation_only_touches_strokes():
    rng = np.random.default_rng(0)
    f = Frame(rng.integers(0, 256, (20, 30, 3)).astype(np.uint8))
    out = annotate_frame(f, FrameResult(0, tracks=[rec(1, (3, 4, 12, 10))]))
    changed = np.any(out.data != f.data, axis=2)
    stroke = np.zeros((20, 30), bool)
    stroke[4, 3:13] = stroke[10, 3:13] = stroke[4:11, 3] = stroke[4:11, 12] = True
    assert not changed[~stroke].any()
    assert np.all(out.data[stroke] == YELLOW)


def test_annotation_of_gray_frame_is_rgb():
    f = Frame(np.full((8, 8), 50, np.uint8))
    out = annotate_frame(f, FrameResult(0, tracks=[rec(1, (0, 0, 7, 7))]))
    assert out.channels == 3 and out.data[0, 0].tolist() == list(YELLOW)
    assert out.data[3, 3].tolist() == [50, 50, 50]


# --- emit -------------------------------------------------------------------

def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_emit_empty_stream(tmp_path):
    assert emit_results([], tmp_path) == 0
    assert (tmp_path / "tracks.jsonl").read_text() == ""
    assert read_csv(tmp_path / "trajectories.csv") == [["track_id", "frame", "x", "y", "speed", "direction"]]


def test_emit_one_track_three_frames(tmp_path):
    results = [FrameResult(n, tracks=[rec(1, (0, 0, 1, 1), centroid=(n, 2.0))]) for n in range(3)]
    results.append(FrameResult(3, tracks=[rec(1, (0, 0, 1, 1), observed=False)]))
    emit_results(results, tmp_path)
    rows = read_csv(tmp_path / "trajectories.csv")[1:]
    assert [int(r[1]) for r in rows] == [0, 1, 2]
    lines = (tmp_path / "tracks.jsonl").read_text().splitlines()
    assert len(lines) == 4
    assert set(json.loads(lines[0])) >= {"frame", "tracks", "events"}


# --- end to end -------------------------------------------------------------

def scene(objects, frames=50, size=(48, 48)):
    return render(SceneScript(size[0], size[1], frames, (30, 30, 30), objects=objects))


def test_empty_scene_has_no_tracks():
    frames, _ = scene([])
    results = list(run_pipeline(PipelineConfig(), frames))
    assert len(results) == 50
    for r in results:
        assert r.tracks == []
        assert all(v == [] for v in r.events.values())


def test_warmup_frames_flagged():
    obj = SceneObject(1, "rectangle", (8, 8), (220, 40, 40), [(0, (2, 10)), (49, (40, 10))])
    frames, _ = scene([obj])
    results = list(run_pipeline(PipelineConfig(), frames))
    assert all(r.warmup and not r.tracks for r in results[:30])
    assert not any(r.warmup for r in results[30:])
    # the revealed start position has been absorbed by the end of the default warmup
    assert {t["id"] for r in results[30:] for t in r.tracks} == {1}


def test_short_warmup_leaves_ghost():
    obj = SceneObject(1, "rectangle", (8, 8), (220, 40, 40), [(0, (2, 10)), (49, (40, 10))])
    frames, _ = scene([obj])
    results = list(run_pipeline(PipelineConfig(warmup=5), frames))
    assert {t["id"] for r in results for t in r.tracks} == {1, 2}


@pytest.mark.parametrize("model", ["gmm", "adaptive"])
def test_object_over_clean_background(model):
    obj = SceneObject(1, "rectangle", (8, 8), (220, 40, 40), [(0, (2, 20)), (49, (38, 20))])
    frames, truth = scene([obj])
    empty, _ = scene([], frames=1)
    seq = empty + [Frame(f.data, f.index + 1) for f in frames]
    results = list(run_pipeline(PipelineConfig(bg_model=model, warmup=1), seq))
    assert {t["id"] for r in results for t in r.tracks} == {1}
    last = results[-1].tracks[0]
    assert abs(last["centroid"][1] - truth[-1][0].centroid[1]) < 1.0


def test_frame_errors_carry_index():
    frames = [Frame(np.zeros((8, 8, 3), np.uint8), 0), Frame(np.zeros((9, 8, 3), np.uint8), 1)]
    with pytest.raises(PipelineError) as err:
        list(run_pipeline(PipelineConfig(), frames))
    assert err.value.frame_index == 1


def test_pipeline_annotates_when_asked():
    frames, _ = scene([], frames=2)
    p = Pipeline(PipelineConfig(annotate=True))
    assert p.process(frames[0]).annotated == frames[0]
