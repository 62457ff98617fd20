import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trackfuse.model import (
    ACTIVE,
    WAITING,
    BoundingBox,
    Detection,
    FrameBuffer,
    TrackEntry,
    TrackerConfig,
    TrackerState,
)
from trackfuse.tracker import (
    FrameInput,
    TrackOutput,
    associate,
    classify,
    pair_cost,
    run_stream,
    step,
)

W, H = 160, 120


def make_background(seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 256, size=(H, W), dtype=np.uint8)


def make_object(seed: int, h: int = 10, w: int = 10) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 256, size=(h, w), dtype=np.uint8)


def paint(background: np.ndarray, obj: np.ndarray, x: int, y: int) -> FrameBuffer:
    canvas = background.copy()
    canvas[y : y + obj.shape[0], x : x + obj.shape[1]] = obj
    return FrameBuffer.from_array(canvas)


def det(x, y, w, h, conf) -> Detection:
    return Detection(box=BoundingBox(x, y, w, h), confidence=conf)


BG = make_background(100)
OBJ = make_object(101)


class TestClassify:
    def test_boundaries_inclusive_low(self):
        cfg = TrackerConfig(conf_high=0.6, conf_low=0.25)
        d_hi = det(0, 0, 5, 5, 0.6)
        d_mid = det(0, 0, 5, 5, 0.25)
        d_lo = det(0, 0, 5, 5, 0.2499)
        valid, provisional, discarded = classify([d_hi, d_mid, d_lo], cfg)
        assert valid == [d_hi]
        assert provisional == [d_mid]
        assert discarded == [d_lo]

    def test_order_preserved(self):
        cfg = TrackerConfig()
        ds = [det(i, 0, 5, 5, c) for i, c in enumerate([0.9, 0.3, 0.7, 0.4, 0.1])]
        valid, provisional, discarded = classify(ds, cfg)
        assert valid == [ds[0], ds[2]]
        assert provisional == [ds[1], ds[3]]
        assert discarded == [ds[4]]

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=40))
    def test_is_a_partition(self, confs):
        cfg = TrackerConfig()
        ds = [det(1, 1, 3, 3, c) for c in confs]
        valid, provisional, discarded = classify(ds, cfg)
        assert len(valid) + len(provisional) + len(discarded) == len(ds)
        for d in valid:
            assert d.confidence >= cfg.conf_high
        for d in provisional:
            assert cfg.conf_low <= d.confidence < cfg.conf_high
        for d in discarded:
            assert d.confidence < cfg.conf_low


class TestAssociate:
    def track(self, tid, x, y, w=10, h=10):
        return TrackEntry(id=tid, last_box=BoundingBox(x, y, w, h), last_confidence=0.9, template=None)

    def test_identical_box_costs_zero(self):
        cfg = TrackerConfig()
        b = BoundingBox(10, 10, 20, 20)
        assert pair_cost(b, b, 200.0, cfg) == 0.0

    def test_exact_matches_pair_up(self):
        cfg = TrackerConfig()
        tracks = [self.track(1, 0, 0), self.track(2, 60, 0)]
        cands = [det(60, 0, 10, 10, 0.9), det(0, 0, 10, 10, 0.9)]
        assert associate(tracks, cands, W, H, cfg) == {1: 1, 2: 0}

    def test_cutoff_blocks_far_pairs(self):
        cfg = TrackerConfig()
        tracks = [self.track(1, 0, 0)]
        cands = [det(140, 100, 10, 10, 0.9)]
        # disjoint (1.0) plus a long normalized distance pushes past the cutoff
        assert associate(tracks, cands, W, H, cfg) == {}

    def test_one_to_one(self):
        cfg = TrackerConfig()
        tracks = [self.track(1, 0, 0), self.track(2, 4, 0)]
        cands = [det(0, 0, 10, 10, 0.9)]
        matched = associate(tracks, cands, W, H, cfg)
        assert matched == {1: 0}

    def test_tie_resolves_by_track_order(self):
        cfg = TrackerConfig()
        tracks = [self.track(7, 20, 20), self.track(3, 20, 20)]
        cands = [det(20, 20, 10, 10, 0.9)]
        # equal costs; the earlier entry in the track list wins
        assert associate(tracks, cands, W, H, cfg) == {7: 0}

    def test_greedy_takes_cheapest_pair_first(self):
        cfg = TrackerConfig()
        tracks = [self.track(1, 0, 0), self.track(2, 30, 0)]
        cands = [det(30, 0, 10, 10, 0.9), det(14, 0, 10, 10, 0.9)]
        # candidate 0 is an exact copy of track 2; track 1 must settle for candidate 1
        assert associate(tracks, cands, W, H, cfg) == {2: 0, 1: 1}


class TestSeeding:
    def test_first_frame_seeds_from_valid_only(self):
        state = TrackerState()
        frame = paint(BG, OBJ, 50, 50)
        dets = (det(50, 50, 10, 10, 0.9), det(100, 20, 8, 8, 0.3), det(10, 10, 4, 4, 0.1))
        state, out = step(state, FrameInput(0, frame, dets), TrackerConfig())
        assert len(out) == 1
        assert out[0] == TrackOutput(0, 1, BoundingBox(50, 50, 10, 10), 0.9, "detected")
        assert len(state.tracks) == 1
        assert state.tracks[0].status == ACTIVE
        assert state.tracks[0].template is not None
        assert np.array_equal(state.tracks[0].template.pixels, OBJ)
        assert state.last_frame_index == 0

    def test_provisional_only_never_seeds(self):
        state = TrackerState()
        frame = paint(BG, OBJ, 50, 50)
        state, out = step(state, FrameInput(0, frame, (det(50, 50, 10, 10, 0.4),)), TrackerConfig())
        assert out == [] and state.tracks == []

    def test_track_ids_are_sequential(self):
        state = TrackerState()
        frame = FrameBuffer.from_array(BG)
        dets = (det(0, 0, 10, 10, 0.9), det(100, 80, 10, 10, 0.8))
        state, out = step(state, FrameInput(0, frame, dets), TrackerConfig())
        assert [o.track_id for o in out] == [1, 2]
        assert state.next_track_id == 3

    def test_unmatched_valid_seeds_alongside_existing_track(self):
        state = TrackerState()
        frame = paint(BG, OBJ, 50, 50)
        state, _ = step(state, FrameInput(0, frame, (det(50, 50, 10, 10, 0.9),)), TrackerConfig())
        dets = (det(50, 50, 10, 10, 0.9), det(120, 90, 10, 10, 0.85))
        state, out = step(state, FrameInput(1, frame, dets), TrackerConfig())
        assert [(o.track_id, o.provenance) for o in out] == [(1, "detected"), (2, "detected")]
        assert len(state.tracks) == 2


class TestFrameIndexOrdering:
    def test_repeat_index_rejected(self):
        state = TrackerState()
        frame = FrameBuffer.from_array(BG)
        state, _ = step(state, FrameInput(3, frame, ()), TrackerConfig())
        with pytest.raises(ValueError):
            step(state, FrameInput(3, frame, ()), TrackerConfig())
        with pytest.raises(ValueError):
            step(state, FrameInput(1, frame, ()), TrackerConfig())

    def test_gaps_allowed(self):
        state = TrackerState()
        frame = FrameBuffer.from_array(BG)
        state, _ = step(state, FrameInput(0, frame, ()), TrackerConfig())
        state, _ = step(state, FrameInput(5, frame, ()), TrackerConfig())
        assert state.last_frame_index == 5


class TestValidContinuation:
    def test_valid_match_updates_track(self):
        cfg = TrackerConfig()
        state = TrackerState()
        f0 = paint(BG, OBJ, 50, 50)
        state, _ = step(state, FrameInput(0, f0, (det(50, 50, 10, 10, 0.9),)), cfg)
        f1 = paint(BG, OBJ, 52, 50)
        state, out = step(state, FrameInput(1, f1, (det(52, 50, 10, 10, 0.95),)), cfg)
        assert out == [TrackOutput(1, 1, BoundingBox(52, 50, 10, 10), 0.95, "detected")]
        t = state.tracks[0]
        assert t.last_confidence == 0.95
        assert t.substitution_count == 0
        assert np.array_equal(t.template.pixels, OBJ)


class TestSubstitution:
    def seeded(self, cfg, conf=0.9):
        state = TrackerState()
        f0 = paint(BG, OBJ, 50, 50)
        state, _ = step(state, FrameInput(0, f0, (det(50, 50, 10, 10, conf),)), cfg)
        return state

    def test_overlapping_provisional_accepted_with_stored_confidence(self):
        cfg = TrackerConfig()
        state = self.seeded(cfg)
        f1 = paint(BG, OBJ, 50, 50)
        state, out = step(state, FrameInput(1, f1, (det(50, 50, 10, 10, 0.4),)), cfg)
        assert out == [TrackOutput(1, 1, BoundingBox(50, 50, 10, 10), 0.9, "substituted_iou")]
        assert state.tracks[0].substitution_count == 1
        assert state.tracks[0].status == ACTIVE

    def test_prediction_follows_moving_object(self):
        cfg = TrackerConfig()
        state = self.seeded(cfg)
        x = 50
        for fi in range(1, 5):
            x += 2
            frame = paint(BG, OBJ, x, 50)
            state, out = step(state, FrameInput(fi, frame, (det(x, 50, 10, 10, 0.4),)), cfg)
            assert len(out) == 1
            assert out[0].provenance == "substituted_iou"
            assert out[0].box == BoundingBox(x, 50, 10, 10)
            assert out[0].confidence == 0.9

    def test_disjoint_provisional_replaced_by_predicted_box(self):
        cfg = TrackerConfig()
        state = self.seeded(cfg)
        f1 = paint(BG, OBJ, 50, 50)
        # association cost 1.0 + 30/200 = 1.15 <= 1.5, but zero overlap with the prediction
        state, out = step(state, FrameInput(1, f1, (det(50, 80, 10, 10, 0.4),)), cfg)
        assert out == [TrackOutput(1, 1, BoundingBox(50, 50, 10, 10), 0.9, "substituted_ncc")]

    def test_substitution_cap(self):
        cfg = TrackerConfig(max_substitutions=2)
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        counts = []
        for fi in range(1, 4):
            state, out = step(state, FrameInput(fi, frame, (det(50, 50, 10, 10, 0.4),)), cfg)
            counts.append(len(out))
        assert counts == [1, 1, 0]
        assert state.tracks[0].status == WAITING

    def test_cap_zero_disables_substitution(self):
        cfg = TrackerConfig(max_substitutions=0)
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        state, out = step(state, FrameInput(1, frame, (det(50, 50, 10, 10, 0.4),)), cfg)
        assert out == []
        assert state.tracks[0].status == WAITING

    def test_valid_detection_resets_cap(self):
        cfg = TrackerConfig(max_substitutions=1)
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        state, out1 = step(state, FrameInput(1, frame, (det(50, 50, 10, 10, 0.4),)), cfg)
        state, out2 = step(state, FrameInput(2, frame, (det(50, 50, 10, 10, 0.9),)), cfg)
        state, out3 = step(state, FrameInput(3, frame, (det(50, 50, 10, 10, 0.4),)), cfg)
        assert [o.provenance for o in out1 + out2 + out3] == [
            "substituted_iou",
            "detected",
            "substituted_iou",
        ]
        assert state.tracks[0].substitution_count == 1

    def test_rolling_template_refreshes_frozen_does_not(self):
        obj_v1 = OBJ.copy()
        obj_v1[0, 0] ^= 0xFF
        for mode, want in (("rolling", obj_v1), ("frozen", OBJ)):
            cfg = TrackerConfig(template_mode=mode)
            state = self.seeded(cfg)
            f1 = paint(BG, obj_v1, 50, 50)
            state, out = step(state, FrameInput(1, f1, (det(50, 50, 10, 10, 0.4),)), cfg)
            assert out[0].provenance == "substituted_iou"
            assert np.array_equal(state.tracks[0].template.pixels, want)


class TestWaitingAndRetirement:
    def seeded(self, cfg):
        state = TrackerState()
        f0 = paint(BG, OBJ, 50, 50)
        state, _ = step(state, FrameInput(0, f0, (det(50, 50, 10, 10, 0.9),)), cfg)
        return state

    def test_no_detections_means_waiting(self):
        cfg = TrackerConfig()
        state = self.seeded(cfg)
        state, out = step(state, FrameInput(1, paint(BG, OBJ, 50, 50), ()), cfg)
        assert out == []
        t = state.tracks[0]
        assert t.status == WAITING and t.waiting_frames == 1

    def test_discarded_only_behaves_like_empty(self):
        cfg = TrackerConfig()
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        state, out = step(state, FrameInput(1, frame, (det(50, 50, 10, 10, 0.05),)), cfg)
        assert out == []
        assert state.tracks[0].status == WAITING

    def test_provisional_does_not_revive_waiting_track(self):
        cfg = TrackerConfig()
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        state, _ = step(state, FrameInput(1, frame, ()), cfg)
        state, out = step(state, FrameInput(2, frame, (det(50, 50, 10, 10, 0.4),)), cfg)
        assert out == []
        t = state.tracks[0]
        assert t.status == WAITING and t.waiting_frames == 2

    def test_valid_revives_waiting_track(self):
        cfg = TrackerConfig()
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        state, _ = step(state, FrameInput(1, frame, ()), cfg)
        state, out = step(state, FrameInput(2, frame, (det(50, 50, 10, 10, 0.8),)), cfg)
        assert out == [TrackOutput(2, 1, BoundingBox(50, 50, 10, 10), 0.8, "detected")]
        t = state.tracks[0]
        assert t.status == ACTIVE and t.waiting_frames == 0

    def test_retired_after_max_waiting_frames(self):
        cfg = TrackerConfig(max_waiting_frames=3)
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        for fi in (1, 2):
            state, _ = step(state, FrameInput(fi, frame, ()), cfg)
            assert len(state.tracks) == 1
        state, _ = step(state, FrameInput(3, frame, ()), cfg)
        assert state.tracks == []

    def test_retired_track_id_is_not_reused(self):
        cfg = TrackerConfig(max_waiting_frames=1)
        state = self.seeded(cfg)
        frame = paint(BG, OBJ, 50, 50)
        state, _ = step(state, FrameInput(1, frame, ()), cfg)
        assert state.tracks == []
        state, out = step(state, FrameInput(2, frame, (det(50, 50, 10, 10, 0.9),)), cfg)
        assert out[0].track_id == 2


class TestBoundsHandling:
    def test_partial_overhang_clamped(self, caplog):
        state = TrackerState()
        frame = FrameBuffer.from_array(BG)
        with caplog.at_level(logging.WARNING, logger="trackfuse.tracker"):
            state, out = step(state, FrameInput(0, frame, (det(-4, -2, 10, 10, 0.9),)), TrackerConfig())
        assert out[0].box == BoundingBox(0, 0, 6, 8)
        assert "clipped" in caplog.text

    def test_fully_outside_dropped(self, caplog):
        state = TrackerState()
        frame = FrameBuffer.from_array(BG)
        with caplog.at_level(logging.WARNING, logger="trackfuse.tracker"):
            state, out = step(state, FrameInput(0, frame, (det(500, 500, 10, 10, 0.9),)), TrackerConfig())
        assert out == [] and state.tracks == []
        assert "dropped" in caplog.text


class TestDegenerateTemplate:
    def test_subpixel_box_survives_without_predicting(self):
        cfg = TrackerConfig()
        state = TrackerState()
        frame = FrameBuffer.from_array(BG)
        state, out = step(state, FrameInput(0, frame, (det(5.0, 5.0, 0.3, 4, 0.9),)), cfg)
        assert len(out) == 1
        assert state.tracks[0].template is None
        state, out = step(state, FrameInput(1, frame, (det(5.0, 5.0, 0.3, 4, 0.4),)), cfg)
        assert out == []
        assert state.tracks[0].status == WAITING


class TestRunStream:
    def make_inputs(self):
        inputs = []
        x = 50
        for fi in range(6):
            conf = 0.4 if fi in (2, 4) else 0.9
            inputs.append(FrameInput(fi, paint(BG, OBJ, x, 50), (det(x, 50, 10, 10, conf),)))
            x += 1
        return inputs

    def test_equals_manual_fold(self):
        cfg = TrackerConfig()
        inputs = self.make_inputs()
        state = TrackerState()
        manual = []
        for fr in inputs:
            state, out = step(state, fr, cfg)
            manual.extend(out)
        assert run_stream(self.make_inputs(), cfg) == manual
        assert len(manual) == 6

    def test_default_config(self):
        assert run_stream(self.make_inputs()) == run_stream(self.make_inputs(), TrackerConfig())

    def test_every_valid_detection_is_emitted(self):
        rng = np.random.default_rng(202)
        cfg = TrackerConfig()
        inputs = []
        all_confs = set()
        valid_boxes = []
        for fi in range(30):
            frame = FrameBuffer.from_array(rng.integers(0, 256, size=(48, 64), dtype=np.uint8))
            dets = []
            for j in range(int(rng.integers(0, 4))):
                x = float(rng.integers(0, 50))
                y = float(rng.integers(0, 34))
                w = float(rng.integers(4, 14))
                h = float(rng.integers(4, 14))
                conf = round(float(rng.uniform(0.0, 1.0)), 6)
                d = det(x, y, min(w, 64 - x), min(h, 48 - y), conf)
                dets.append(d)
                all_confs.add(conf)
                if conf >= cfg.conf_high:
                    valid_boxes.append((fi, d.box))
            inputs.append(FrameInput(fi, frame, tuple(dets)))
        outputs = run_stream(inputs, cfg)
        emitted = [(o.frame_index, o.box) for o in outputs if o.provenance == "detected"]
        for item in valid_boxes:
            assert item in emitted
        for o in outputs:
            assert o.confidence in all_confs

    def test_outputs_sorted_by_frame_then_existing_tracks_first(self):
        outputs = run_stream(self.make_inputs())
        indices = [o.frame_index for o in outputs]
        assert indices == sorted(indices)


class TestInputValidation:
    def test_negative_frame_index(self):
        with pytest.raises(ValueError):
            FrameInput(-1, FrameBuffer.from_array(BG), ())

    def test_detections_coerced_to_tuple(self):
        fr = FrameInput(0, FrameBuffer.from_array(BG), [det(0, 0, 5, 5, 0.5)])
        assert isinstance(fr.detections, tuple)

    def test_unknown_provenance_rejected(self):
        with pytest.raises(ValueError):
            TrackOutput(0, 1, BoundingBox(0, 0, 5, 5), 0.5, "guessed")
