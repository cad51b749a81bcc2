import numpy as np
import pytest
from hypothesis import given, strategies as st

from corrtrack.assignment import linear_assignment
from corrtrack.errors import InvalidConfigError, InvalidInputError
from corrtrack.geometry import BBox
from corrtrack.tracker import FrameInput, Tracker, TrackerConfig, TrackStatus, fused_score, temp_score
from oracles import box_iou

E = np.eye(4)


def frame(i, boxes, confs=None, emb=None):
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    confs = np.full(len(boxes), 0.9) if confs is None else confs
    if emb is None:
        emb = np.tile(E[0], (len(boxes), 1))
    return FrameInput.from_arrays(i, boxes, confs, emb)


def crossing_frames():
    """A walks right, B walks left; at frame 3 each sits where the other was."""
    out = []
    for t, (xa, xb) in enumerate(zip([0, 20, 40, 60], [60, 40, 20, 0]), start=1):
        out.append(frame(t, [[xa, 0, 40, 80], [xb, 0, 40, 80]], emb=np.stack([E[0], E[1]])))
    return out


def identity_trace(config):
    tr = Tracker(config)
    traces = []
    for f in crossing_frames():
        outs = {o.box.x: o.id for o in tr.step(f)}
        xa = f.boxes[0, 0]
        xb = f.boxes[1, 0]
        traces.append((outs[xa], outs[xb]))
    return traces


class TestScores:
    def test_temp(self):
        assert temp_score([1, 0], [2, 0]) == pytest.approx(1.0)
        assert temp_score([1, 0], [-1, 0]) == 0.0
        assert temp_score([1, 0], [0, 1]) == 0.0

    def test_fusion(self):
        assert fused_score(0.5, 0.8, 0.9, "product") == pytest.approx(0.36)
        assert fused_score(0.7, 0.1, 0.2, "iou") == 0.7
        assert fused_score(0.7, 0.1, 0.2, "iou_only") == 0.7
        assert fused_score(0.6, 0.3, 0.2, "linear", 0.5) == pytest.approx(0.4)
        with pytest.raises(InvalidConfigError):
            fused_score(0.5, 0.5, 0.5, "sum")


class TestConfig:
    def test_defaults(self):
        c = TrackerConfig()
        assert (c.tau_high, c.tau_low, c.stage1_min_score, c.max_age) == (0.6, 0.1, 0.1, 30)
        assert c.new_track_min_conf == c.tau_high

    @pytest.mark.parametrize("kw", [{"fusion": "max"}, {"tau_low": 0.7}, {"gamma": 2.0}, {"max_age": -1},
                                    {"max_age": 1.5}, {"min_hits": 0}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfigError):
            TrackerConfig(**kw)


class TestStep:
    def test_empty(self):
        assert Tracker().step(FrameInput(1, [], None)) == []

    def test_birth(self):
        out = Tracker().step(frame(1, [[5, 6, 20, 40]]))
        assert len(out) == 1 and out[0].id == 1 and out[0].box == BBox(5, 6, 20, 40)

    def test_low_conf_no_birth(self):
        assert Tracker().step(frame(1, [[5, 6, 20, 40]], confs=np.array([0.3]))) == []

    def test_low_conf_keeps_track(self):
        tr = Tracker()
        tr.step(frame(1, [[0, 0, 20, 40]]))
        out = tr.step(frame(2, [[1, 0, 20, 40]], confs=np.array([0.3])))
        assert [o.id for o in out] == [1]
        assert tr.last_stage_matches == {1: 3}

    def test_frame_order(self):
        tr = Tracker()
        tr.step(frame(2, []))
        with pytest.raises(InvalidInputError):
            tr.step(frame(2, []))

    def test_embeddings_required(self):
        with pytest.raises(InvalidInputError):
            Tracker().step(FrameInput.from_arrays(1, [[0, 0, 5, 5]], [0.9]))
        Tracker(TrackerConfig(fusion="iou")).step(FrameInput.from_arrays(1, [[0, 0, 5, 5]], [0.9]))

    def test_lifecycle(self):
        tr = Tracker(TrackerConfig(max_age=2))
        tr.step(frame(1, [[0, 0, 20, 40]]))
        assert tr.step(frame(2, [])) == []
        assert tr.tracks[0].status is TrackStatus.LOST
        tr.step(frame(3, []))
        assert len(tr.tracks) == 1
        tr.step(frame(4, []))
        assert tr.tracks == [] and tr.removed_ids == {1}
        out = tr.step(frame(5, [[0, 0, 20, 40]]))
        assert [o.id for o in out] == [2]

    def test_min_hits(self):
        tr = Tracker(TrackerConfig(min_hits=3))
        box = [[0, 0, 20, 40]]
        assert tr.step(frame(1, box)) == [] and tr.step(frame(2, box)) == []
        assert [o.id for o in tr.step(frame(3, box))] == [1]
        tr.step(frame(4, []))
        assert len(tr.tracks) == 1   # confirmed tracks survive a miss
        tr2 = Tracker(TrackerConfig(min_hits=3))
        tr2.step(frame(1, box))
        tr2.step(frame(2, []))
        assert tr2.tracks == [] and tr2.removed_ids == {1}

    def test_lost_track_recovers(self):
        tr = Tracker()
        tr.step(frame(1, [[0, 0, 20, 40]]))
        tr.step(frame(2, []))
        assert [o.id for o in tr.step(frame(3, [[0, 0, 20, 40]]))] == [1]

    def test_linear_needs_overlap(self):
        tr = Tracker(TrackerConfig(fusion="linear", delta=0.9))
        tr.step(frame(1, [[0, 0, 20, 40]]))
        out = tr.step(frame(2, [[500, 0, 20, 40]]))
        assert [o.id for o in out] == [2]

    def test_crossing_product_keeps_ids(self):
        traces = identity_trace(TrackerConfig(use_kalman=False))
        assert all(t == traces[0] for t in traces)

    def test_crossing_iou_swaps(self):
        traces = identity_trace(TrackerConfig(use_kalman=False, fusion="iou"))
        assert traces[0] == traces[1]
        assert traces[2] == traces[0][::-1]


boxes_st = st.lists(st.tuples(st.floats(0, 200), st.floats(0, 200), st.floats(10, 60), st.floats(10, 60)),
                    max_size=6)
seq_st = st.lists(boxes_st, min_size=1, max_size=6)


def run(frames, config):
    tr = Tracker(config)
    return [[(o.id, o.box) for o in tr.step(f)] for f in frames]


class TestProperties:
    @given(seq_st)
    def test_byte_degeneracy(self, seq):
        frames = [frame(i + 1, b, confs=np.ones(len(b))) for i, b in enumerate(seq)]
        assert run(frames, TrackerConfig(fusion="product")) == run(frames, TrackerConfig(fusion="iou"))

    @given(seq_st, st.integers(0, 2**32 - 1))
    def test_ids_unique_and_removed_stay_gone(self, seq, seed):
        rng = np.random.default_rng(seed)
        tr = Tracker(TrackerConfig(max_age=1))
        gone = set()
        for i, b in enumerate(seq):
            f = frame(i + 1, b, confs=rng.uniform(0, 1, len(b)), emb=rng.standard_normal((len(b), 4)) + 0.1)
            ids = [o.id for o in tr.step(f)]
            assert len(ids) == len(set(ids))
            assert not gone & set(ids)
            gone |= tr.removed_ids

    @given(seq_st, st.integers(0, 2**32 - 1))
    def test_deterministic(self, seq, seed):
        def frames():
            rng = np.random.default_rng(seed)
            return [frame(i + 1, b, confs=rng.uniform(0, 1, len(b)), emb=rng.standard_normal((len(b), 4)) + 0.1)
                    for i, b in enumerate(seq)]
        assert run(frames(), TrackerConfig()) == run(frames(), TrackerConfig())

    @given(boxes_st, boxes_st, st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**32 - 1))
    def test_stage1_monotone(self, b1, b2, s1, s2, seed):
        lo, hi = sorted([s1, s2])
        rng = np.random.default_rng(seed)
        f1 = frame(1, b1, confs=np.ones(len(b1)), emb=rng.standard_normal((len(b1), 4)) + 0.1)
        f2 = frame(2, b2, confs=rng.uniform(0.6, 1, len(b2)), emb=rng.standard_normal((len(b2), 4)) + 0.1)
        counts = []
        for s in (lo, hi):
            tr = Tracker(TrackerConfig(stage1_min_score=s))
            tr.step(f1)
            tr.step(f2)
            counts.append(sum(1 for v in tr.last_stage_matches.values() if v == 1))
        assert counts[1] <= counts[0]

    @given(seq_st)
    def test_no_kalman_matches_last_box_iou(self, seq):
        # with all scores 1 only round 1 can match, against each track's last box
        tr = Tracker(TrackerConfig(use_kalman=False, fusion="iou"))
        for i, b in enumerate(seq):
            f = frame(i + 1, b, confs=np.ones(len(b)))
            ids = [t.id for t in tr.tracks]
            last = np.array([t.tlwh for t in tr.tracks]).reshape(-1, 4)
            score = np.array([[box_iou(t, d) for d in f.boxes] for t in last]).reshape(len(ids), len(f.boxes))
            want = linear_assignment(np.where(score >= 0.1, 1 - score, np.inf)).matches
            tr.step(f)
            assert tr.last_stage_matches == {ids[r]: 1 for r, _ in want}
            now = {t.id: t.tlwh for t in tr.tracks}
            for r, c in want:
                np.testing.assert_array_equal(now[ids[r]], f.boxes[c])
