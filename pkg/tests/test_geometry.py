import numpy as np
import pytest
from hypothesis import given, strategies as st

from corrtrack.errors import InvalidInputError
from corrtrack.geometry import BBox, ScoredBox, fuse_score, iou, iou_matrix, nms
from oracles import box_iou

coord = st.floats(-500, 500, allow_nan=False)
side = st.floats(0.5, 300, allow_nan=False)
boxes = st.builds(BBox, coord, coord, side, side)


def sb(x, y, w, h, conf):
    return ScoredBox(BBox(x, y, w, h), conf)


class TestIoU:
    def test_identity(self):
        b = BBox(3.3, -1.7, 12.1, 40.9)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 10, 10), BBox(100, 100, 10, 10)) == 0.0

    def test_half_shift(self):
        # intersection 50, union 150
        assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)) == pytest.approx(1 / 3, abs=1e-15)

    def test_touching_edges_is_zero(self):
        assert iou(BBox(0, 0, 10, 10), BBox(10, 0, 10, 10)) == 0.0

    @given(boxes, boxes)
    def test_symmetric(self, a, b):
        assert iou(a, b) == iou(b, a)

    @given(boxes)
    def test_self_is_one(self, a):
        assert iou(a, a) == 1.0

    @given(boxes, boxes)
    def test_matches_reference(self, a, b):
        ref = box_iou((a.x, a.y, a.w, a.h), (b.x, b.y, b.w, b.h))
        assert iou(a, b) == pytest.approx(ref, abs=1e-12)
        assert 0.0 <= iou(a, b) <= 1.0

    def test_matrix_shapes(self):
        assert iou_matrix(np.zeros((0, 4)), np.ones((3, 4))).shape == (0, 3)
        m = iou_matrix([[0, 0, 10, 10]], [[0, 0, 10, 10], [5, 0, 10, 10]])
        np.testing.assert_allclose(m, [[1.0, 1 / 3]])

    @pytest.mark.parametrize("bad", [(0, 0, 0, 5), (0, 0, 5, -1), (np.nan, 0, 1, 1), (0, np.inf, 1, 1)])
    def test_invalid_box(self, bad):
        with pytest.raises(InvalidInputError):
            BBox(*bad)


class TestFuseScore:
    @pytest.mark.parametrize("conf,probs,want", [(1.0, [1.0], 1.0), (0.8, [0.3, 0.5], 0.4), (0.0, [0.9], 0.0)])
    def test_examples(self, conf, probs, want):
        assert fuse_score(conf, probs) == pytest.approx(want, abs=1e-15)

    def test_rejects(self):
        with pytest.raises(InvalidInputError):
            fuse_score(0.5, [])
        with pytest.raises(InvalidInputError):
            fuse_score(1.2, [0.5])
        with pytest.raises(InvalidInputError):
            fuse_score(0.5, [0.5, -0.1])

    def test_scored_box_fused(self):
        assert sb(0, 0, 1, 1, 0.5).fused == 0.5
        assert ScoredBox(BBox(0, 0, 1, 1), 0.8, (0.3, 0.5)).fused == pytest.approx(0.4)


class TestNMS:
    def test_single(self):
        assert nms([sb(0, 0, 10, 10, 0.3)], 0.5) == [0]

    def test_identical_pair(self):
        assert nms([sb(0, 0, 10, 10, 0.8), sb(0, 0, 10, 10, 0.9)], 0.5) == [1]

    def test_third_overlap(self):
        cands = [sb(0, 0, 10, 10, 0.9), sb(100, 100, 10, 10, 0.8), sb(5, 0, 10, 10, 0.7)]
        pair = [[box_iou((c.box.x, c.box.y, c.box.w, c.box.h), (d.box.x, d.box.y, d.box.w, d.box.h))
                 for d in cands] for c in cands]
        assert pair[0][2] == pytest.approx(1 / 3)
        assert nms(cands, 0.3) == [0, 1]

    def test_empty_and_bad_threshold(self):
        assert nms([], 0.5) == []
        with pytest.raises(InvalidInputError):
            nms([sb(0, 0, 1, 1, 0.5)], 0.0)

    @given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(1, 40), st.floats(1, 40),
                              st.floats(0, 1)), max_size=12),
           st.floats(0.05, 1.0))
    def test_post_hoc(self, raw, thr):
        cands = [sb(*r) for r in raw]
        kept = nms(cands, thr)
        assert len(set(kept)) == len(kept)
        assert set(kept) <= set(range(len(cands)))
        for i in kept:
            for j in kept:
                if i < j:
                    assert iou(cands[i].box, cands[j].box) <= thr
        for s in set(range(len(cands))) - set(kept):
            assert any(cands[k].fused >= cands[s].fused and iou(cands[k].box, cands[s].box) > thr
                       for k in kept)
