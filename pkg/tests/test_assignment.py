import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from corrtrack.assignment import linear_assignment
from corrtrack.errors import InvalidInputError
from oracles import brute_assignment

shapes = st.tuples(st.integers(1, 6), st.integers(1, 6))
entries = st.one_of(st.floats(-5, 5), st.just(math.inf))
int_entries = st.one_of(st.integers(0, 3).map(float), st.just(math.inf))


def lex_oracle(cost):
    """Among optimal matchings, the smallest per-row column vector, unmatched last."""
    n, m = cost.shape
    size, total = brute_assignment(cost)
    best = None
    for perm in set(itertools.permutations(list(range(m)) + [None] * n, n)):
        if any(c is not None and not math.isfinite(cost[r, c]) for r, c in enumerate(perm)):
            continue
        pairs = [(r, c) for r, c in enumerate(perm) if c is not None]
        if len(pairs) != size or sum(cost[r, c] for r, c in pairs) != total:
            continue
        key = tuple(m if c is None else c for c in perm)
        best = key if best is None or key < best else best
    return [(r, c) for r, c in enumerate(best) if c < m]


class TestExamples:
    def test_single(self):
        res = linear_assignment([[0.2]], max_cost=0.9)
        assert res.matches == [(0, 0)]

    def test_two_by_two(self):
        res = linear_assignment([[1, 2], [2, 1]])
        assert sorted(res.matches) == [(0, 0), (1, 1)] and res.total_cost == 2

    def test_gated_out(self):
        res = linear_assignment([[0.95]], max_cost=0.9)
        assert res.matches == [] and res.unmatched_tracks == [0] and res.unmatched_detections == [0]

    def test_empty(self):
        for shape in [(0, 0), (0, 3), (4, 0)]:
            res = linear_assignment(np.zeros(shape))
            assert res.matches == []
            assert res.unmatched_tracks == list(range(shape[0]))
            assert res.unmatched_detections == list(range(shape[1]))

    def test_cardinality_before_cost(self):
        # taking the cheap (0,0) would leave row 1 unmatched
        res = linear_assignment([[0.0, 10.0], [math.inf, 10.0]])
        assert sorted(res.matches) == [(0, 0), (1, 1)]
        res = linear_assignment([[0.0, 1.0], [0.0, math.inf]])
        assert sorted(res.matches) == [(0, 1), (1, 0)]

    def test_rejects(self):
        with pytest.raises(InvalidInputError):
            linear_assignment([1.0, 2.0])
        with pytest.raises(InvalidInputError):
            linear_assignment([[np.nan]])
        with pytest.raises(InvalidInputError):
            linear_assignment([[-np.inf]])


class TestOracle:
    @given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=entries)))
    def test_against_brute_force(self, cost):
        res = linear_assignment(cost)
        size, total = brute_assignment(cost)
        assert len(res.matches) == size
        assert res.total_cost == pytest.approx(total, abs=1e-9)

    @given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=int_entries)))
    def test_ties_break_lexicographically(self, cost):
        assert linear_assignment(cost).matches == lex_oracle(cost)

    @given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=st.floats(0, 1))), st.floats(0, 1))
    def test_max_cost_is_a_gate(self, cost, gate):
        res = linear_assignment(cost, max_cost=gate)
        gated = np.where(cost <= gate, cost, np.inf)
        assert (len(res.matches), res.total_cost) == pytest.approx(brute_assignment(gated))
        assert all(cost[r, c] <= gate for r, c in res.matches)

    @given(shapes.flatmap(lambda s: arrays(np.float64, s, elements=entries)))
    def test_partition(self, cost):
        res = linear_assignment(cost)
        rows = [r for r, _ in res.matches] + res.unmatched_tracks
        cols = [c for _, c in res.matches] + res.unmatched_detections
        assert sorted(rows) == list(range(cost.shape[0]))
        assert sorted(cols) == list(range(cost.shape[1]))

    def test_block_structure(self):
        # several disconnected blocks plus single edges solve as one problem
        rng = np.random.default_rng(9)
        cost = np.full((12, 12), np.inf)
        for lo in (0, 4, 8):
            cost[lo:lo + 3, lo:lo + 3] = rng.uniform(0, 1, (3, 3))
            cost[lo + 3, lo + 3] = 0.5
        res = linear_assignment(cost)
        assert len(res.matches) == 12
        blocks = sum(brute_assignment(cost[lo:lo + 3, lo:lo + 3])[1] for lo in (0, 4, 8))
        assert res.total_cost == pytest.approx(blocks + 1.5, abs=1e-12)
