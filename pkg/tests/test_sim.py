from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corrtrack.errors import InvalidConfigError
from corrtrack.sim import (FALSE_POSITIVE, ScenarioConfig, _prototypes, generate_scenario, run_and_score,
                           subsample, sweep_delta)
from corrtrack.tracker import TrackerConfig

CLEAN = dict(drop_prob=0.0, fp_rate=0.0, jitter_sigma=0.0, embed_noise_sigma=0.0)


def small(**kw):
    base = dict(num_agents=4, frames=12, embed_dim=16)
    base.update(kw)
    return ScenarioConfig(**base)


def flat(bundle):
    return ([(r.frame, r.id, r.box) for r in bundle.gt],
            [(f.frame_index, [(d.box, d.conf) for d in f.detections], f.embeddings.tobytes()) for f in bundle.frames],
            bundle.provenance)


class TestGenerate:
    @pytest.mark.parametrize("motion", ["linear", "crossing", "sinusoidal-dance"])
    def test_noise_free_equals_gt(self, motion):
        b = generate_scenario(small(motion=motion, **CLEAN))
        gt = {(r.frame, r.id): r.box for r in b.gt}
        for fr, prov in zip(b.frames, b.provenance):
            assert len(fr.detections) == 4
            for d, src in zip(fr.detections, prov):
                assert d.box == gt[(fr.frame_index, src)]

    @given(st.integers(0, 2**31), st.sampled_from(["linear", "crossing", "sinusoidal-dance"]))
    @settings(max_examples=15)
    def test_same_seed_same_bundle(self, seed, motion):
        cfg = small(seed=seed, motion=motion)
        assert flat(generate_scenario(cfg)) == flat(generate_scenario(cfg))

    def test_seed_changes_output(self):
        assert flat(generate_scenario(small(seed=1))) != flat(generate_scenario(small(seed=2)))

    def test_noise_knob_leaves_trajectories(self):
        a = generate_scenario(small(seed=3))
        b = generate_scenario(small(seed=3, jitter_sigma=9.0, fp_rate=2.0))
        assert [r.box for r in a.gt] == [r.box for r in b.gt]

    def test_gap_zero_gram(self):
        p = _prototypes(ScenarioConfig(num_agents=3, embed_dim=512, appearance_gap=0.0), np.random.default_rng(0))
        g = p @ p.T
        np.testing.assert_allclose(np.diag(g), 1.0, atol=1e-12)
        assert np.abs(g - np.diag(np.diag(g))).max() <= 1e-6

    @given(st.floats(0.0, 0.95), st.integers(2, 8))
    def test_gap_bound(self, gap, n):
        p = _prototypes(ScenarioConfig(num_agents=n, embed_dim=16, appearance_gap=gap), np.random.default_rng(1))
        g = p @ p.T
        off = g[~np.eye(n, dtype=bool)]
        assert off.max() <= gap + 1e-9

    def test_infeasible_gap(self):
        with pytest.raises(InvalidConfigError):
            generate_scenario(ScenarioConfig(num_agents=16, embed_dim=16, appearance_gap=0.3))

    @pytest.mark.parametrize("kw", [{"frames": 1}, {"drop_prob": 1.5}, {"appearance_gap": 1.0},
                                    {"motion": "teleport"}, {"conf_range": (0.9, 0.2)}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidConfigError):
            generate_scenario(small(**kw))

    def test_provenance_and_fp_conf(self):
        b = generate_scenario(small(fp_rate=3.0, seed=5))
        lo, hi = b.config.conf_range
        n_fp = 0
        gt = {(r.frame, r.id) for r in b.gt}
        for fr, prov in zip(b.frames, b.provenance):
            assert len(prov) == len(fr.detections)
            for d, src in zip(fr.detections, prov):
                if src == FALSE_POSITIVE:
                    n_fp += 1
                    assert lo <= d.conf <= (lo + hi) / 2
                else:
                    assert (fr.frame_index, src) in gt
        assert n_fp > 0

    def test_boxes_stay_in_arena(self):
        b = generate_scenario(small(motion="sinusoidal-dance", frames=80, **CLEAN))
        aw, ah = b.config.arena
        for r in b.gt:
            assert 0 <= r.box.x <= aw - r.box.w + 1e-6 and 0 <= r.box.y <= ah - r.box.h + 1e-6


class TestSubsample:
    def test_identity(self):
        b = generate_scenario(small())
        assert subsample(b, 1.0) is b

    def test_half(self):
        b = generate_scenario(small(frames=10))
        s = subsample(b, 0.5)
        assert [f.frame_index for f in s.frames] == [1, 2, 3, 4, 5]
        kept = [1, 3, 5, 7, 9]
        for new, old in enumerate(kept, start=1):
            assert s.frames[new - 1].detections == b.frames[old - 1].detections
            assert s.provenance[new - 1] == b.provenance[old - 1]
            assert [(r.id, r.box) for r in s.gt if r.frame == new] == \
                   [(r.id, r.box) for r in b.gt if r.frame == old]

    def test_third(self):
        s = subsample(generate_scenario(small(frames=10)), 0.33)
        assert len(s.frames) == 4

    def test_bad_ratio(self):
        with pytest.raises(InvalidConfigError):
            subsample(generate_scenario(small()), 0.0)


class TestScoring:
    @pytest.mark.parametrize("mode", ["product", "linear", "iou"])
    @pytest.mark.parametrize("motion", ["linear", "crossing"])
    def test_noise_free_perfect(self, mode, motion):
        b = generate_scenario(small(motion=motion, frames=40, conf_range=(0.7, 1.0), **CLEAN))
        r = run_and_score(b, TrackerConfig(fusion=mode))
        assert (r.mota, r.idf1) == (1.0, 1.0)

    def test_product_not_worse_on_crossing(self):
        b = generate_scenario(ScenarioConfig(motion="crossing", appearance_gap=0.3, jitter_sigma=6.0, seed=0))
        assert run_and_score(b, TrackerConfig()).idf1 >= run_and_score(b, TrackerConfig(fusion="iou")).idf1

    def test_sweep(self):
        b = generate_scenario(small(frames=20))
        rows = sweep_delta(b, TrackerConfig(), [0.1, 0.5, 0.9])
        assert [d for d, _ in rows] == [0.1, 0.5, 0.9]
        assert all(0 <= r.idf1 <= 1 for _, r in rows)
