import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradrep.selector import (
    build_repository,
    laplacian_response,
    normalize_scores,
    sample_selection_mask,
    selection_scores,
)
from gradrep.seeding import stream_rng

from oracles import sliding_window_laplacian


class TestLaplacianResponse:
    def test_constant_map_scores_zero(self):
        for c, h, w in [(1, 3, 3), (4, 5, 7), (2, 1, 1)]:
            const = np.full((c, h, w), 3.25, dtype=np.float32)
            np.testing.assert_allclose(laplacian_response(const), 0.0, atol=1e-9)

    def test_center_impulse_hand_values(self):
        # single channel, 3x3, impulse at center, replicate padding:
        # center response 8, every neighbor |-1| = 1
        f = np.zeros((1, 3, 3), dtype=np.float32)
        f[0, 1, 1] = 1.0
        expected = np.array([[1.0, 1.0, 1.0], [1.0, 8.0, 1.0], [1.0, 1.0, 1.0]])
        np.testing.assert_allclose(laplacian_response(f), expected, atol=1e-12)

    def test_doubled_channels_double_response(self):
        f = np.zeros((1, 3, 3), dtype=np.float32)
        f[0, 1, 1] = 1.0
        doubled = np.concatenate([f, f], axis=0)
        np.testing.assert_allclose(
            laplacian_response(doubled), 2.0 * laplacian_response(f), atol=1e-12
        )

    @settings(max_examples=50, deadline=None)
    @given(
        c=st.integers(1, 8), h=st.integers(1, 16), w=st.integers(1, 16),
        seed=st.integers(0, 2**31),
    )
    def test_matches_sliding_window_oracle(self, c, h, w, seed):
        f = np.random.default_rng(seed).standard_normal((c, h, w)).astype(np.float32)
        np.testing.assert_allclose(
            laplacian_response(f), sliding_window_laplacian(f), atol=1e-6
        )


class TestNormalizeScores:
    def test_hand_example(self):
        raw = np.array([[0.0, 8.0], [4.0, 8.0]])
        np.testing.assert_allclose(
            normalize_scores(raw), [[0.0, 1.0], [0.5, 1.0]]
        )

    def test_constant_map_becomes_zero(self):
        np.testing.assert_array_equal(
            normalize_scores(np.full((3, 3), 7.0)), np.zeros((3, 3))
        )

    def test_unit_range_map_unchanged(self):
        raw = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_array_equal(normalize_scores(raw), raw)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31), h=st.integers(1, 12), w=st.integers(1, 12))
    def test_output_always_in_unit_interval(self, seed, h, w):
        raw = np.random.default_rng(seed).uniform(0, 1e6, size=(h, w))
        out = normalize_scores(raw)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestSelectionMask:
    def test_all_ones_selects_everything(self):
        mask = sample_selection_mask(np.ones((5, 5)), np.random.default_rng(0))
        assert mask.all()

    def test_all_zeros_selects_nothing(self):
        mask = sample_selection_mask(np.zeros((5, 5)), np.random.default_rng(0))
        assert not mask.any()

    def test_half_probability_fraction(self):
        scores = np.full((100, 100), 0.5)
        fractions = [
            sample_selection_mask(scores, np.random.default_rng(seed)).mean()
            for seed in range(10)
        ]
        assert all(0.47 <= f <= 0.53 for f in fractions)

    def test_deterministic_for_fixed_stream(self):
        scores = np.random.default_rng(1).uniform(size=(20, 20))
        m1 = sample_selection_mask(scores, stream_rng(7, "selection", 3))
        m2 = sample_selection_mask(scores, stream_rng(7, "selection", 3))
        np.testing.assert_array_equal(m1, m2)

    def test_empirical_frequency_tracks_probability(self):
        # binomial concentration at three probability levels
        n_trials = 10_000
        for p in (0.1, 0.5, 0.9):
            scores = np.full((4, 4), p)
            hits = np.zeros((4, 4))
            for seed in range(n_trials):
                hits += sample_selection_mask(scores, np.random.default_rng(seed))
            freq = hits / n_trials
            bound = 3.0 * np.sqrt(p * (1 - p) / n_trials)
            assert np.abs(freq - p).max() <= bound


class TestBuildRepository:
    @staticmethod
    def textured(rng, c=3, h=8, w=8):
        return rng.standard_normal((c, h, w)).astype(np.float32)

    def test_rows_match_masked_positions(self):
        rng = np.random.default_rng(0)
        samples = [("s0", self.textured(rng)), ("s1", self.textured(rng))]
        repo = build_repository(samples, master_seed=11)
        by_id = dict(samples)
        assert len(repo) == len(repo.provenance) >= 1
        for row, (sid, r, c) in zip(repo.rows, repo.provenance):
            np.testing.assert_array_equal(row, by_id[sid][:, r, c])

    def test_union_cardinality_is_sum_of_masks(self):
        rng = np.random.default_rng(5)
        samples = [("a", self.textured(rng)), ("b", self.textured(rng))]
        expected = 0
        for idx, (_, f) in enumerate(samples):
            scores = selection_scores(f, "gradient")
            mask = sample_selection_mask(scores, stream_rng(11, "selection", idx))
            expected += int(mask.sum())
        repo = build_repository(samples, master_seed=11)
        assert len(repo) == expected

    def test_constant_features_trigger_fallback(self):
        const = np.full((2, 10, 10), 1.5, dtype=np.float32)
        samples = [("a", const.copy()), ("b", const.copy()), ("c", const.copy())]
        repo = build_repository(samples, master_seed=0)
        # ceil(0.01 * 100) = 1 position per image, first in row-major order
        assert len(repo) == 3
        assert [(sid, r, c) for sid, r, c in repo.provenance] == [
            ("a", 0, 0), ("b", 0, 0), ("c", 0, 0)
        ]

    def test_certain_position_always_selected(self):
        # one position has normalized score exactly 1.0, so S > U(0,1) always holds
        f = np.zeros((1, 6, 6), dtype=np.float32)
        f[0, 3, 3] = 10.0
        for seed in range(100):
            repo = build_repository([("x", f)], master_seed=seed)
            assert ("x", 3, 3) in repo.provenance

    def test_no_samples_rejected(self):
        with pytest.raises(ValueError):
            build_repository([], master_seed=0)

    def test_channel_mismatch_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            build_repository(
                [("a", self.textured(rng, c=3)), ("b", self.textured(rng, c=4))],
                master_seed=0,
            )

    def test_mode_all_takes_every_position(self):
        rng = np.random.default_rng(2)
        f = self.textured(rng, c=2, h=4, w=5)
        repo = build_repository([("a", f)], master_seed=0, mode="all")
        assert len(repo) == 20

    def test_mode_random_uses_constant_probability(self):
        rng = np.random.default_rng(2)
        f = self.textured(rng, c=2, h=16, w=16)
        scores = selection_scores(f, "random")
        expected = normalize_scores(laplacian_response(f)).mean()
        np.testing.assert_allclose(scores, expected)
