import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vql import fusion
from vql.core import DimensionError


def rng(seed=0):
    return np.random.default_rng(seed)


class TestEncodeScore:
    def test_negative_scores_rectified(self):
        out = fusion.encode_score(np.full((3, 3), -2.0), fusion.ScoreEncoder())
        assert not out.any()
        assert out.shape == (3, 3, 3)

    def test_passthrough_for_positive(self):
        score = rng(1).uniform(0, 1, size=(4, 4))
        out = fusion.encode_score(score, fusion.ScoreEncoder())
        for c in range(3):
            np.testing.assert_array_equal(out[:, :, c], score)

    def test_gain(self):
        out = fusion.encode_score(np.full((2, 2), 0.3), fusion.ScoreEncoder(gain=2.0))
        np.testing.assert_allclose(out, 0.6)


class TestFuse:
    def test_zero_is_identity(self):
        a = rng(2).uniform(-1, 1, size=(3, 4, 2))
        np.testing.assert_array_equal(fusion.fuse(a, np.zeros_like(a)), a)

    def test_commutative_bits(self):
        r = rng(3)
        a, b = r.uniform(-1, 1, (4, 4, 3)), r.uniform(-1, 1, (4, 4, 3))
        assert np.array_equal(fusion.fuse(a, b), fusion.fuse(b, a))

    def test_dimension_error(self):
        with pytest.raises(DimensionError):
            fusion.fuse(np.zeros((3, 3, 2)), np.zeros((3, 3, 3)))


class TestDecode:
    def test_zero_gives_half(self):
        np.testing.assert_allclose(fusion.decode(np.zeros((3, 3, 4))), 0.5)

    def test_monotone_bounded(self):
        big = fusion.decode(np.full((2, 2, 1), 20.0))
        assert np.all(big > 0.999999) and np.all(big < 1.0)
        small = fusion.decode(np.full((2, 2, 1), -20.0))
        assert np.all(small < 1e-6) and np.all(small > 0.0)

    def test_channel_mean(self):
        fused = rng(4).uniform(-2, 2, size=(3, 3, 5))
        got = fusion.decode(fused)
        want = 1 / (1 + np.exp(-fused.mean(axis=2)))
        np.testing.assert_allclose(got, want, rtol=1e-15)


class TestExtractResult:
    def test_all_below_threshold(self):
        res = fusion.extract_result(np.full((4, 4), 0.4), 3)
        assert res.bbox is None and res.s_conf == 0.0 and not res.mask.any()
        assert res.frame_index == 3

    def test_single_block(self):
        prob = np.full((6, 6), 0.1)
        prob[2:4, 3:5] = 0.9
        res = fusion.extract_result(prob, 0)
        assert res.bbox == (3, 2, 4, 3)
        assert res.s_conf == pytest.approx(0.9)

    def test_largest_component_wins(self):
        prob = np.full((8, 8), 0.1)
        prob[1, 1:6] = 0.9
        prob[5, 1:4] = 0.9
        res = fusion.extract_result(prob, 0)
        assert res.bbox == (1, 1, 5, 1)

    def test_mask_consistent_with_prob(self):
        prob = rng(5).random((10, 10))
        res = fusion.extract_result(prob, 0)
        np.testing.assert_array_equal(res.mask, (prob >= 0.5).astype(np.uint8))
        if res.mask.any():
            assert res.bbox is not None
            assert res.s_conf == pytest.approx(float(prob[res.mask != 0].mean()))


class TestTemporalLocalize:
    def test_all_zero(self):
        assert fusion.temporal_localize([0.0] * 12) is None

    def test_surviving_plateau(self):
        seq = [0.0] * 20 + [1.0] * 3 + [0.0] * 20
        got = fusion.temporal_localize(seq)
        assert got is not None
        assert 20 <= got.start_frame <= got.end_frame <= 22

    def test_last_of_two_plateaus(self):
        seq = [0.0] * 10 + [1.0] * 11 + [0.0] * 19 + [1.0] * 11 + [0.0] * 5
        got = fusion.temporal_localize(seq)
        assert (got.start_frame, got.end_frame) == (40, 50)

    @given(st.floats(0.1, 50.0))
    @settings(max_examples=30, deadline=None)
    def test_scale_invariance(self, k):
        seq = np.abs(np.random.default_rng(6).normal(size=40)) + 0.01
        assert fusion.temporal_localize(seq) == fusion.temporal_localize(k * seq)

    def test_interval_ordering_enforced(self):
        with pytest.raises(ValueError):
            fusion.TemporalInterval(5, 3)
