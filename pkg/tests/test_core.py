import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vql import core


def rng(seed=0):
    return np.random.default_rng(seed)


class TestConv2d:
    def test_identity_kernel(self):
        x = rng().uniform(-1, 1, size=(4, 5, 3))
        k = np.zeros((1, 1, 3, 3))
        k[0, 0] = np.eye(3)
        np.testing.assert_allclose(core.conv2d(x, k), x, rtol=0, atol=0)

    def test_constant_field_tap_count(self):
        out = core.conv2d(np.ones((4, 4, 1)), np.ones((3, 3, 1, 1)))[:, :, 0]
        assert out[1, 1] == 9
        assert out[2, 2] == 9
        for corner in ((0, 0), (0, 3), (3, 0), (3, 3)):
            assert out[corner] == 4

    def test_matches_naive_loop(self):
        from vql.selfcheck import conv2d_naive

        x = rng(1).uniform(-1, 1, size=(5, 5, 2))
        k = rng(2).uniform(-1, 1, size=(3, 3, 2, 3))
        got = core.conv2d(x, k)
        want = conv2d_naive(x, k)
        np.testing.assert_allclose(got, want, rtol=1e-12)

    def test_linearity(self):
        r = rng(3)
        a = r.uniform(-1, 1, size=(6, 6, 2))
        b = r.uniform(-1, 1, size=(6, 6, 2))
        k = r.uniform(-1, 1, size=(3, 3, 2, 2))
        lhs = core.conv2d(2.5 * a - 1.25 * b, k)
        rhs = 2.5 * core.conv2d(a, k) - 1.25 * core.conv2d(b, k)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(core.DimensionError):
            core.conv2d(np.ones((4, 4, 2)), np.ones((3, 3, 3, 1)))

    def test_even_kernel_rejected(self):
        with pytest.raises(core.ParameterError):
            core.conv2d(np.ones((4, 4, 2)), np.ones((2, 2, 2, 1)))


class TestConv2dTranspose:
    def test_identity_kernel(self):
        x = rng(4).uniform(-1, 1, size=(4, 4, 2))
        k = np.zeros((1, 1, 2, 2))
        k[0, 0] = np.eye(2)
        np.testing.assert_allclose(core.conv2d_transpose(x, k), x)

    def test_zero_input(self):
        k = rng(5).uniform(-1, 1, size=(3, 3, 2, 4))
        out = core.conv2d_transpose(np.zeros((5, 5, 4)), k)
        assert not out.any()

    @pytest.mark.parametrize("seed", range(5))
    def test_adjoint_identity(self, seed):
        r = rng(seed)
        c_in, c_out, ksz = int(r.integers(1, 4)), int(r.integers(1, 4)), int(r.choice([1, 3, 5]))
        a = r.uniform(-1, 1, size=(6, 7, c_in))
        b = r.uniform(-1, 1, size=(6, 7, c_out))
        k = r.uniform(-1, 1, size=(ksz, ksz, c_in, c_out))
        lhs = float(np.sum(core.conv2d(a, k) * b))
        rhs = float(np.sum(a * core.conv2d_transpose(b, k)))
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs), 1.0)

    def test_channel_mismatch(self):
        with pytest.raises(core.DimensionError):
            core.conv2d_transpose(np.ones((4, 4, 2)), np.ones((3, 3, 2, 3)))


class TestKernelGradient:
    def test_zero_residual(self):
        x = rng(6).uniform(-1, 1, size=(4, 4, 2))
        g = core.kernel_gradient(x, np.zeros((4, 4, 3)), (3, 3, 2, 3))
        assert not g.any()

    def test_1x1_reduces_to_outer_product_sum(self):
        r = rng(7)
        x = r.uniform(-1, 1, size=(4, 4, 2))
        residual = r.uniform(-1, 1, size=(4, 4, 3))
        g = core.kernel_gradient(x, residual, (1, 1, 2, 3))
        want = np.einsum("ijc,ijd->cd", x, residual)
        np.testing.assert_allclose(g[0, 0], want, rtol=1e-12)

    def test_matches_finite_differences(self):
        from vql.selfcheck import fd_gradient

        r = rng(8)
        x = r.uniform(-1, 1, size=(5, 5, 2))
        y = r.uniform(-1, 1, size=(5, 5, 2))
        k = r.uniform(-1, 1, size=(3, 3, 2, 2))
        residual = core.conv2d(x, k) - y
        got = core.kernel_gradient(x, residual, k.shape)
        want = fd_gradient(lambda kk: 0.5 * float(np.sum((core.conv2d(x, kk) - y) ** 2)), k)
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-8)

    def test_shape_mismatch(self):
        with pytest.raises(core.DimensionError):
            core.kernel_gradient(np.ones((4, 4, 2)), np.ones((5, 4, 3)), (3, 3, 2, 3))


class TestGaussianLabel:
    def test_peak_on_pixel(self):
        g = core.gaussian_label((2, 2), 0.7, (5, 5))
        assert g[2, 2] == 1.0
        assert g.max() == 1.0

    def test_large_sigma_limit(self):
        g = core.gaussian_label((2, 2), 1e6, (5, 5))
        assert np.all(g > 0.999999)

    def test_unit_distance_value(self):
        g = core.gaussian_label((2, 2), 1.0, (5, 5))
        assert g[2, 3] == pytest.approx(np.exp(-0.5))

    def test_bad_sigma(self):
        with pytest.raises(core.ParameterError):
            core.gaussian_label((0, 0), 0.0, (3, 3))


class TestConnectedComponents:
    def test_empty_mask(self):
        assert core.connected_components(np.zeros((4, 4))) == []

    def test_diagonal_pixels_are_two_components(self):
        mask = np.zeros((3, 3))
        mask[0, 0] = mask[1, 1] = 1
        assert len(core.connected_components(mask)) == 2

    def test_partition_properties(self):
        mask = (rng(9).random((16, 16)) > 0.6).astype(np.uint8)
        comps = core.connected_components(mask)
        union = set()
        for comp in comps:
            assert not (union & comp), "components overlap"
            union |= comp
        assert union == {(r, c) for r, c in zip(*np.nonzero(mask))}


class TestMinBoundingRect:
    def test_single_pixel(self):
        assert core.min_bounding_rect([(3, 5)]) == (5, 3, 5, 3)

    def test_two_pixels(self):
        assert core.min_bounding_rect([(0, 0), (2, 4)]) == (0, 0, 4, 2)

    def test_empty_raises(self):
        with pytest.raises(core.EmptyInputError):
            core.min_bounding_rect([])


class TestMedianFilter:
    def test_constant_sequence(self):
        np.testing.assert_array_equal(core.median_filter_1d([2.0] * 7, 5), [2.0] * 7)

    def test_spike_removed(self):
        np.testing.assert_array_equal(core.median_filter_1d([0, 0, 9, 0, 0], 5), np.zeros(5))

    def test_even_window_rejected(self):
        with pytest.raises(core.ParameterError):
            core.median_filter_1d([1.0, 2.0], 4)

    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=30),
        st.sampled_from([1, 3, 5, 7]),
    )
    @settings(max_examples=50, deadline=None)
    def test_matches_sort_oracle(self, seq, window):
        got = core.median_filter_1d(seq, window)
        for i in range(len(seq)):
            lo, hi = max(0, i - window // 2), min(len(seq), i + window // 2 + 1)
            assert got[i] == pytest.approx(float(np.median(sorted(seq[lo:hi]))))


class TestCropResize:
    def test_interior_crop_has_no_padding(self):
        data = rng(10).uniform(size=(20, 20, 2))
        crop, frac = core.extract_square_crop(data, (10, 10), 8)
        assert frac == 0.0
        assert crop.shape == (8, 8, 2)

    def test_corner_crop_padding_fraction(self):
        data = np.ones((10, 10))
        crop, frac = core.extract_square_crop(data, (0, 0), 9)
        # window rows/cols -4..4 overlap 5x5 of 81 cells
        assert frac == pytest.approx(1 - 25 / 81)
        assert crop[0, 0] == 0.0

    def test_same_size_bilinear_is_identity(self):
        data = rng(11).uniform(size=(12, 12, 3))
        np.testing.assert_allclose(core.bilinear_resize(data, (12, 12)), data, atol=1e-12)

    def test_nearest_keeps_binary(self):
        mask = (rng(12).random((9, 9)) > 0.5).astype(np.uint8)
        out = core.nearest_resize(mask, (16, 16))
        assert set(np.unique(out)) <= {0, 1}
