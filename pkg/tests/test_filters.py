import numpy as np
import pytest

from radflavour.core import DomainError, FlavourAxis, Unit, Volume
from radflavour.filters import (
    SCALAR_KINDS,
    WAVELET_BANDS,
    apply_filter,
    apply_intensity_transform,
    apply_log,
    apply_wavelet_band,
    filter_flavour_grid,
)


class TestLog:
    def test_constant_maps_to_zero(self):
        v = Volume(np.full((8, 8, 6), 37.5))
        out = apply_log(v, 1.0)
        assert np.max(np.abs(out.data)) < 1e-10

    def test_linear_ramp_interior_zero(self):
        data = np.zeros((16, 9, 9))
        data += np.arange(16, dtype=float)[:, None, None] * 3.0
        out = apply_log(Volume(data), 1.0)
        # the kernel spans 4 voxels per side at sigma 1, so the center
        # of the volume only sees the affine field
        assert np.max(np.abs(out.data[6:10, 4, 4])) < 1e-9

    def test_centered_delta_reproduces_kernel(self):
        sigma = 1.0
        dims = (19, 19, 19)
        data = np.zeros(dims)
        data[9, 9, 9] = 1.0
        out = apply_log(Volume(data), sigma).data

        # independent evaluation of the sampled, DC-corrected kernel
        r = 4
        ax = np.arange(-r, r + 1, dtype=float)
        xx, yy, zz = np.meshgrid(ax, ax, ax, indexing="ij")
        r2 = xx ** 2 + yy ** 2 + zz ** 2
        gauss = np.exp(-r2 / (2 * sigma ** 2)) / (2 * np.pi * sigma ** 2) ** 1.5
        kern = (r2 - 3 * sigma ** 2) / sigma ** 4 * gauss
        kern -= kern.mean()

        block = out[9 - r:9 + r + 1, 9 - r:9 + r + 1, 9 - r:9 + r + 1]
        assert np.allclose(block, kern, atol=1e-12)
        assert abs(out[0, 9, 9]) < 1e-12  # outside the kernel support

    def test_kernel_is_zero_sum(self):
        # constant response is the visible consequence; check directly too
        v = Volume(np.ones((9, 9, 9)))
        assert abs(apply_log(v, 1.5).data.sum()) < 1e-8

    def test_sigma_validation(self):
        v = Volume(np.zeros((4, 4, 4)))
        with pytest.raises(DomainError):
            apply_log(v, 0.0)
        with pytest.raises(DomainError):
            apply_log(v, -1.0)

    def test_small_sigma_warns(self):
        v = Volume(np.zeros((4, 4, 4)), spacing=(2.0, 2.0, 2.0))
        with pytest.warns(UserWarning, match="badly resolved"):
            apply_log(v, 0.5)

    def test_spacing_aware(self, rng):
        # halving the spacing with a doubled grid must match on the
        # lattice only if sigma follows; differing spacing changes output
        data = rng.normal(size=(8, 8, 8))
        a = apply_log(Volume(data, spacing=(1, 1, 1)), 1.0)
        b = apply_log(Volume(data, spacing=(2, 2, 2)), 1.0)
        assert not np.allclose(a.data, b.data)


class TestWavelet:
    def test_lll_preserves_constant(self):
        v = Volume(np.full((4, 4, 4), 3.25))
        out = apply_wavelet_band(v, "LLL")
        assert np.allclose(out.data, 3.25)

    @pytest.mark.parametrize("band", [b for b in WAVELET_BANDS if "H" in b])
    def test_h_bands_kill_constant(self, band):
        v = Volume(np.full((4, 4, 4), 3.25))
        out = apply_wavelet_band(v, band)
        assert np.allclose(out.data, 0.0)

    def test_hand_difference_along_x(self):
        # x-profile [0, 2]: H on x gives (0-2)/2 = -1 at the first site
        # and 0 at the last (reflective boundary pairs it with itself)
        data = np.zeros((2, 3, 3))
        data[1] = 2.0
        out = apply_wavelet_band(Volume(data), "HLL")
        assert np.allclose(out.data[0], -1.0)
        assert np.allclose(out.data[1], 0.0)

    def test_output_dims_match_input(self, rng):
        v = Volume(rng.normal(size=(5, 4, 3)))
        for band in WAVELET_BANDS:
            assert apply_wavelet_band(v, band).dims == v.dims

    def test_l_plus_h_undoes_one_axis(self, rng):
        # (f[i]+f[i+1])/2 + (f[i]-f[i+1])/2 = f[i], so LLL + HLL equals
        # the volume low-passed along y and z only
        v = Volume(rng.normal(size=(6, 5, 4)))
        low = apply_wavelet_band(v, "LLL").data
        high = apply_wavelet_band(v, "HLL").data

        def lowpass(data, axis):
            ahead = np.concatenate(
                [np.take(data, range(1, data.shape[axis]), axis=axis),
                 np.take(data, [-1], axis=axis)], axis=axis)
            return 0.5 * (data + ahead)

        want = lowpass(lowpass(v.data, 1), 2)
        assert np.allclose(low + high, want)

    def test_short_axis_rejected(self):
        v = Volume(np.zeros((4, 4, 1)))
        with pytest.raises(DomainError):
            apply_wavelet_band(v, "LLL")

    def test_unknown_band_rejected(self):
        v = Volume(np.zeros((4, 4, 4)))
        with pytest.raises(DomainError):
            apply_wavelet_band(v, "LLX")


class TestIntensityTransforms:
    def test_sqrt(self):
        v = Volume(np.array([0.0, 1.0, 4.0]).reshape(3, 1, 1))
        out = apply_intensity_transform(v, "sqrt")
        assert np.allclose(out.data.ravel(), [0.0, 1.0, 2.0])

    def test_sqrt_is_odd(self):
        v = Volume(np.array([-4.0, -1.0, 9.0]).reshape(3, 1, 1))
        out = apply_intensity_transform(v, "sqrt")
        assert np.allclose(out.data.ravel(), [-2.0, -1.0, 3.0])

    def test_square_keeps_sign(self):
        v = Volume(np.array([-3.0, 2.0]).reshape(2, 1, 1))
        out = apply_intensity_transform(v, "square")
        assert np.allclose(out.data.ravel(), [-9.0, 4.0])

    def test_logarithm_fixed_point_zero(self):
        v = Volume(np.zeros((2, 2, 2)))
        out = apply_intensity_transform(v, "logarithm")
        assert np.allclose(out.data, 0.0)

    def test_logarithm_odd_symmetry(self):
        v = Volume(np.array([-1.5, 1.5]).reshape(2, 1, 1))
        out = apply_intensity_transform(v, "logarithm")
        assert out.data.ravel()[0] == -out.data.ravel()[1]
        assert out.data.ravel()[1] == pytest.approx(np.log1p(1.5))

    def test_exponential_normalizes_by_max(self):
        v = Volume(np.array([-10.0, 0.0, 10.0]).reshape(3, 1, 1))
        out = apply_intensity_transform(v, "exponential")
        assert np.allclose(out.data.ravel(),
                           [np.exp(-1.0), 1.0, np.exp(1.0)])

    def test_exponential_of_zero_volume(self):
        v = Volume(np.zeros((2, 2, 2)))
        out = apply_intensity_transform(v, "exponential")
        assert np.allclose(out.data, 1.0)

    def test_gradient_of_ramp(self):
        # slope 2 per mm along x with 0.5 mm spacing
        data = np.tile(np.arange(8, dtype=float)[:, None, None], (1, 5, 5))
        v = Volume(data, spacing=(0.5, 1.0, 1.0))
        out = apply_intensity_transform(v, "gradient")
        assert np.allclose(out.data, 2.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(DomainError):
            apply_intensity_transform(Volume(np.zeros((2, 2, 2))), "cubic")


class TestFilterGrid:
    def test_log_sweep(self):
        sigmas = [0.5 * k for k in range(1, 11)]
        keys = filter_flavour_grid(log_sigmas=sigmas)
        assert len(keys) == 10
        assert all(k.axis is FlavourAxis.FILTER for k in keys)
        assert keys[0].get("kind") == "log"
        assert keys[0].get("sigma_mm") == 0.5

    def test_all_bands(self):
        keys = filter_flavour_grid(wavelet_bands=WAVELET_BANDS)
        assert len(keys) == 8
        assert {k.get("band") for k in keys} == set(WAVELET_BANDS)

    def test_scalar_kinds(self):
        keys = filter_flavour_grid(scalar_kinds=SCALAR_KINDS)
        assert len(keys) == len(SCALAR_KINDS)

    def test_empty(self):
        assert filter_flavour_grid() == []

    def test_validation(self):
        with pytest.raises(DomainError):
            filter_flavour_grid(log_sigmas=(0.0,))
        with pytest.raises(DomainError):
            filter_flavour_grid(wavelet_bands=("XYZ",))
        with pytest.raises(DomainError):
            filter_flavour_grid(scalar_kinds=("median",))
        with pytest.raises(DomainError):
            filter_flavour_grid(log_sigmas=(1.0, 1.0))


class TestApplyFilter:
    def test_dispatch_matches_direct_calls(self, rng):
        v = Volume(rng.normal(size=(6, 6, 6)))
        keys = filter_flavour_grid(log_sigmas=(1.0,),
                                   wavelet_bands=("HHL",),
                                   scalar_kinds=("sqrt",))
        assert np.array_equal(apply_filter(v, keys[0]).data,
                              apply_log(v, 1.0).data)
        assert np.array_equal(apply_filter(v, keys[1]).data,
                              apply_wavelet_band(v, "HHL").data)
        assert np.array_equal(apply_filter(v, keys[2]).data,
                              apply_intensity_transform(v, "sqrt").data)

    def test_rejects_non_filter_key(self):
        from radflavour.core import FlavourKey
        v = Volume(np.zeros((2, 2, 2)))
        with pytest.raises(DomainError):
            apply_filter(v, FlavourKey.vanilla())

    def test_output_unit_is_arbitrary(self, rng):
        v = Volume(rng.normal(size=(6, 6, 6)), unit=Unit.HU)
        key = filter_flavour_grid(log_sigmas=(1.0,))[0]
        assert apply_filter(v, key).unit is Unit.ARBITRARY
