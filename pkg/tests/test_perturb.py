import numpy as np
import pytest

from radflavour.core import (
    DomainError,
    FlavourAxis,
    FlavourKey,
    RoiMask,
    Volume,
)
from radflavour.perturb import (
    DegenerateRoiError,
    apply_perturbation,
    contour_randomize,
    perturbation_flavour_grid,
    volume_adapt,
)


def pixel_mask(dims=(7, 7, 1), at=(3, 3, 0)):
    m = np.zeros(dims, dtype=bool)
    m[at] = True
    return RoiMask(m)


def disc_mask(n=20, radius=6.0):
    x, y = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float),
                       indexing="ij")
    c = (n - 1) / 2.0
    return RoiMask((((x - c) ** 2 + (y - c) ** 2) <= radius ** 2)[:, :, None])


class TestVolumeAdapt:
    def test_dilate_pixel_to_plus_shape(self):
        out = volume_adapt(pixel_mask(), 1, min_roi_voxels=1)
        assert out.n_voxels == 5
        got = {tuple(ix) for ix in out.indices()}
        assert got == {(3, 3, 0), (2, 3, 0), (4, 3, 0), (3, 2, 0), (3, 4, 0)}

    def test_erode_plus_back_to_pixel(self):
        plus = volume_adapt(pixel_mask(), 1, min_roi_voxels=1)
        back = volume_adapt(plus, -1, min_roi_voxels=1)
        assert np.array_equal(back.mask, pixel_mask().mask)

    def test_erode_pixel_to_empty_is_degenerate(self):
        with pytest.raises(DegenerateRoiError):
            volume_adapt(pixel_mask(), -1, min_roi_voxels=1)

    def test_level_zero_is_identity(self):
        m = disc_mask()
        assert np.array_equal(volume_adapt(m, 0).mask, m.mask)

    def test_3d_ball_structuring_element(self):
        m = np.zeros((5, 5, 5), dtype=bool)
        m[2, 2, 2] = True
        out = volume_adapt(RoiMask(m), 1, min_roi_voxels=1)
        assert out.n_voxels == 7  # center + 6 face neighbours

    def test_multi_level_composition(self):
        m = disc_mask()
        two = volume_adapt(m, 2, min_roi_voxels=1)
        one_one = volume_adapt(volume_adapt(m, 1, min_roi_voxels=1), 1,
                               min_roi_voxels=1)
        assert np.array_equal(two.mask, one_one.mask)

    def test_erosion_of_dilation_covers_convex_mask(self):
        m = disc_mask()
        closed = volume_adapt(volume_adapt(m, 1, min_roi_voxels=1), -1,
                              min_roi_voxels=1)
        assert np.all(closed.mask[m.mask])

    def test_min_voxel_floor_enforced(self):
        with pytest.raises(DegenerateRoiError):
            volume_adapt(disc_mask(radius=2.0), -2, min_roi_voxels=8)

    def test_empty_mask_rejected(self):
        with pytest.raises(DomainError):
            volume_adapt(RoiMask(np.zeros((3, 3, 1), dtype=bool)), 1)


class TestContourRandomize:
    def test_vanishing_amplitude_is_identity(self):
        m = disc_mask()
        out = contour_randomize(m, sigma_mm=2.0, amplitude=1e-9, seed=7)
        assert np.array_equal(out.mask, m.mask)

    def test_seed_determinism(self):
        m = disc_mask()
        a = contour_randomize(m, 2.0, 1.0, seed=11)
        b = contour_randomize(m, 2.0, 1.0, seed=11)
        c = contour_randomize(m, 2.0, 1.0, seed=12)
        assert np.array_equal(a.mask, b.mask)
        assert not np.array_equal(a.mask, c.mask)

    def test_dice_stays_in_band(self):
        m = disc_mask()
        dices = []
        for seed in range(50):
            out = contour_randomize(m, 2.0, 1.0, seed=seed)
            inter = np.logical_and(out.mask, m.mask).sum()
            dices.append(2.0 * inter / (out.n_voxels + m.n_voxels))
        assert all(0.7 < d <= 1.0 for d in dices)
        assert any(d < 1.0 for d in dices)

    def test_amplitude_must_be_positive(self):
        with pytest.raises(DomainError):
            contour_randomize(disc_mask(), 2.0, 0.0, seed=0)

    def test_degenerate_result_flagged(self):
        tiny = disc_mask(radius=1.2)  # 5 voxels, below the default floor
        assert tiny.n_voxels < 8
        with pytest.raises(DegenerateRoiError):
            contour_randomize(tiny, 1.0, 0.1, seed=3, min_roi_voxels=8)


class TestPerturbationGrid:
    def test_v_only_set(self):
        keys = perturbation_flavour_grid(v_levels=(1, -1, 2, -2))
        assert len(keys) == 4
        assert [k.get("v") for k in keys] == [1, -1, 2, -2]
        assert all(k.axis is FlavourAxis.PERTURB for k in keys)

    def test_tvc_product(self):
        keys = perturbation_flavour_grid(
            translations=((0.5, 0.0, 0.0), (0.0, 0.5, 0.0)),
            v_levels=(1, -1),
            c_seeds=(0, 1))
        assert len(keys) == 8
        assert len(set(keys)) == 8
        assert all(k.get("tx") is not None for k in keys)
        assert all(k.get("c_seed") is not None for k in keys)

    def test_empty_spec_is_vanilla(self):
        assert perturbation_flavour_grid() == [FlavourKey.vanilla()]

    def test_level_zero_rejected(self):
        with pytest.raises(DomainError):
            perturbation_flavour_grid(v_levels=(0,))

    def test_deterministic_order(self):
        a = perturbation_flavour_grid(v_levels=(1, -1), c_seeds=(0, 1))
        b = perturbation_flavour_grid(v_levels=(1, -1), c_seeds=(0, 1))
        assert a == b


class TestApplyPerturbation:
    def _vol(self):
        data = np.tile(np.arange(12, dtype=float)[:, None, None], (1, 12, 6))
        return Volume(data)

    def _mask(self):
        m = np.zeros((12, 12, 6), dtype=bool)
        m[4:9, 4:9, 2:5] = True
        return RoiMask(m)

    def test_translation_moves_image_not_mask(self):
        from radflavour.core import resample_translate
        key = FlavourKey.make(FlavourAxis.PERTURB, tx=0.5, ty=0.0, tz=0.0)
        vol, mask = apply_perturbation(self._vol(), self._mask(), key)
        assert np.array_equal(mask.mask, self._mask().mask)
        want = resample_translate(self._vol(), (0.5, 0.0, 0.0))
        assert np.array_equal(vol.data, want.data)

    def test_volume_level_changes_mask_not_image(self):
        key = FlavourKey.make(FlavourAxis.PERTURB, v=1)
        vol, mask = apply_perturbation(self._vol(), self._mask(), key)
        assert np.array_equal(vol.data, self._vol().data)
        assert mask.n_voxels > self._mask().n_voxels
        assert np.array_equal(mask.mask,
                              volume_adapt(self._mask(), 1).mask)

    def test_composition_order_t_v_c(self):
        key = FlavourKey.make(FlavourAxis.PERTURB, tx=0.5, ty=0.0, tz=0.0,
                              v=-1, c_seed=5, c_sigma=2.0, c_amp=0.5)
        vol, mask = apply_perturbation(self._vol(), self._mask(), key)
        adapted = volume_adapt(self._mask(), -1)
        want = contour_randomize(adapted, 2.0, 0.5, 5,
                                 spacing=vol.spacing)
        assert np.array_equal(mask.mask, want.mask)

    def test_degenerate_propagates(self):
        key = FlavourKey.make(FlavourAxis.PERTURB, v=-4)
        with pytest.raises(DegenerateRoiError):
            apply_perturbation(self._vol(), self._mask(), key)

    def test_rejects_other_axes(self):
        with pytest.raises(DomainError):
            apply_perturbation(self._vol(), self._mask(),
                               FlavourKey.vanilla())
