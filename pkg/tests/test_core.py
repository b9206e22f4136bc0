import numpy as np
import pytest

from radflavour.core import (
    Case,
    DomainError,
    FlavourAxis,
    FlavourKey,
    Interp,
    RoiMask,
    Unit,
    Volume,
    resample_translate,
    roi_values,
)


class TestVolume:
    def test_basic_construction(self):
        v = Volume(np.zeros((3, 4, 5)), spacing=(1.0, 2.0, 3.0), unit=Unit.HU)
        assert v.dims == (3, 4, 5)
        assert v.spacing == (1.0, 2.0, 3.0)
        assert v.unit is Unit.HU

    def test_data_frozen(self):
        v = Volume(np.zeros((2, 2, 2)))
        with pytest.raises(ValueError):
            v.data[0, 0, 0] = 1.0

    def test_rejects_non_3d(self):
        with pytest.raises(DomainError):
            Volume(np.zeros((2, 2)))

    def test_rejects_nan(self):
        data = np.zeros((2, 2, 2))
        data[0, 0, 0] = np.nan
        with pytest.raises(DomainError):
            Volume(data)

    def test_rejects_bad_spacing(self):
        with pytest.raises(DomainError):
            Volume(np.zeros((2, 2, 2)), spacing=(1.0, 0.0, 1.0))
        with pytest.raises(DomainError):
            Volume(np.zeros((2, 2, 2)), spacing=(1.0, -1.0, 1.0))

    def test_flat_is_x_fastest(self):
        data = np.arange(24, dtype=float).reshape((2, 3, 4))
        v = Volume(data)
        flat = v.flat()
        # x varies fastest: first two entries walk along x at y=z=0
        assert flat[0] == data[0, 0, 0]
        assert flat[1] == data[1, 0, 0]
        assert flat[2] == data[0, 1, 0]

    def test_flat_round_trip(self, rng):
        data = rng.normal(size=(3, 4, 5))
        v = Volume(data)
        back = Volume.from_flat(v.flat(), v.dims)
        assert np.array_equal(back.data, v.data)

    def test_from_flat_length_mismatch(self):
        with pytest.raises(DomainError):
            Volume.from_flat(np.zeros(7), (2, 2, 2))

    def test_with_data_keeps_spacing_and_unit(self):
        v = Volume(np.zeros((2, 2, 2)), spacing=(0.5, 0.5, 2.0), unit=Unit.SUV)
        w = v.with_data(np.ones((2, 2, 2)))
        assert w.spacing == v.spacing
        assert w.unit is Unit.SUV
        u = v.with_data(np.ones((2, 2, 2)), unit=Unit.ARBITRARY)
        assert u.unit is Unit.ARBITRARY


class TestRoiMask:
    def test_round_trip_indices(self):
        m = RoiMask.from_indices([(0, 0, 0), (1, 2, 1)], (2, 3, 2))
        assert m.n_voxels == 2
        got = {tuple(row) for row in m.indices()}
        assert got == {(0, 0, 0), (1, 2, 1)}

    def test_out_of_bounds_index(self):
        with pytest.raises(DomainError):
            RoiMask.from_indices([(2, 0, 0)], (2, 2, 2))

    def test_empty(self):
        m = RoiMask(np.zeros((2, 2, 2), dtype=bool))
        assert m.is_empty
        assert m.n_voxels == 0

    def test_mask_frozen(self):
        m = RoiMask(np.ones((2, 2, 2), dtype=bool))
        with pytest.raises(ValueError):
            m.mask[0, 0, 0] = False


class TestFlavourKey:
    def test_vanilla_canonical(self):
        assert str(FlavourKey.vanilla()) == "vanilla"
        assert FlavourKey.vanilla().axis is FlavourAxis.VANILLA

    def test_params_sorted_in_canonical_form(self):
        k = FlavourKey.make(FlavourAxis.PERTURB, v=1, c_seed=3, c_sigma=2.0)
        assert str(k) == "perturb(c_seed=3;c_sigma=2.0;v=1)"

    def test_parse_round_trip(self):
        keys = [
            FlavourKey.vanilla(),
            FlavourKey.make(FlavourAxis.BIN_WIDTH, width=0.5),
            FlavourKey.make(FlavourAxis.BIN_COUNT, count=64),
            FlavourKey.make(FlavourAxis.FILTER, kind="log", sigma=1.5),
            FlavourKey.make(FlavourAxis.FUSION, method="weighted", alpha=0.5),
        ]
        for k in keys:
            assert FlavourKey.parse(str(k)) == k

    def test_parse_preserves_value_types(self):
        k = FlavourKey.parse("bin_width(width=0.5)")
        assert k.get("width") == 0.5
        assert isinstance(k.get("width"), float)
        k2 = FlavourKey.parse("bin_count(count=64)")
        assert isinstance(k2.get("count"), int)
        k3 = FlavourKey.parse("filter(kind=wavelet;band=HHH)")
        assert k3.get("band") == "HHH"

    def test_parse_rejects_garbage(self):
        for text in ("", "bin_width", "bin_width(width=0.5", "nope(x=1)",
                     "bin_width()"):
            with pytest.raises(DomainError):
                FlavourKey.parse(text)

    def test_get_default(self):
        k = FlavourKey.make(FlavourAxis.BIN_WIDTH, width=1.0)
        assert k.get("missing") is None
        assert k.get("missing", 7) == 7

    def test_keys_hashable_and_ordered_by_string(self):
        a = FlavourKey.make(FlavourAxis.BIN_WIDTH, width=0.5)
        b = FlavourKey.make(FlavourAxis.BIN_WIDTH, width=0.5)
        assert a == b
        assert len({a, b}) == 1


class TestCase:
    def test_volume_lookup(self):
        vol = Volume(np.zeros((2, 2, 2)), unit=Unit.HU)
        mask = RoiMask(np.ones((2, 2, 2), dtype=bool))
        case = Case("c1", "p1", {Unit.HU: vol}, mask)
        assert case.volume() is vol
        assert case.volume(Unit.HU) is vol
        with pytest.raises(DomainError):
            case.volume(Unit.SUV)

    def test_multi_volume_needs_unit(self):
        v1 = Volume(np.zeros((2, 2, 2)), unit=Unit.HU)
        v2 = Volume(np.zeros((2, 2, 2)), unit=Unit.SUV)
        mask = RoiMask(np.ones((2, 2, 2), dtype=bool))
        case = Case("c1", "p1", {Unit.HU: v1, Unit.SUV: v2}, mask)
        with pytest.raises(DomainError):
            case.volume()
        assert case.volume(Unit.SUV) is v2

    def test_dims_mismatch_rejected(self):
        vol = Volume(np.zeros((2, 2, 2)))
        mask = RoiMask(np.ones((3, 3, 3), dtype=bool))
        with pytest.raises(DomainError):
            Case("c1", "p1", {Unit.ARBITRARY: vol}, mask)

    def test_label_validation(self):
        vol = Volume(np.zeros((2, 2, 2)))
        mask = RoiMask(np.ones((2, 2, 2), dtype=bool))
        Case("c1", "p1", {Unit.ARBITRARY: vol}, mask, label=1)
        with pytest.raises(DomainError):
            Case("c1", "p1", {Unit.ARBITRARY: vol}, mask, label=2)


class TestRoiValues:
    def test_order_matches_flat(self, rng):
        data = rng.normal(size=(4, 3, 2))
        v = Volume(data)
        m = RoiMask(rng.random((4, 3, 2)) < 0.5)
        if m.is_empty:
            pytest.skip("degenerate draw")
        vals = roi_values(v, m)
        assert np.array_equal(vals, v.flat()[m.mask.ravel(order="F")])

    def test_empty_mask_rejected(self):
        v = Volume(np.zeros((2, 2, 2)))
        m = RoiMask(np.zeros((2, 2, 2), dtype=bool))
        with pytest.raises(DomainError):
            roi_values(v, m)

    def test_dims_mismatch(self):
        v = Volume(np.zeros((2, 2, 2)))
        m = RoiMask(np.ones((3, 3, 3), dtype=bool))
        with pytest.raises(DomainError):
            roi_values(v, m)


class TestResampleTranslate:
    def test_zero_shift_identity(self, rng):
        v = Volume(rng.normal(size=(5, 4, 3)))
        for interp in (Interp.TRILINEAR, Interp.NEAREST):
            out = resample_translate(v, (0.0, 0.0, 0.0), interp)
            assert np.allclose(out.data, v.data)

    def test_fractional_shift_on_ramp(self):
        # a linear ramp along x: sampling at index + 0.5 gives the midpoint
        data = np.tile(np.arange(6, dtype=float)[:, None, None], (1, 4, 3))
        v = Volume(data)
        out = resample_translate(v, (0.5, 0.0, 0.0))
        assert np.allclose(out.data[:-1], data[:-1] + 0.5)

    def test_edge_replication(self):
        data = np.tile(np.arange(4, dtype=float)[:, None, None], (1, 3, 3))
        v = Volume(data)
        out = resample_translate(v, (1.0, 0.0, 0.0))
        # the final x-plane samples past the edge and replicates it
        assert np.allclose(out.data[-1], data[-1])
        assert np.allclose(out.data[:-1], data[1:])

    def test_shift_guard(self):
        v = Volume(np.zeros((4, 4, 4)))
        with pytest.raises(DomainError):
            resample_translate(v, (2.5, 0.0, 0.0))

    def test_nearest_is_exact_levels(self):
        data = np.tile(np.arange(5, dtype=float)[:, None, None], (1, 3, 3))
        v = Volume(data)
        out = resample_translate(v, (1.0, 0.0, 0.0), Interp.NEAREST)
        assert set(np.unique(out.data)) <= set(np.unique(data))


def test_domain_error_is_value_error():
    assert issubclass(DomainError, ValueError)


def test_unit_values():
    assert {u.value for u in Unit} == {"HU", "SUV", "ARBITRARY"}
