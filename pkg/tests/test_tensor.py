"""Tests for tensor assembly, PCA aggregation, ICC, and repeatability."""

import json

import numpy as np
import pytest

from radflavour.core import DomainError, FlavourKey
from radflavour.io import FeatureTable, FormatError
from radflavour.tensor import (
    ICC_CUTS,
    FeatureTensor,
    IccBand,
    IccResult,
    _band,
    assemble,
    enumerate_flavour_combinations,
    icc,
    load_tensor,
    pca_aggregate,
    pca_first_component,
    prune_correlated,
    save_tensor,
    slice_concat,
    tr_repeatability_report,
    zscore_columns,
)

FL_A = FlavourKey.parse("bin_width(width=10.0)")
FL_B = FlavourKey.parse("bin_width(width=25.0)")
FL_C = FlavourKey.parse("vanilla")


def simple_table(flavours, cases, base=0.0):
    """Table with two features whose values encode (case, flavour) position."""
    t = FeatureTable(["fo_mean", "fo_energy"])
    for k, fl in enumerate(flavours):
        for i, cid in enumerate(cases):
            t.set_row(cid, fl.canonical,
                      {"fo_mean": base + 10.0 * i + k,
                       "fo_energy": base + 100.0 * i + k})
    return t


def simple_tensor(n=4, labels=None, groups=None):
    rng = np.random.default_rng(7)
    cases = tuple(f"case-{i:02d}" for i in range(n))
    flavours = (FL_A, FL_B, FL_C)
    values = rng.normal(size=(n, 2, 3))
    return FeatureTensor(cases, ("fo_mean", "fo_energy"), flavours, values,
                         labels=labels, groups=groups)


class TestFeatureTensor:
    def test_shape_and_lookup(self):
        t = simple_tensor()
        assert t.shape == (4, 2, 3)
        assert t.feature_index("fo_energy") == 1
        assert t.flavour_index(FL_B) == 1

    def test_unknown_axis_entries(self):
        t = simple_tensor()
        with pytest.raises(DomainError):
            t.feature_index("fo_missing")
        with pytest.raises(DomainError):
            t.flavour_index(FlavourKey.parse("bin_count(n=32)"))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DomainError, match="shape"):
            FeatureTensor(("a", "b"), ("f",), (FL_A,), np.zeros((2, 2, 1)))

    def test_duplicate_flavours_rejected(self):
        with pytest.raises(DomainError, match="duplicate"):
            FeatureTensor(("a",), ("f",), (FL_A, FL_A), np.zeros((1, 1, 2)))

    def test_misaligned_labels_rejected(self):
        with pytest.raises(DomainError, match="labels"):
            FeatureTensor(("a", "b"), ("f",), (FL_A,), np.zeros((2, 1, 1)),
                          labels=np.array([0, 1, 0]))

    def test_misaligned_groups_rejected(self):
        with pytest.raises(DomainError, match="groups"):
            FeatureTensor(("a", "b"), ("f",), (FL_A,), np.zeros((2, 1, 1)),
                          groups=("p0",))

    def test_incomplete_columns(self):
        t = simple_tensor()
        t.values[2, 0, 1] = np.nan
        assert t.incomplete_columns() == [("fo_mean", FL_B)]


class TestAssemble:
    def test_axis_order_is_deterministic(self):
        # insert cases and flavours out of order; axes come out sorted
        cases = ["case-b", "case-a", "case-c"]
        table = simple_table([FL_B, FL_A], cases)
        tensor = assemble(table)
        assert tensor.cases == ("case-a", "case-b", "case-c")
        # canonical-string order: width=10.0 sorts before width=25.0
        assert tensor.flavours == (FL_A, FL_B)
        assert tensor.features == ("fo_mean", "fo_energy")
        # case-a was inserted second (i=1) under FL_B (k=0 in the table)
        i = tensor.cases.index("case-a")
        k = tensor.flavour_index(FL_B)
        assert tensor.values[i, 0, k] == 10.0 * 1 + 0

    def test_merge_multiple_tables(self):
        cases = ["c0", "c1", "c2"]
        ta = simple_table([FL_A], cases)
        tb = simple_table([FL_B], cases, base=0.5)
        tensor = assemble([ta, tb])
        assert tensor.shape == (3, 2, 2)
        assert tensor.values[0, 0, tensor.flavour_index(FL_B)] == 0.5

    def test_missing_case_is_named(self):
        t = FeatureTable(["fo_mean"])
        t.set_row("c0", FL_A.canonical, {"fo_mean": 1.0})
        t.set_row("c1", FL_A.canonical, {"fo_mean": 2.0})
        t.set_row("c0", FL_B.canonical, {"fo_mean": 3.0})
        with pytest.raises(DomainError) as err:
            assemble(t)
        assert "c1" in str(err.value)
        assert FL_B.canonical in str(err.value)

    def test_duplicate_row_across_tables_rejected(self):
        cases = ["c0", "c1"]
        ta = simple_table([FL_A], cases)
        tb = simple_table([FL_A], cases)
        with pytest.raises(DomainError, match="duplicate"):
            assemble([ta, tb])

    def test_feature_name_disagreement_rejected(self):
        ta = FeatureTable(["fo_mean"])
        tb = FeatureTable(["fo_energy"])
        ta.set_row("c0", FL_A.canonical, {"fo_mean": 1.0})
        tb.set_row("c0", FL_B.canonical, {"fo_energy": 1.0})
        with pytest.raises(DomainError, match="disagree"):
            assemble([ta, tb])

    def test_empty_input_rejected(self):
        with pytest.raises(DomainError):
            assemble([])

    def test_labels_and_groups_follow_case_order(self):
        cases = ["c1", "c0"]
        table = simple_table([FL_A], cases)
        tensor = assemble(table,
                          labels={"c0": 0, "c1": 1},
                          groups={"c0": "p0", "c1": "p1"})
        assert tensor.cases == ("c0", "c1")
        assert list(tensor.labels) == [0, 1]
        assert tensor.groups == ("p0", "p1")

    def test_none_cells_become_nan(self):
        t = FeatureTable(["fo_mean", "fo_energy"])
        t.set_row("c0", FL_A.canonical, {"fo_mean": 1.0, "fo_energy": None})
        t.set_row("c1", FL_A.canonical, {"fo_mean": 2.0, "fo_energy": 4.0})
        tensor = assemble(t)
        assert np.isnan(tensor.values[0, 1, 0])
        assert tensor.incomplete_columns() == [("fo_energy", FL_A)]


class TestEnumerateCombinations:
    def test_three_flavours(self):
        combos = enumerate_flavour_combinations([FL_A, FL_B, FL_C])
        assert combos == [(FL_A, FL_B), (FL_A, FL_C), (FL_B, FL_C),
                          (FL_A, FL_B, FL_C)]

    def test_count_for_ten(self):
        flavours = [FlavourKey.parse(f"bin_count(n={n})")
                    for n in range(8, 18)]
        combos = enumerate_flavour_combinations(flavours)
        assert len(combos) == 2 ** 10 - 10 - 1 == 1013

    def test_single_flavour_has_no_pairs(self):
        assert enumerate_flavour_combinations([FL_A]) == []

    def test_min_size_one_includes_singletons(self):
        combos = enumerate_flavour_combinations([FL_A, FL_B, FL_C],
                                                min_size=1)
        assert len(combos) == 2 ** 3 - 1
        assert combos[0] == (FL_A,)

    def test_guard_on_excessive_flavours(self):
        flavours = [FlavourKey.parse(f"bin_count(n={n})")
                    for n in range(2, 24)]
        with pytest.raises(DomainError, match="guard"):
            enumerate_flavour_combinations(flavours)


class TestSliceConcat:
    def test_flavour_major_layout(self):
        t = simple_tensor()
        mat, names = slice_concat(t, [FL_B, FL_A])
        assert mat.shape == (4, 4)
        assert names == [f"{FL_B.canonical}::fo_mean",
                         f"{FL_B.canonical}::fo_energy",
                         f"{FL_A.canonical}::fo_mean",
                         f"{FL_A.canonical}::fo_energy"]
        np.testing.assert_array_equal(mat[:, :2], t.values[:, :, 1])
        np.testing.assert_array_equal(mat[:, 2:], t.values[:, :, 0])

    def test_empty_subset_rejected(self):
        with pytest.raises(DomainError, match="empty"):
            slice_concat(simple_tensor(), [])

    def test_unknown_flavour_rejected(self):
        with pytest.raises(DomainError):
            slice_concat(simple_tensor(), [FlavourKey.parse("bin_count(n=4)")])


class TestPruneCorrelated:
    def test_exact_multiple_is_dropped(self):
        rng = np.random.default_rng(3)
        f1 = rng.normal(size=50)
        mat = np.stack([f1, 2.0 * f1, rng.normal(size=50)], axis=1)
        pruned, kept, dropped = prune_correlated(mat, ["a", "b", "c"])
        assert kept == ["a", "c"]
        assert dropped == ["b"]
        assert pruned.shape == (50, 2)
        np.testing.assert_array_equal(pruned[:, 0], f1)

    def test_independent_columns_survive(self):
        rng = np.random.default_rng(11)
        mat = rng.normal(size=(200, 6))
        pruned, kept, dropped = prune_correlated(mat)
        assert dropped == []
        assert kept == [f"c{j}" for j in range(6)]
        np.testing.assert_array_equal(pruned, mat)

    def test_constant_columns_dropped_first(self):
        rng = np.random.default_rng(5)
        mat = np.stack([np.full(30, 2.5), rng.normal(size=30)], axis=1)
        pruned, kept, dropped = prune_correlated(mat, ["const", "x"])
        assert dropped == ["const"]
        assert kept == ["x"]

    def test_anticorrelation_counts(self):
        rng = np.random.default_rng(9)
        f1 = rng.normal(size=40)
        mat = np.stack([f1, -f1 + 1e-9 * rng.normal(size=40)], axis=1)
        _, kept, dropped = prune_correlated(mat, ["a", "b"])
        assert kept == ["a"]
        assert dropped == ["b"]

    def test_threshold_is_strict(self):
        # r exactly at the threshold is kept; only strictly above drops
        x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        _, kept, dropped = prune_correlated(x, ["a", "b"], threshold=1.0)
        assert kept == ["a", "b"]
        assert dropped == []

    def test_earlier_column_wins(self):
        rng = np.random.default_rng(21)
        f1 = rng.normal(size=60)
        mat = np.stack([f1, f1.copy()], axis=1)
        _, kept, dropped = prune_correlated(mat, ["first", "second"])
        assert kept == ["first"]
        assert dropped == ["second"]

    def test_idempotent(self):
        rng = np.random.default_rng(17)
        f1 = rng.normal(size=80)
        mat = np.stack([f1, 3 * f1, rng.normal(size=80),
                        np.zeros(80)], axis=1)
        pruned, kept, _ = prune_correlated(mat)
        again, kept2, dropped2 = prune_correlated(pruned, kept)
        assert kept2 == kept
        assert dropped2 == []
        np.testing.assert_array_equal(again, pruned)

    def test_needs_two_rows(self):
        with pytest.raises(DomainError):
            prune_correlated(np.zeros((1, 3)))


class TestZScore:
    def test_hand_values(self):
        z = zscore_columns(np.array([[1.0], [3.0]]))
        np.testing.assert_allclose(z[:, 0], [-1.0, 1.0])

    def test_constant_column_becomes_zero(self):
        z = zscore_columns(np.full((5, 2), 7.0))
        np.testing.assert_array_equal(z, np.zeros((5, 2)))

    def test_population_scaling(self):
        rng = np.random.default_rng(2)
        x = rng.normal(loc=5, scale=3, size=(100, 4))
        z = zscore_columns(x)
        np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-12)


class TestPcaFirstComponent:
    def test_identical_columns(self):
        rng = np.random.default_rng(4)
        col = rng.normal(size=30)
        scores, loadings = pca_first_component(np.stack([col, col], axis=1))
        z = (col - col.mean()) / col.std()
        np.testing.assert_allclose(loadings, [1 / np.sqrt(2), 1 / np.sqrt(2)],
                                   atol=1e-12)
        np.testing.assert_allclose(scores, np.sqrt(2) * z, atol=1e-10)

    def test_anticorrelated_columns_sign_rule(self):
        rng = np.random.default_rng(13)
        col = rng.normal(size=25)
        scores, loadings = pca_first_component(
            np.stack([col, 1.0 - col], axis=1))
        # loading sum is zero; the largest-magnitude loading goes positive
        np.testing.assert_allclose(loadings, [1 / np.sqrt(2), -1 / np.sqrt(2)],
                                   atol=1e-12)
        z = (col - col.mean()) / col.std()
        np.testing.assert_allclose(scores, np.sqrt(2) * z, atol=1e-10)

    def test_score_variance_is_leading_eigenvalue(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(120, 5)) @ rng.normal(size=(5, 5))
        scores, _ = pca_first_component(x)
        lam = np.linalg.eigvalsh(np.corrcoef(x, rowvar=False)).max()
        assert abs(scores.mean()) < 1e-10
        np.testing.assert_allclose(scores.var(), lam, rtol=1e-10)

    def test_constant_partner_gets_zero_weight(self):
        rng = np.random.default_rng(6)
        col = rng.normal(size=20)
        scores, loadings = pca_first_component(
            np.stack([col, np.full(20, 3.0)], axis=1))
        # the constant column z-scores to zeros and cannot contribute
        z = (col - col.mean()) / col.std()
        np.testing.assert_allclose(np.abs(loadings[0]), 1.0, atol=1e-12)
        np.testing.assert_allclose(scores, loadings[0] * z, atol=1e-10)

    def test_input_guards(self):
        with pytest.raises(DomainError, match="columns"):
            pca_first_component(np.zeros((5, 1)))
        with pytest.raises(DomainError, match="rows"):
            pca_first_component(np.zeros((2, 3)))
        with pytest.raises(DomainError, match="constant"):
            pca_first_component(np.full((5, 3), 1.0))

    def test_pca_aggregate_matches_direct_call(self):
        t = simple_tensor(n=10)
        scores = pca_aggregate(t, "fo_energy")
        direct, _ = pca_first_component(t.values[:, 1, :])
        np.testing.assert_array_equal(scores, direct)


class TestIcc:
    def test_perfect_agreement_is_exactly_one(self):
        a = np.array([1.0, 4.0, 2.0, 8.0, 5.0])
        r = icc(a, a.copy())
        assert r.value == 1.0
        assert r.band is IccBand.EXCELLENT
        assert not r.is_missing

    def test_matches_direct_anova_sums(self):
        # independent arithmetic: one-way ANOVA written out longhand
        a = [1.0, 2.0, 3.0, 4.0]
        b = [1.0, 2.0, 3.0, 5.0]
        n, k = 4, 2
        grand = sum(a + b) / (n * k)
        means = [(x + y) / 2 for x, y in zip(a, b)]
        msb = k * sum((m - grand) ** 2 for m in means) / (n - 1)
        msw = sum((x - m) ** 2 + (y - m) ** 2
                  for x, y, m in zip(a, b, means)) / (n * (k - 1))
        expect = (msb - msw) / (msb + msw)
        r = icc(a, b)
        np.testing.assert_allclose(r.value, expect, rtol=1e-14)

    def test_zero_variance_is_missing(self):
        r = icc([2.0, 2.0, 2.0], [2.0, 2.0, 2.0])
        assert r.is_missing
        assert r.value is None and r.band is None

    def test_nan_input_is_missing(self):
        r = icc([1.0, np.nan, 3.0], [1.0, 2.0, 3.0])
        assert r.is_missing

    def test_affine_invariance(self):
        rng = np.random.default_rng(19)
        a = rng.normal(size=50)
        b = a + 0.3 * rng.normal(size=50)
        base = icc(a, b).value
        scaled = icc(3.5 * a - 2.0, 3.5 * b - 2.0).value
        np.testing.assert_allclose(scaled, base, rtol=1e-10)

    def test_session_order_invariance(self):
        rng = np.random.default_rng(23)
        a = rng.normal(size=30)
        b = a + 0.5 * rng.normal(size=30)
        np.testing.assert_allclose(icc(a, b).value, icc(b, a).value,
                                   rtol=1e-12)

    def test_variance_ratio_recovery(self):
        # between-case variance 9, within 1: ICC(1,1) tends to 0.9
        rng = np.random.default_rng(31)
        mu = rng.normal(scale=3.0, size=5000)
        a = mu + rng.normal(size=5000)
        b = mu + rng.normal(size=5000)
        r = icc(a, b)
        assert abs(r.value - 0.9) < 0.02
        assert r.band is IccBand.EXCELLENT

    def test_consistency_ignores_constant_shift(self):
        a = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        r31 = icc(a, a + 5.0, variant="3,1")
        assert r31.value == 1.0
        # absolute agreement is penalized by the same shift
        assert icc(a, a + 5.0).value < 1.0

    def test_unknown_variant_rejected(self):
        with pytest.raises(DomainError, match="variant"):
            icc([1, 2, 3], [1, 2, 3], variant="2,1")

    def test_needs_three_cases(self):
        with pytest.raises(DomainError):
            icc([1.0, 2.0], [1.0, 2.0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DomainError):
            icc([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_band_boundaries(self):
        assert _band(0.49) is IccBand.LOW
        assert _band(-0.2) is IccBand.LOW
        assert _band(0.50) is IccBand.MEDIUM
        assert _band(0.74) is IccBand.MEDIUM
        assert _band(0.75) is IccBand.HIGH
        assert _band(0.89) is IccBand.HIGH
        assert _band(0.90) is IccBand.EXCELLENT
        assert _band(1.0) is IccBand.EXCELLENT
        assert ICC_CUTS == (0.50, 0.75, 0.90)


def retest_pair(n=40, noise=0.2, seed=29, nf=2, nk=3):
    """Paired tensors whose flavour columns are noisy copies of one signal."""
    rng = np.random.default_rng(seed)
    cases = tuple(f"case-{i:03d}" for i in range(n))
    flavours = (FL_A, FL_B, FL_C)[:nk]
    features = ("fo_mean", "fo_energy")[:nf]
    signal = rng.normal(size=(n, nf))
    vt = np.stack([signal + noise * rng.normal(size=(n, nf))
                   for _ in range(nk)], axis=2)
    vr = np.stack([signal + noise * rng.normal(size=(n, nf))
                   for _ in range(nk)], axis=2)
    return (FeatureTensor(cases, features, flavours, vt),
            FeatureTensor(cases, features, flavours, vr))


class TestRepeatabilityReport:
    def test_identical_sessions_all_excellent(self):
        test, _ = retest_pair()
        retest = FeatureTensor(test.cases, test.features, test.flavours,
                               test.values.copy())
        report = tr_repeatability_report(test, retest)
        for feat in test.features:
            assert report.aggregated[feat].value == 1.0
            for r in report.per_flavour[feat].values():
                assert r.value == 1.0
        counts = report.band_counts("aggregated")
        assert counts["excellent"] == 2
        assert counts["missing"] == 0

    def test_per_flavour_matches_direct_icc(self):
        test, retest = retest_pair()
        report = tr_repeatability_report(test, retest)
        j = test.feature_index("fo_energy")
        k = test.flavour_index(FL_B)
        direct = icc(test.values[:, j, k], retest.values[:, j, k])
        assert report.per_flavour["fo_energy"][FL_B.canonical] == direct

    def test_aggregated_uses_stacked_pca(self):
        test, retest = retest_pair()
        report = tr_repeatability_report(test, retest)
        j = test.feature_index("fo_mean")
        n = len(test.cases)
        stacked = np.concatenate([test.values[:, j, :],
                                  retest.values[:, j, :]], axis=0)
        scores, _ = pca_first_component(stacked)
        expect = icc(scores[:n], scores[n:])
        assert report.aggregated["fo_mean"] == expect

    def test_missing_column_excluded_from_aggregate(self):
        test, retest = retest_pair()
        test.values[0, 0, 1] = np.nan
        report = tr_repeatability_report(test, retest)
        assert report.per_flavour["fo_mean"][FL_B.canonical].is_missing
        # the aggregate falls back to the two complete columns
        j, n = 0, len(test.cases)
        cols = [0, 2]
        stacked = np.concatenate([test.values[:, j, cols],
                                  retest.values[:, j, cols]], axis=0)
        scores, _ = pca_first_component(stacked)
        assert report.aggregated["fo_mean"] == icc(scores[:n], scores[n:])

    def test_single_complete_flavour_keeps_its_icc(self):
        test, retest = retest_pair(nk=3)
        test.values[0, 0, 1] = np.nan
        retest.values[1, 0, 2] = np.nan
        report = tr_repeatability_report(test, retest)
        direct = icc(test.values[:, 0, 0], retest.values[:, 0, 0])
        agg = report.aggregated["fo_mean"]
        np.testing.assert_allclose(agg.value, direct.value, rtol=1e-10)
        assert agg.band is direct.band

    def test_no_complete_flavour_is_missing(self):
        test, retest = retest_pair(nk=2)
        test.values[0, 0, 0] = np.nan
        retest.values[0, 0, 1] = np.nan
        report = tr_repeatability_report(test, retest)
        assert report.aggregated["fo_mean"].is_missing

    def test_axis_mismatch_rejected(self):
        test, _ = retest_pair(nk=3)
        other, _ = retest_pair(nk=2)
        with pytest.raises(DomainError, match="mismatched"):
            tr_repeatability_report(test, other)

    def test_band_counts_per_flavour(self):
        test, retest = retest_pair()
        report = tr_repeatability_report(test, retest)
        counts = report.band_counts("per_flavour")
        assert sum(counts.values()) == len(test.features) * len(test.flavours)

    def test_json_dict_shape(self):
        test, retest = retest_pair()
        doc = tr_repeatability_report(test, retest).to_json_dict()
        assert set(doc) == {"features", "flavours", "per_flavour",
                            "aggregated", "band_counts"}
        assert doc["flavours"] == [fl.canonical for fl in test.flavours]
        val, band = doc["aggregated"]["fo_mean"]
        assert isinstance(val, float) and isinstance(band, str)
        json.dumps(doc)  # must be serializable as-is


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        t = simple_tensor(labels=np.array([0, 1, 1, 0]),
                          groups=("p0", "p0", "p1", "p2"))
        t.values[1, 0, 2] = np.nan
        path = tmp_path / "tensor.json"
        save_tensor(t, path)
        back = load_tensor(path)
        assert back.cases == t.cases
        assert back.features == t.features
        assert back.flavours == t.flavours
        np.testing.assert_array_equal(back.values, t.values)
        np.testing.assert_array_equal(back.labels, t.labels)
        assert back.groups == t.groups

    def test_round_trip_without_labels(self, tmp_path):
        t = simple_tensor()
        path = tmp_path / "tensor.json"
        save_tensor(t, path)
        back = load_tensor(path)
        assert back.labels is None and back.groups is None

    def test_bytes_are_deterministic(self, tmp_path):
        t = simple_tensor(labels=np.array([1, 0, 1, 0]))
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_tensor(t, p1)
        save_tensor(t, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_nan_encodes_as_null(self, tmp_path):
        t = simple_tensor()
        t.values[0, 0, 0] = np.nan
        path = tmp_path / "tensor.json"
        save_tensor(t, path)
        doc = json.loads(path.read_text())
        assert doc["format"] == "feature-tensor-v1"
        assert doc["values"][0][0][0] is None

    def test_bad_format_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(FormatError, match="format"):
            load_tensor(path)

    def test_result_equality_model(self):
        assert IccResult(0.5, IccBand.MEDIUM) == IccResult(0.5, IccBand.MEDIUM)
        assert IccResult(None, None).is_missing
