"""The cases x features x flavours tensor and its analyses.

Assembly from feature tables, flavour-combination enumeration,
concatenated slicing, correlation pruning, PCA aggregation across
flavours, and test-retest repeatability (ICC with banding).

Missing values are carried as NaN; a (feature, flavour) column is
either complete or listed by :meth:`FeatureTensor.incomplete_columns`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .core import DomainError, FlavourKey
from .io import FeatureTable, FormatError

MAX_ENUM_FLAVOURS = 20


class IccBand(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    EXCELLENT = "excellent"


# band cut points for the absolute ICC value
ICC_CUTS = (0.50, 0.75, 0.90)


@dataclass(frozen=True)
class IccResult:
    value: Optional[float]
    band: Optional[IccBand]

    @property
    def is_missing(self) -> bool:
        return self.value is None


def _band(value: float) -> IccBand:
    if value < ICC_CUTS[0]:
        return IccBand.LOW
    if value < ICC_CUTS[1]:
        return IccBand.MEDIUM
    if value < ICC_CUTS[2]:
        return IccBand.HIGH
    return IccBand.EXCELLENT


@dataclass
class FeatureTensor:
    """Immutable-by-convention 3D array with named axes.

    ``values[i, j, k]`` is feature ``features[j]`` of case ``cases[i]``
    under flavour ``flavours[k]``; NaN marks missing.  ``labels`` and
    ``groups``, when present, align with ``cases``.
    """

    cases: tuple[str, ...]
    features: tuple[str, ...]
    flavours: tuple[FlavourKey, ...]
    values: np.ndarray
    labels: Optional[np.ndarray] = None
    groups: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expect = (len(self.cases), len(self.features), len(self.flavours))
        if self.values.shape != expect:
            raise DomainError(
                f"tensor values shape {self.values.shape} does not match "
                f"axis metadata {expect}")
        if len(set(self.flavours)) != len(self.flavours):
            raise DomainError("duplicate flavour keys")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (len(self.cases),):
                raise DomainError("labels do not align with cases")
        if self.groups is not None and len(self.groups) != len(self.cases):
            raise DomainError("groups do not align with cases")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def flavour_index(self, flavour: FlavourKey) -> int:
        try:
            return self.flavours.index(flavour)
        except ValueError:
            raise DomainError(f"unknown flavour {flavour}") from None

    def feature_index(self, feature: str) -> int:
        try:
            return self.features.index(feature)
        except ValueError:
            raise DomainError(f"unknown feature {feature!r}") from None

    def incomplete_columns(self) -> list[tuple[str, FlavourKey]]:
        """(feature, flavour) columns containing at least one NaN."""
        bad = np.isnan(self.values).any(axis=0)
        out = []
        for j, f in enumerate(self.features):
            for k, fl in enumerate(self.flavours):
                if bad[j, k]:
                    out.append((f, fl))
        return out


def assemble(tables, labels=None, groups=None) -> FeatureTensor:
    """Build a tensor from one FeatureTable or several to be merged.

    Axis order is deterministic: case ids lexical, features in table
    column order, flavours in canonical-string order.  Every flavour
    must cover every case.
    """
    if isinstance(tables, FeatureTable):
        tables = [tables]
    tables = list(tables)
    if not tables:
        raise DomainError("no feature tables to assemble")
    names = tables[0].feature_names
    for t in tables[1:]:
        if t.feature_names != names:
            raise DomainError("feature tables disagree on feature names")
    rows: dict = {}
    for t in tables:
        for (case_id, flavour_text), vals in t.rows():
            key = (case_id, FlavourKey.parse(flavour_text))
            if key in rows:
                raise DomainError(
                    f"duplicate row for case {case_id!r}, flavour {key[1]}")
            rows[key] = vals
    cases = tuple(sorted({cid for cid, _ in rows}))
    flavours = tuple(sorted({fl for _, fl in rows}))
    values = np.full((len(cases), len(names), len(flavours)), np.nan)
    for k, fl in enumerate(flavours):
        for i, cid in enumerate(cases):
            if (cid, fl) not in rows:
                raise DomainError(
                    f"flavour {fl} is missing case {cid!r}")
            vals = rows[(cid, fl)]
            values[i, :, k] = [np.nan if v is None else v for v in vals]
    lab = None
    if labels is not None:
        lab = np.asarray([labels[cid] for cid in cases])
    grp = None
    if groups is not None:
        grp = tuple(groups[cid] for cid in cases)
    return FeatureTensor(cases, tuple(names), flavours, values, lab, grp)


def enumerate_flavour_combinations(flavours, min_size: int = 2) -> list[tuple]:
    """All subsets with at least ``min_size`` flavours, deterministic order
    (by size, then by index order).  2^n - n - 1 subsets for min_size 2."""
    flavours = list(flavours)
    n = len(flavours)
    if n > MAX_ENUM_FLAVOURS:
        raise DomainError(
            f"{n} flavours exceed the enumeration guard ({MAX_ENUM_FLAVOURS})")
    out = []
    for size in range(min_size, n + 1):
        out.extend(itertools.combinations(flavours, size))
    return out


def slice_concat(tensor: FeatureTensor, subset) -> tuple[np.ndarray, list[str]]:
    """Concatenate flavour slices into a cases x (features * |subset|)
    matrix; flavour-major column order, names ``<flavour>::<feature>``."""
    subset = list(subset)
    if not subset:
        raise DomainError("empty flavour subset")
    blocks = []
    names = []
    for fl in subset:
        k = tensor.flavour_index(fl)
        blocks.append(tensor.values[:, :, k])
        names.extend(f"{fl.canonical}::{feat}" for feat in tensor.features)
    return np.concatenate(blocks, axis=1), names


def prune_correlated(matrix: np.ndarray, names=None, threshold: float = 0.95):
    """Drop redundant columns.

    Constant columns go first (their correlation is undefined, treated
    as redundant); then columns are scanned in order and dropped when
    |Pearson r| with any retained earlier column exceeds the
    threshold.  Returns (pruned matrix, kept names, dropped names).
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("pruning needs a 2D matrix with at least 2 rows")
    p = x.shape[1]
    if names is None:
        names = [f"c{j}" for j in range(p)]
    names = list(names)
    std = x.std(axis=0)
    kept: list[int] = []
    dropped: list[str] = []
    for j in range(p):
        if std[j] == 0:
            dropped.append(names[j])
            continue
        redundant = False
        for i in kept:
            xi = x[:, i]
            xj = x[:, j]
            r = np.corrcoef(xi, xj)[0, 1]
            if np.abs(r) > threshold:
                redundant = True
                break
        if redundant:
            dropped.append(names[j])
        else:
            kept.append(j)
    return x[:, kept], [names[j] for j in kept], dropped


def zscore_columns(matrix: np.ndarray) -> np.ndarray:
    """Column-wise z-score with population (ddof=0) scaling; constant
    columns become zeros."""
    x = np.asarray(matrix, dtype=np.float64)
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    return (x - mu) / sd


def pca_first_component(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores and loadings of the first principal component.

    Columns are z-scored first.  The loading sign is fixed so the
    loading sum is >= 0 (largest-magnitude loading positive on a zero
    sum), making aggregated features reproducible.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise DomainError("PCA aggregation needs at least 2 columns")
    if x.shape[0] < 3:
        raise DomainError("PCA aggregation needs at least 3 rows")
    if np.all(x.std(axis=0) == 0):
        raise DomainError("all columns constant; nothing to aggregate")
    z = zscore_columns(x)
    cov = z.T @ z / z.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    s = v.sum()
    if s < 0 or (s == 0 and v[int(np.argmax(np.abs(v)))] < 0):
        v = -v
    return z @ v, v


def pca_aggregate(tensor: FeatureTensor, feature: str) -> np.ndarray:
    """Aggregate a feature's flavour columns into one score per case."""
    j = tensor.feature_index(feature)
    scores, _ = pca_first_component(tensor.values[:, j, :])
    return scores


def icc(test, retest, variant: str = "1,1") -> IccResult:
    """Two-session intraclass correlation with repeatability banding.

    ``variant`` "1,1" is the one-way random single-measurement form
    (MSB - MSW)/(MSB + MSW); "3,1" is the two-way consistency form.
    Zero total variance makes the ICC undefined (missing result).
    """
    a = np.asarray(test, dtype=np.float64)
    b = np.asarray(retest, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("paired 1D test/retest arrays required")
    n = a.size
    if n < 3:
        raise DomainError("ICC needs at least 3 cases")
    if np.isnan(a).any() or np.isnan(b).any():
        return IccResult(None, None)
    k = 2
    x = np.stack([a, b], axis=1)
    grand = x.mean()
    case_means = x.mean(axis=1)
    msb = k * ((case_means - grand) ** 2).sum() / (n - 1)
    msw = ((x - case_means[:, None]) ** 2).sum() / (n * (k - 1))
    if variant == "1,1":
        den = msb + (k - 1) * msw
        if den == 0:
            return IccResult(None, None)
        value = (msb - msw) / den
    elif variant == "3,1":
        session_means = x.mean(axis=0)
        sse = ((x - case_means[:, None] - session_means[None, :] + grand) ** 2).sum()
        mse = sse / ((n - 1) * (k - 1))
        den = msb + (k - 1) * mse
        if den == 0:
            return IccResult(None, None)
        value = (msb - mse) / den
    else:
        raise DomainError(f"unknown ICC variant {variant!r}")
    return IccResult(float(value), _band(float(value)))


@dataclass
class RepeatabilityReport:
    """Per-feature ICC for each flavour and for the PCA-aggregated
    feature, mirroring the flavour-vs-aggregate comparison."""

    features: tuple[str, ...]
    flavours: tuple[FlavourKey, ...]
    per_flavour: dict = field(default_factory=dict)   # feature -> {canonical: IccResult}
    aggregated: dict = field(default_factory=dict)    # feature -> IccResult

    def band_counts(self, which: str = "aggregated") -> dict:
        counts = {band.value: 0 for band in IccBand}
        counts["missing"] = 0
        if which == "aggregated":
            results = list(self.aggregated.values())
        else:
            results = [r for per in self.per_flavour.values()
                       for r in per.values()]
        for r in results:
            if r.is_missing:
                counts["missing"] += 1
            else:
                counts[r.band.value] += 1
        return counts

    def to_json_dict(self) -> dict:
        return {
            "features": list(self.features),
            "flavours": [fl.canonical for fl in self.flavours],
            "per_flavour": {
                f: {c: [r.value, r.band.value if r.band else None]
                    for c, r in per.items()}
                for f, per in self.per_flavour.items()},
            "aggregated": {
                f: [r.value, r.band.value if r.band else None]
                for f, r in self.aggregated.items()},
            "band_counts": {
                "aggregated": self.band_counts("aggregated"),
                "per_flavour": self.band_counts("per_flavour")},
        }


def save_tensor(tensor: FeatureTensor, path) -> None:
    """Write a tensor as JSON (NaN encoded as null) for CLI handoff."""
    values = [[[None if np.isnan(v) else float(v) for v in row]
               for row in plane]
              for plane in tensor.values]
    doc = {
        "format": "feature-tensor-v1",
        "cases": list(tensor.cases),
        "features": list(tensor.features),
        "flavours": [fl.canonical for fl in tensor.flavours],
        "values": values,
        "labels": None if tensor.labels is None
        else [int(v) for v in tensor.labels],
        "groups": None if tensor.groups is None else list(tensor.groups),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_tensor(path) -> FeatureTensor:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "feature-tensor-v1":
        raise FormatError(f"{path}: unrecognized tensor format")
    values = np.array([[[np.nan if v is None else v for v in row]
                        for row in plane]
                       for plane in doc["values"]], dtype=np.float64)
    if values.size == 0:
        values = values.reshape(len(doc["cases"]), len(doc["features"]),
                                len(doc["flavours"]))
    return FeatureTensor(
        cases=tuple(doc["cases"]),
        features=tuple(doc["features"]),
        flavours=tuple(FlavourKey.parse(s) for s in doc["flavours"]),
        values=values,
        labels=None if doc["labels"] is None else np.asarray(doc["labels"]),
        groups=None if doc["groups"] is None else tuple(doc["groups"]))


def tr_repeatability_report(test: FeatureTensor,
                            retest: FeatureTensor,
                            variant: str = "1,1") -> RepeatabilityReport:
    """ICC per (feature, flavour) plus the aggregated-feature ICC.

    The PCA aggregation is fitted on the stacked test and retest rows
    so both sessions share one loading vector; flavour columns with
    missing values are left out of the aggregation.
    """
    if (test.cases != retest.cases or test.features != retest.features
            or test.flavours != retest.flavours):
        raise DomainError("test and retest tensors have mismatched axes")
    report = RepeatabilityReport(test.features, test.flavours)
    n = len(test.cases)
    for j, feat in enumerate(test.features):
        per = {}
        complete = []
        for k, fl in enumerate(test.flavours):
            a = test.values[:, j, k]
            b = retest.values[:, j, k]
            per[fl.canonical] = icc(a, b, variant)
            if not (np.isnan(a).any() or np.isnan(b).any()):
                complete.append(k)
        report.per_flavour[feat] = per
        stacked = np.concatenate([test.values[:, j, complete],
                                  retest.values[:, j, complete]], axis=0)
        if len(complete) >= 2:
            try:
                scores, _ = pca_first_component(stacked)
            except DomainError:
                report.aggregated[feat] = IccResult(None, None)
                continue
        elif len(complete) == 1:
            # one usable flavour: the aggregate degenerates to its
            # z-score, which leaves the ICC unchanged
            scores = zscore_columns(stacked)[:, 0]
        else:
            report.aggregated[feat] = IccResult(None, None)
            continue
        report.aggregated[feat] = icc(scores[:n], scores[n:], variant)
    return report
