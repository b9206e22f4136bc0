"""Flavour dispatch: from a case and a FlavourKey to a feature vector.

A flavour key selects one preparation of the inputs (discretization
parameters, a pre-processing filter, a segmentation perturbation or a
PET/CT fusion); extraction then always computes the same fixed
catalog.  Degenerate ROIs (e.g. eroded away by a perturbation) yield
an all-missing vector carrying a diagnostic instead of an exception,
so batch runs keep their row structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..core import (Case, DomainError, FlavourAxis, FlavourKey, Interp, Unit,
                    roi_values)
from ..discretize import discretize
from ..filters import apply_filter
from ..fuse import apply_fusion
from ..perturb import MIN_ROI_VOXELS, DegenerateRoiError, apply_perturbation
from .catalog import ALL_FEATURES
from .firstorder import first_order
from .texture import levels_grid, texture_features


@dataclass
class ExtractConfig:
    """Extraction-wide settings shared by all flavours.

    ``scheme``/``param`` is the discretization used by every flavour
    that does not carry its own (bin flavours do).  Filtered and fused
    intensities live on arbitrary scales, which is why the default is
    a fixed bin count rather than a fixed width.
    """

    scheme: str = "fbc"
    param: float = 32
    primary_unit: Optional[Unit] = None
    fusion_units: tuple[Unit, Unit] = (Unit.SUV, Unit.HU)
    min_roi_voxels: int = MIN_ROI_VOXELS
    interp: Interp = Interp.TRILINEAR


@dataclass
class FeatureVector:
    """Ordered name -> value map over the catalog; None marks missing."""

    flavour: FlavourKey
    values: dict = field(default_factory=dict)
    diagnostic: Optional[str] = None

    def __post_init__(self):
        unknown = set(self.values) - set(ALL_FEATURES)
        if unknown:
            raise DomainError(f"unknown feature names {sorted(unknown)}")

    @property
    def is_missing(self) -> bool:
        return all(v is None for v in self.as_list())

    def as_list(self) -> list:
        """Values aligned to the catalog order."""
        return [self.values.get(name) for name in ALL_FEATURES]

    def __getitem__(self, name: str):
        return self.values[name]


def _missing(flavour: FlavourKey, diagnostic: str) -> FeatureVector:
    return FeatureVector(flavour, {name: None for name in ALL_FEATURES},
                         diagnostic)


def extract(case: Case, flavour: FlavourKey,
            config: Optional[ExtractConfig] = None) -> FeatureVector:
    """Compute the full catalog for one case under one flavour."""
    if config is None:
        config = ExtractConfig()
    mask = case.mask
    scheme, param = config.scheme, config.param

    axis = flavour.axis
    if axis is FlavourAxis.FUSION:
        ua, ub = config.fusion_units
        if ua not in case.volumes or ub not in case.volumes:
            raise DomainError(
                f"case {case.case_id} lacks the units {ua.value}/{ub.value} "
                f"needed by {flavour}")
        volume = apply_fusion(case.volume(ua), case.volume(ub), flavour)
    else:
        volume = case.volume(config.primary_unit)
        if axis is FlavourAxis.VANILLA:
            pass
        elif axis is FlavourAxis.BIN_WIDTH:
            scheme, param = "fbw", float(flavour.require("width"))
        elif axis is FlavourAxis.BIN_COUNT:
            scheme, param = "fbc", int(flavour.require("count"))
        elif axis is FlavourAxis.FILTER:
            volume = apply_filter(volume, flavour)
        elif axis is FlavourAxis.PERTURB:
            try:
                volume, mask = apply_perturbation(
                    volume, mask, flavour,
                    min_roi_voxels=config.min_roi_voxels,
                    interp=config.interp)
            except DegenerateRoiError as err:
                return _missing(flavour, str(err))
        else:
            raise DomainError(f"unhandled flavour axis {axis}")

    if mask.is_empty:
        return _missing(flavour, "empty ROI")
    values = roi_values(volume, mask)
    disc = discretize(values, scheme, param)
    out = dict(first_order(values, disc))
    out.update(texture_features(levels_grid(disc, mask), disc.ng))
    return FeatureVector(flavour, out)


def extract_many(case: Case, flavours, config=None) -> dict:
    """FlavourKey -> FeatureVector for each requested flavour."""
    return {flavour: extract(case, flavour, config) for flavour in flavours}
