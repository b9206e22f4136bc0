"""Core domain types: volumes, ROI masks, cases, and flavour keys.

Conventions shared by every other module:

* Voxels are addressed as ``[x, y, z]``; the canonical flat ordering is
  x-fastest (x varies quickest, then y, then z).
* Volumes and masks are immutable after construction, so they can be
  shared freely across parallel case/flavour workers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates


class Unit(Enum):
    """Intensity semantics of a volume."""

    HU = "HU"
    SUV = "SUV"
    ARBITRARY = "ARBITRARY"


class Interp(Enum):
    NEAREST = "nearest"
    TRILINEAR = "trilinear"


class FlavourAxis(Enum):
    BIN_WIDTH = "bin_width"
    BIN_COUNT = "bin_count"
    PERTURB = "perturb"
    FILTER = "filter"
    FUSION = "fusion"
    VANILLA = "vanilla"


class DomainError(ValueError):
    """Raised when a domain invariant or operation contract is violated."""


class Volume:
    """A 3D scalar grid with physical spacing and an intensity unit tag.

    ``data`` is stored as a float64 array of shape ``(nx, ny, nz)`` indexed
    ``[x, y, z]`` and frozen after construction.
    """

    __slots__ = ("data", "spacing", "unit")

    def __init__(self, data, spacing=(1.0, 1.0, 1.0), unit: Unit = Unit.ARBITRARY):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 3:
            raise DomainError(f"volume data must be 3D, got shape {arr.shape}")
        if arr.size == 0:
            raise DomainError("volume data must be non-empty")
        if not np.all(np.isfinite(arr)):
            raise DomainError("volume data must be finite")
        sp = tuple(float(s) for s in spacing)
        if len(sp) != 3 or any(not np.isfinite(s) or s <= 0.0 for s in sp):
            raise DomainError(f"spacing must be three positive floats, got {spacing!r}")
        arr.flags.writeable = False
        self.data = arr
        self.spacing = sp
        self.unit = unit

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def flat(self) -> np.ndarray:
        """Data in canonical x-fastest order."""
        return self.data.ravel(order="F")

    @classmethod
    def from_flat(cls, flat, dims, spacing=(1.0, 1.0, 1.0), unit: Unit = Unit.ARBITRARY) -> "Volume":
        flat = np.asarray(flat, dtype=np.float64)
        nx, ny, nz = dims
        if flat.size != nx * ny * nz:
            raise DomainError(f"flat data length {flat.size} does not match dims {dims}")
        return cls(flat.reshape((nx, ny, nz), order="F"), spacing, unit)

    def with_data(self, data, unit: Optional[Unit] = None) -> "Volume":
        return Volume(data, self.spacing, self.unit if unit is None else unit)

    def __repr__(self):
        return f"Volume(dims={self.dims}, spacing={self.spacing}, unit={self.unit.value})"


class RoiMask:
    """A binary grid aligned to a volume.

    A mask may be degenerate (empty); extraction operations reject
    degenerate masks and report which flavour produced them.
    """

    __slots__ = ("mask",)

    def __init__(self, mask):
        arr = np.array(mask, dtype=bool)
        if arr.ndim != 3:
            raise DomainError(f"mask must be 3D, got shape {arr.shape}")
        arr.flags.writeable = False
        self.mask = arr

    @classmethod
    def from_indices(cls, indices, dims) -> "RoiMask":
        arr = np.zeros(dims, dtype=bool)
        for idx in indices:
            x, y, z = idx
            if not (0 <= x < dims[0] and 0 <= y < dims[1] and 0 <= z < dims[2]):
                raise DomainError(f"mask index {idx} out of bounds for dims {dims}")
            arr[x, y, z] = True
        return cls(arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.mask.shape

    @property
    def n_voxels(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    def indices(self) -> np.ndarray:
        """Included voxel indices as an (n, 3) array in canonical order."""
        flat = np.flatnonzero(self.mask.ravel(order="F"))
        xyz = np.unravel_index(flat, self.dims, order="F")
        return np.stack(xyz, axis=1)

    def with_mask(self, mask) -> "RoiMask":
        return RoiMask(mask)

    def __repr__(self):
        return f"RoiMask(dims={self.dims}, n_voxels={self.n_voxels})"


# Parameter values in a flavour key are ints, floats, or short tokens.
_TOKEN_RE = re.compile(r"^[A-Za-z0-9_.+-]+$")


@dataclass(frozen=True, order=True)
class FlavourKey:
    """Typed identifier of one parameter combination along a flavour axis.

    The canonical string form (``axis(name=value;...)``) is unique per key
    and round-trips through :meth:`parse`.
    """

    axis: FlavourAxis = field(compare=False)
    params: tuple[tuple[str, object], ...] = field(default=(), compare=False)
    # Sorting and equality go through the canonical string so that the
    # "flavour canonical order" used for tensor axes is one fixed rule.
    canonical: str = field(init=False, compare=True)

    def __post_init__(self):
        for name, value in self.params:
            if not _TOKEN_RE.match(name):
                raise DomainError(f"bad parameter name {name!r}")
            if isinstance(value, str) and not _TOKEN_RE.match(value):
                raise DomainError(f"bad parameter value {value!r}")
        names = [name for name, _ in self.params]
        if len(set(names)) != len(names):
            raise DomainError(f"duplicate flavour parameter in {names}")
        if self.axis is FlavourAxis.VANILLA:
            if self.params:
                raise DomainError("the vanilla flavour takes no parameters")
        elif not self.params:
            raise DomainError(
                f"flavour axis {self.axis.value!r} needs parameters")
        # Parameters are sorted by name so the canonical form does not
        # depend on construction order.
        object.__setattr__(self, "params",
                           tuple(sorted(self.params, key=lambda kv: kv[0])))
        object.__setattr__(self, "canonical", self._format())

    def _format(self) -> str:
        if not self.params:
            return self.axis.value
        parts = []
        for name, value in self.params:
            if isinstance(value, bool):
                raise DomainError("boolean flavour parameters are not supported")
            if isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            parts.append(f"{name}={text}")
        return f"{self.axis.value}({';'.join(parts)})"

    @classmethod
    def make(cls, axis: FlavourAxis, **params) -> "FlavourKey":
        return cls(axis, tuple(params.items()))

    @classmethod
    def vanilla(cls) -> "FlavourKey":
        return cls(FlavourAxis.VANILLA)

    @classmethod
    def parse(cls, text: str) -> "FlavourKey":
        m = re.match(r"^([a-z_]+)(?:\((.*)\))?$", text)
        if not m:
            raise DomainError(f"unparseable flavour key {text!r}")
        try:
            axis = FlavourAxis(m.group(1))
        except ValueError:
            raise DomainError(f"unknown flavour axis {m.group(1)!r}") from None
        params = []
        body = m.group(2)
        if body:
            for part in body.split(";"):
                name, _, raw = part.partition("=")
                if not _:
                    raise DomainError(f"malformed flavour parameter {part!r} in {text!r}")
                params.append((name, _parse_value(raw)))
        return cls(axis, tuple(params))

    def get(self, name: str, default=None):
        for key, value in self.params:
            if key == name:
                return value
        return default

    def require(self, name: str):
        value = self.get(name)
        if value is None:
            raise DomainError(f"flavour {self.canonical!r} is missing the "
                              f"required parameter {name!r}")
        return value

    def __str__(self):
        return self.canonical

    def __repr__(self):
        return f"FlavourKey({self.canonical!r})"


def _parse_value(raw: str):
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if not _TOKEN_RE.match(raw):
        raise DomainError(f"bad parameter value {raw!r}")
    return raw


@dataclass
class Case:
    """One sample: volumes keyed by unit, a mask, and an optional label.

    ``patient_id`` is the grouping key used by group-aware cross
    validation; several cases (e.g. lesions or slices) may share it.
    """

    case_id: str
    patient_id: str
    volumes: dict[Unit, Volume]
    mask: RoiMask
    label: Optional[int] = None

    def __post_init__(self):
        if not self.patient_id:
            raise DomainError("patient_id must be non-empty")
        if not self.volumes:
            raise DomainError("a case needs at least one volume")
        for unit, vol in self.volumes.items():
            if vol.dims != self.mask.dims:
                raise DomainError(
                    f"case {self.case_id}: volume {unit.value} dims {vol.dims} "
                    f"!= mask dims {self.mask.dims}"
                )
        if self.label is not None and self.label not in (0, 1):
            raise DomainError(f"label must be binary, got {self.label!r}")

    def volume(self, unit: Optional[Unit] = None) -> Volume:
        """The volume for ``unit``, or the only volume if just one exists."""
        if unit is not None:
            if unit not in self.volumes:
                raise DomainError(f"case {self.case_id} has no {unit.value} volume")
            return self.volumes[unit]
        if len(self.volumes) == 1:
            return next(iter(self.volumes.values()))
        raise DomainError(f"case {self.case_id} has several volumes; specify a unit")


def roi_values(volume: Volume, mask: RoiMask) -> np.ndarray:
    """Masked voxel values in canonical (x-fastest) order.

    Deterministic: repeated calls yield the identical sequence.
    """
    if volume.dims != mask.dims:
        raise DomainError(f"volume dims {volume.dims} != mask dims {mask.dims}")
    if mask.is_empty:
        raise DomainError("mask is empty")
    return volume.flat()[mask.mask.ravel(order="F")]


def resample_translate(volume: Volume, shift, interp: Interp = Interp.TRILINEAR) -> Volume:
    """Translate a volume by a (possibly fractional) voxel shift.

    The output samples the input at ``index + shift``; out-of-field
    samples replicate the nearest edge voxel.  Shift components are
    limited to 2 voxels to guard against degenerate perturbations.
    """
    shift = tuple(float(s) for s in shift)
    if len(shift) != 3 or any(not np.isfinite(s) for s in shift):
        raise DomainError(f"shift must be three finite floats, got {shift!r}")
    if any(abs(s) > 2.0 for s in shift):
        raise DomainError(f"shift components must not exceed 2 voxels, got {shift!r}")
    coords = np.meshgrid(
        np.arange(volume.dims[0], dtype=np.float64) + shift[0],
        np.arange(volume.dims[1], dtype=np.float64) + shift[1],
        np.arange(volume.dims[2], dtype=np.float64) + shift[2],
        indexing="ij",
    )
    order = 0 if interp is Interp.NEAREST else 1
    out = map_coordinates(volume.data, coords, order=order, mode="nearest")
    return Volume(out, volume.spacing, volume.unit)
