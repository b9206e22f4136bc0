"""Gray-level discretization: fixed bin width (FBW) and fixed bin count (FBC).

FBW anchors bins at the ROI minimum, so levels are invariant to constant
intensity shifts.  FBC stretches the ROI range over N bins (the maximum
maps into bin N), so levels are invariant to any positive affine rescale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DomainError, FlavourAxis, FlavourKey


@dataclass(frozen=True)
class DiscretizedRoi:
    """Integer levels (1..ng) for each masked voxel, in canonical order."""

    levels: np.ndarray
    ng: int
    scheme: str        # "fbw" or "fbc"
    param: float       # bin width or bin count
    anchor: tuple[float, float]  # (roi min, roi max)

    def __post_init__(self):
        if self.ng < 1:
            raise DomainError(f"ng must be >= 1, got {self.ng}")

    def histogram(self) -> np.ndarray:
        """Counts per level, length ng (sums to the number of voxels)."""
        return np.bincount(self.levels, minlength=self.ng + 1)[1:]


def _check_values(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise DomainError("cannot discretize an empty value list")
    if not np.all(np.isfinite(arr)):
        raise DomainError("values must be finite")
    return arr


def discretize_fbw(values, width: float) -> DiscretizedRoi:
    """Fixed bin width: level(x) = floor((x - min)/width) + 1."""
    arr = _check_values(values)
    width = float(width)
    if width <= 0:
        raise DomainError(f"bin width must be positive, got {width}")
    lo = float(arr.min())
    hi = float(arr.max())
    levels = np.floor((arr - lo) / width).astype(np.int64) + 1
    return DiscretizedRoi(levels, int(levels.max()), "fbw", width, (lo, hi))


def discretize_fbc(values, count: int) -> DiscretizedRoi:
    """Fixed bin count: level(x) = min(N, floor(N*(x - min)/(max - min)) + 1).

    A constant input maps every voxel to level 1 with ng = 1.
    """
    arr = _check_values(values)
    count = int(count)
    if count < 2:
        raise DomainError(f"bin count must be >= 2, got {count}")
    lo = float(arr.min())
    hi = float(arr.max())
    if hi == lo:
        levels = np.ones(arr.shape, dtype=np.int64)
        return DiscretizedRoi(levels, 1, "fbc", count, (lo, hi))
    levels = np.floor(count * (arr - lo) / (hi - lo)).astype(np.int64) + 1
    np.minimum(levels, count, out=levels)
    return DiscretizedRoi(levels, count, "fbc", count, (lo, hi))


def discretize(values, scheme: str, param) -> DiscretizedRoi:
    if scheme == "fbw":
        return discretize_fbw(values, param)
    if scheme == "fbc":
        return discretize_fbc(values, param)
    raise DomainError(f"unknown discretization scheme {scheme!r}")


def _check_unique_positive(entries, what: str):
    seen = set()
    for e in entries:
        if e <= 0:
            raise DomainError(f"{what} entries must be positive, got {e}")
        if e in seen:
            raise DomainError(f"duplicate {what} entry {e}")
        seen.add(e)


def bin_flavour_grid(widths=(), counts=()) -> list[FlavourKey]:
    """One BIN_WIDTH key per width and one BIN_COUNT key per count."""
    widths = [float(w) for w in widths]
    counts = [int(c) for c in counts]
    _check_unique_positive(widths, "width")
    _check_unique_positive(counts, "count")
    keys = [FlavourKey.make(FlavourAxis.BIN_WIDTH, width=w) for w in widths]
    keys += [FlavourKey.make(FlavourAxis.BIN_COUNT, count=c) for c in counts]
    return keys
