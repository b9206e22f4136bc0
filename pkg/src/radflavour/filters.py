"""Whole-volume pre-processing filters used as extraction flavours.

Three families:

* Laplacian of Gaussian at a physical sigma (mm), sampled kernel.
* Single-level stationary Haar wavelet bands, one L/H letter per axis
  in (x, y, z) order.
* Pointwise intensity rescales (square, sqrt, logarithm, exponential)
  plus the gradient magnitude.

All filters keep the input dims; outputs carry unit ARBITRARY since
the intensity scale is no longer the acquisition scale.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import signal

from .core import DomainError, FlavourAxis, FlavourKey, Unit, Volume

WAVELET_BANDS = ("HHH", "HHL", "HLH", "HLL", "LHH", "LHL", "LLH", "LLL")
SCALAR_KINDS = ("square", "sqrt", "logarithm", "exponential", "gradient")


def _log_kernel(spacing, sigma_mm: float, planar: bool) -> np.ndarray:
    """Sampled Laplacian-of-Gaussian kernel in physical units.

    Truncated at radius 4 sigma per axis and DC-corrected so the
    entries sum to exactly zero.
    """
    ndim = 2 if planar else 3
    axes = []
    for a in range(3):
        if planar and a == 2:
            axes.append(np.zeros(1))
            continue
        r = int(np.floor(4.0 * sigma_mm / spacing[a]))
        axes.append(np.arange(-r, r + 1, dtype=np.float64) * spacing[a])
    xx, yy, zz = np.meshgrid(*axes, indexing="ij")
    r2 = xx ** 2 + yy ** 2 + zz ** 2
    s2 = sigma_mm ** 2
    gauss = np.exp(-r2 / (2.0 * s2)) / (2.0 * np.pi * s2) ** (ndim / 2.0)
    kern = (r2 - ndim * s2) / s2 ** 2 * gauss
    measure = spacing[0] * spacing[1] * (1.0 if planar else spacing[2])
    kern *= measure
    return kern - kern.mean()


def apply_log(volume: Volume, sigma_mm: float) -> Volume:
    if sigma_mm <= 0:
        raise DomainError("LoG sigma must be positive")
    if sigma_mm < 0.5 * min(volume.spacing):
        warnings.warn("LoG sigma %g mm is below half the voxel spacing; "
                      "the sampled kernel is badly resolved" % sigma_mm,
                      stacklevel=2)
    planar = volume.dims[2] == 1
    kern = _log_kernel(volume.spacing, sigma_mm, planar)
    # FFT convolution over a symmetric pad reproduces ndimage's
    # "reflect" boundary at a fraction of the cost for wide kernels.
    radii = [s // 2 for s in kern.shape]
    padded = np.pad(volume.data, [(r, r) for r in radii], mode="symmetric")
    out = signal.fftconvolve(padded, kern, mode="valid")
    return volume.with_data(out, unit=Unit.ARBITRARY)


def _haar_axis(data: np.ndarray, axis: int, high: bool) -> np.ndarray:
    """out[i] = (f[i] -/+ f[i+1]) / 2 with reflective boundary (f[n] = f[n-1])."""
    n = data.shape[axis]
    idx = np.arange(1, n + 1)
    idx[-1] = n - 1
    nxt = np.take(data, idx, axis=axis)
    if high:
        return 0.5 * (data - nxt)
    return 0.5 * (data + nxt)


def apply_wavelet_band(volume: Volume, band: str) -> Volume:
    """One band of the single-level stationary Haar decomposition.

    ``band`` has one letter per axis in (x, y, z) order; L has DC gain
    1 and H kills constants.
    """
    band = band.upper()
    if band not in WAVELET_BANDS:
        raise DomainError(f"unknown wavelet band {band!r}")
    if min(volume.dims) < 2:
        raise DomainError("wavelet bands need at least 2 voxels per axis")
    out = volume.data
    for axis, letter in enumerate(band):
        out = _haar_axis(out, axis, letter == "H")
    return volume.with_data(out, unit=Unit.ARBITRARY)


def _gradient_magnitude(volume: Volume) -> np.ndarray:
    axes = [a for a in range(3) if volume.dims[a] > 1]
    if not axes:
        return np.zeros(volume.dims)
    grads = np.gradient(volume.data.squeeze(),
                        *[volume.spacing[a] for a in axes])
    if len(axes) == 1:
        grads = [grads]
    mag = np.sqrt(np.sum([g ** 2 for g in grads], axis=0))
    return mag.reshape(volume.dims)


def apply_intensity_transform(volume: Volume, kind: str) -> Volume:
    kind = kind.lower()
    x = volume.data
    if kind == "square":
        out = x ** 2 * np.sign(x)
    elif kind == "sqrt":
        out = np.sign(x) * np.sqrt(np.abs(x))
    elif kind == "logarithm":
        out = np.sign(x) * np.log1p(np.abs(x))
    elif kind == "exponential":
        c = np.max(np.abs(x))
        out = np.exp(x / (c if c > 0 else 1.0))
    elif kind == "gradient":
        out = _gradient_magnitude(volume)
    else:
        raise DomainError(f"unknown intensity transform {kind!r}")
    return volume.with_data(out, unit=Unit.ARBITRARY)


def filter_flavour_grid(log_sigmas=(), wavelet_bands=(),
                        scalar_kinds=()) -> list[FlavourKey]:
    """FILTER flavour keys for LoG sigmas, wavelet bands and pointwise kinds."""
    keys = []
    for s in log_sigmas:
        s = float(s)
        if s <= 0:
            raise DomainError("LoG sigma must be positive")
        keys.append(FlavourKey.make(FlavourAxis.FILTER, kind="log", sigma_mm=s))
    for band in wavelet_bands:
        band = str(band).upper()
        if band not in WAVELET_BANDS:
            raise DomainError(f"unknown wavelet band {band!r}")
        keys.append(FlavourKey.make(FlavourAxis.FILTER, kind="wavelet",
                                    band=band))
    for kind in scalar_kinds:
        kind = str(kind).lower()
        if kind not in SCALAR_KINDS:
            raise DomainError(f"unknown intensity transform {kind!r}")
        keys.append(FlavourKey.make(FlavourAxis.FILTER, kind=kind))
    if len(set(keys)) != len(keys):
        raise DomainError("duplicate filter flavours")
    return keys


def apply_filter(volume: Volume, key: FlavourKey) -> Volume:
    """Dispatch a FILTER flavour key onto the matching operation."""
    if key.axis is not FlavourAxis.FILTER:
        raise DomainError(f"not a filter flavour: {key}")
    kind = key.get("kind")
    if kind == "log":
        return apply_log(volume, float(key.require("sigma_mm")))
    if kind == "wavelet":
        return apply_wavelet_band(volume, str(key.require("band")))
    if kind in SCALAR_KINDS:
        return apply_intensity_transform(volume, kind)
    raise DomainError(f"unknown filter kind {kind!r}")
