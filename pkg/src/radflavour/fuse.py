"""Image-level fusion of two co-registered volumes (e.g. PET and CT).

Methods: weighted averaging, PCA weighting, Laplacian pyramid (LP),
ratio-of-low-pass pyramid (RP) and decimated orthonormal Haar wavelet
(DWT).  Both inputs are min-max normalized to [0, 1] first; detail
bands merge by the max-absolute rule (max deviation from 1 for RP) and
base/approximation bands by averaging.  Fused volumes carry unit
ARBITRARY.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import DomainError, FlavourAxis, FlavourKey, Unit, Volume

RP_EPS = 1e-6
_SQRT2 = np.sqrt(2.0)
# Burt-Adelson smoothing kernel
_PYR_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def minmax01(volume: Volume) -> Volume:
    """Min-max normalize to [0, 1].

    A constant volume has no range to stretch; its value is clipped
    into [0, 1] instead of being zeroed, so fusing two constants gives
    their (clipped) average rather than 0.
    """
    lo = float(volume.data.min())
    hi = float(volume.data.max())
    if hi > lo:
        out = (volume.data - lo) / (hi - lo)
    else:
        out = np.clip(volume.data, 0.0, 1.0)
    return volume.with_data(out, unit=Unit.ARBITRARY)


def _check_dims(a: Volume, b: Volume):
    if a.dims != b.dims:
        raise DomainError(f"fusion inputs have different dims {a.dims} vs {b.dims}")


def fuse_weighted(a: Volume, b: Volume, alpha: float) -> Volume:
    _check_dims(a, b)
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise DomainError("weighted-fusion alpha must be in [0, 1]")
    an = minmax01(a)
    bn = minmax01(b)
    return an.with_data(alpha * an.data + (1.0 - alpha) * bn.data,
                        unit=Unit.ARBITRARY)


def fuse_pca(a: Volume, b: Volume) -> Volume:
    """Weights from the leading eigenvector of the 2x2 voxel covariance.

    The eigenvector is flipped to a non-negative orientation and
    normalized to sum 1; genuinely mixed signs (anti-correlated
    inputs) and the all-constant case fall back to 0.5/0.5.
    """
    _check_dims(a, b)
    an = minmax01(a)
    bn = minmax01(b)
    x = an.flat()
    y = bn.flat()
    cov = np.cov(np.stack([x, y]), ddof=0)
    if not np.all(np.isfinite(cov)) or np.allclose(cov, 0.0):
        w = np.array([0.5, 0.5])
    else:
        vals, vecs = np.linalg.eigh(cov)
        v = vecs[:, int(np.argmax(vals))]
        if v[0] + v[1] < 0:
            v = -v
        if v.min() < 0 or v.sum() == 0:
            w = np.array([0.5, 0.5])
        else:
            w = v / v.sum()
    return an.with_data(w[0] * an.data + w[1] * bn.data, unit=Unit.ARBITRARY)


# ---------------------------------------------------------------------------
# pyramids

def _smooth(x: np.ndarray) -> np.ndarray:
    out = x
    for axis in range(3):
        if x.shape[axis] > 1:
            out = ndimage.correlate1d(out, _PYR_KERNEL, axis=axis,
                                      mode="reflect")
    return out


def _downsample(x: np.ndarray) -> np.ndarray:
    return _smooth(x)[::2, ::2, ::2]


def _upsample(x: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(shape, dtype=np.float64)
    out[::2, ::2, ::2] = x
    for axis in range(3):
        if shape[axis] > 1:
            out = ndimage.correlate1d(out, 2.0 * _PYR_KERNEL, axis=axis,
                                      mode="reflect")
    return out


def max_pyramid_levels(dims) -> int:
    sizes = [d for d in dims if d > 1]
    if not sizes:
        raise DomainError("volume has no extended axis to decompose")
    return int(np.floor(np.log2(min(sizes))))


def _check_levels(dims, levels: int):
    if levels < 1:
        raise DomainError("pyramid levels must be >= 1")
    limit = max_pyramid_levels(dims)
    if levels > limit:
        raise DomainError(f"{levels} pyramid levels exceed the limit {limit} "
                          f"for dims {tuple(dims)}")


def gaussian_pyramid(data: np.ndarray, levels: int) -> list[np.ndarray]:
    out = [np.asarray(data, dtype=np.float64)]
    for _ in range(levels):
        out.append(_downsample(out[-1]))
    return out


def laplacian_pyramid(volume: Volume, levels: int) -> list[np.ndarray]:
    """Band-pass levels 0..levels-1 plus the residual base (last entry)."""
    _check_levels(volume.dims, levels)
    gauss = gaussian_pyramid(volume.data, levels)
    bands = [gauss[i] - _upsample(gauss[i + 1], gauss[i].shape)
             for i in range(levels)]
    bands.append(gauss[-1])
    return bands


def reconstruct_laplacian(bands: list[np.ndarray]) -> np.ndarray:
    out = bands[-1]
    for band in reversed(bands[:-1]):
        out = band + _upsample(out, band.shape)
    return out


def fuse_lp(a: Volume, b: Volume, levels: int) -> Volume:
    _check_dims(a, b)
    an = minmax01(a)
    bn = minmax01(b)
    pa = laplacian_pyramid(an, levels)
    pb = laplacian_pyramid(bn, levels)
    fused = [np.where(np.abs(pa[i]) >= np.abs(pb[i]), pa[i], pb[i])
             for i in range(levels)]
    fused.append(0.5 * (pa[-1] + pb[-1]))
    return an.with_data(reconstruct_laplacian(fused), unit=Unit.ARBITRARY)


def ratio_pyramid(data: np.ndarray, levels: int) -> list[np.ndarray]:
    """Ratio bands level/upsample(next) plus the low-pass base (last)."""
    gauss = gaussian_pyramid(data, levels)
    bands = [gauss[i] / _upsample(gauss[i + 1], gauss[i].shape)
             for i in range(levels)]
    bands.append(gauss[-1])
    return bands


def reconstruct_ratio(bands: list[np.ndarray]) -> np.ndarray:
    out = bands[-1]
    for band in reversed(bands[:-1]):
        out = band * _upsample(out, band.shape)
    return out


def fuse_rp(a: Volume, b: Volume, levels: int) -> Volume:
    """Ratio-of-low-pass fusion; bands merge by max deviation from 1."""
    _check_dims(a, b)
    _check_levels(a.dims, levels)
    an = minmax01(a).data + RP_EPS
    bn = minmax01(b).data + RP_EPS
    pa = ratio_pyramid(an, levels)
    pb = ratio_pyramid(bn, levels)
    fused = [np.where(np.abs(pa[i] - 1.0) >= np.abs(pb[i] - 1.0), pa[i], pb[i])
             for i in range(levels)]
    fused.append(0.5 * (pa[-1] + pb[-1]))
    out = reconstruct_ratio(fused) - RP_EPS
    return a.with_data(out, unit=Unit.ARBITRARY)


# ---------------------------------------------------------------------------
# decimated orthonormal Haar wavelet

def _dwt_axis(x: np.ndarray, axis: int):
    sl_e = [slice(None)] * 3
    sl_o = [slice(None)] * 3
    sl_e[axis] = slice(0, None, 2)
    sl_o[axis] = slice(1, None, 2)
    e = x[tuple(sl_e)]
    o = x[tuple(sl_o)]
    return (e + o) / _SQRT2, (e - o) / _SQRT2


def _idwt_axis(lo: np.ndarray, hi: np.ndarray, axis: int) -> np.ndarray:
    shape = list(lo.shape)
    shape[axis] *= 2
    out = np.empty(shape, dtype=np.float64)
    sl_e = [slice(None)] * 3
    sl_o = [slice(None)] * 3
    sl_e[axis] = slice(0, None, 2)
    sl_o[axis] = slice(1, None, 2)
    out[tuple(sl_e)] = (lo + hi) / _SQRT2
    out[tuple(sl_o)] = (lo - hi) / _SQRT2
    return out


def _dwt3(x: np.ndarray) -> dict:
    """One decomposition level: band code (one letter per axis, x axis
    first) -> coefficient array.  Size-1 axes are carried through and
    always get the letter L."""
    bands = {"": x}
    for axis in range(3):
        new = {}
        for code, arr in bands.items():
            if arr.shape[axis] > 1:
                lo, hi = _dwt_axis(arr, axis)
                new[code + "L"] = lo
                new[code + "H"] = hi
            else:
                new[code + "L"] = arr
        bands = new
    return bands


def _idwt3(bands: dict, dims) -> np.ndarray:
    cur = dict(bands)
    for axis in reversed(range(3)):
        if dims[axis] > 1:
            new = {}
            codes = {code[:-1] for code in cur}
            for code in codes:
                new[code] = _idwt_axis(cur[code + "L"], cur[code + "H"], axis)
            cur = new
        else:
            cur = {code[:-1]: arr for code, arr in cur.items()}
    return cur[""]


def _pad_to_blocks(data: np.ndarray, levels: int):
    block = 2 ** levels
    pads = []
    for d in data.shape:
        if d == 1:
            pads.append((0, 0))
        else:
            pads.append((0, (-d) % block))
    if any(p[1] for p in pads):
        data = np.pad(data, pads, mode="edge")
    return data, pads


def dwt_decompose(data: np.ndarray, levels: int) -> list[dict]:
    """Multi-level transform: list of per-level band dicts; the last
    level keeps its all-L approximation band, earlier ones do not."""
    out = []
    cur = np.asarray(data, dtype=np.float64)
    for lev in range(levels):
        bands = _dwt3(cur)
        approx_code = _approx_code(bands)
        cur = bands[approx_code]
        if lev == levels - 1:
            out.append(bands)
        else:
            out.append({c: a for c, a in bands.items() if c != approx_code})
    return out


def dwt_reconstruct(pyramid: list[dict], dims_per_level: list) -> np.ndarray:
    cur = None
    for lev in reversed(range(len(pyramid))):
        bands = dict(pyramid[lev])
        if cur is not None:
            bands[_approx_code(bands)] = cur
        cur = _idwt3(bands, dims_per_level[lev])
    return cur


def _approx_code(bands: dict) -> str:
    return "L" * len(next(iter(bands)))


def fuse_dwt(a: Volume, b: Volume, levels: int) -> Volume:
    """Orthonormal Haar fusion: max-absolute details, averaged approximation."""
    _check_dims(a, b)
    _check_levels(a.dims, levels)
    an = minmax01(a).data
    bn = minmax01(b).data
    pa, pads = _pad_to_blocks(an, levels)
    pb, _ = _pad_to_blocks(bn, levels)
    dims_per_level = []
    shape = pa.shape
    for _ in range(levels):
        dims_per_level.append(shape)
        shape = tuple(d if d == 1 else d // 2 for d in shape)
    da = dwt_decompose(pa, levels)
    db = dwt_decompose(pb, levels)
    fused = []
    for lev in range(levels):
        merged = {}
        approx = _approx_code(da[lev]) if lev == levels - 1 else None
        for code, arr_a in da[lev].items():
            arr_b = db[lev][code]
            if code == approx:
                merged[code] = 0.5 * (arr_a + arr_b)
            else:
                merged[code] = np.where(np.abs(arr_a) >= np.abs(arr_b),
                                        arr_a, arr_b)
        fused.append(merged)
    out = dwt_reconstruct(fused, dims_per_level)
    out = out[tuple(slice(0, d) for d in a.dims)]
    return a.with_data(out, unit=Unit.ARBITRARY)


# ---------------------------------------------------------------------------
# flavour plumbing

def fusion_flavour_grid(weighted_alphas=(), pca: bool = False,
                        lp_levels=(), rp_levels=(),
                        dwt_levels=()) -> list[FlavourKey]:
    """FUSION flavour keys in a deterministic order."""
    keys = []
    for alpha in weighted_alphas:
        alpha = float(alpha)
        if not 0.0 <= alpha <= 1.0:
            raise DomainError("weighted-fusion alpha must be in [0, 1]")
        keys.append(FlavourKey.make(FlavourAxis.FUSION, method="weighted",
                                    alpha=alpha))
    if pca:
        keys.append(FlavourKey.make(FlavourAxis.FUSION, method="pca"))
    for name, levels_list in (("lp", lp_levels), ("rp", rp_levels),
                              ("dwt", dwt_levels)):
        for lev in levels_list:
            lev = int(lev)
            if lev < 1:
                raise DomainError("pyramid levels must be >= 1")
            keys.append(FlavourKey.make(FlavourAxis.FUSION, method=name,
                                        levels=lev))
    if len(set(keys)) != len(keys):
        raise DomainError("duplicate fusion flavours")
    return keys


def apply_fusion(a: Volume, b: Volume, key: FlavourKey) -> Volume:
    if key.axis is not FlavourAxis.FUSION:
        raise DomainError(f"not a fusion flavour: {key}")
    method = key.get("method")
    if method == "weighted":
        return fuse_weighted(a, b, float(key.get("alpha", 0.5)))
    if method == "pca":
        return fuse_pca(a, b)
    if method == "lp":
        return fuse_lp(a, b, int(key.get("levels", 1)))
    if method == "rp":
        return fuse_rp(a, b, int(key.get("levels", 1)))
    if method == "dwt":
        return fuse_dwt(a, b, int(key.get("levels", 1)))
    raise DomainError(f"unknown fusion method {method!r}")
