"""Texture matrices and their features.

All matrices are built from a ``levels`` grid (int64, 0 outside the
ROI, 1..ng inside) produced by :func:`levels_grid`.  Conventions are
fixed here rather than configurable:

* GLCM: distance 1 (Chebyshev), 13 unique 3D directions (4 in-plane on
  single-slice grids), symmetrized, each direction normalized to sum 1,
  then averaged over directions with at least one pair.
* GLRLM: run counts per direction, count matrices averaged over
  directions, features computed once from the average.
* GLSZM: 26-connected zones (8 on single-slice grids), one matrix.
* GLDM: alpha = 0, full 26/8 neighbour shell, dependence recorded as
  k + 1 so the column index starts at 1.
* NGTDM: full 26/8 shell; a voxel participates when it has at least
  one in-mask neighbour.

Entropies use log base 2.  Divisions by zero return documented
conventions (GLCM correlation 1, NGTDM coarseness capped at 1e6,
busyness and strength 0) instead of NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import DomainError, RoiMask
from ..discretize import DiscretizedRoi
from . import kernels

COARSENESS_CAP = 1e6


@dataclass
class TextureMatrix:
    """A texture matrix plus the metadata needed to compute features."""

    kind: str                      # glcm | glrlm | glszm | gldm | ngtdm
    entries: np.ndarray            # 2D, or 1D s-vector for NGTDM
    ng: int
    meta: dict = field(default_factory=dict)


def levels_grid(disc: DiscretizedRoi, mask: RoiMask) -> np.ndarray:
    """Scatter flat ROI levels back onto the grid (0 outside the mask)."""
    if disc.levels.shape[0] != mask.n_voxels:
        raise DomainError(
            "level count %d does not match mask voxel count %d"
            % (disc.levels.shape[0], mask.n_voxels))
    flat = np.zeros(mask.mask.size, dtype=np.int64)
    flat[mask.mask.ravel(order="F")] = disc.levels
    return flat.reshape(mask.mask.shape, order="F")


# ---------------------------------------------------------------------------
# matrix construction

def glcm_matrix(grid: np.ndarray, ng: int,
                directions=None) -> Optional[TextureMatrix]:
    """Direction-averaged symmetric normalized co-occurrence matrix.

    Returns None when no direction has a single in-mask pair (for
    example a one-voxel ROI); the GLCM features are then missing.
    """
    if directions is None:
        directions = kernels.unique_directions(grid.shape)
    counts = kernels.glcm_pair_counts(grid, ng, directions)
    sym = counts + np.transpose(counts, (0, 2, 1))
    totals = sym.sum(axis=(1, 2))
    used = totals > 0
    if not used.any():
        return None
    probs = sym[used] / totals[used][:, None, None]
    entries = probs.mean(axis=0)
    return TextureMatrix("glcm", entries, ng,
                         {"n_directions": int(used.sum())})


def glrlm_matrix(grid: np.ndarray, ng: int, directions=None) -> TextureMatrix:
    """Run-length count matrix averaged over directions."""
    n_voxels = int((grid > 0).sum())
    if n_voxels == 0:
        raise DomainError("empty ROI")
    if directions is None:
        directions = kernels.unique_directions(grid.shape)
    counts = kernels.glrlm_run_counts(grid, ng, directions)
    entries = counts.mean(axis=0)
    return TextureMatrix("glrlm", entries, ng, {"n_voxels": n_voxels})


def glszm_matrix(grid: np.ndarray, ng: int) -> TextureMatrix:
    """Matrix of (level, zone size) counts over connected zones."""
    n_voxels = int((grid > 0).sum())
    if n_voxels == 0:
        raise DomainError("empty ROI")
    zl, zs = kernels.glszm_zones(grid, ng)
    max_size = int(zs.max())
    entries = np.zeros((ng, max_size), dtype=np.float64)
    np.add.at(entries, (zl - 1, zs - 1), 1.0)
    return TextureMatrix("glszm", entries, ng, {"n_voxels": n_voxels})


def gldm_matrix(grid: np.ndarray, ng: int, alpha: int = 0,
                offsets=None) -> TextureMatrix:
    """Matrix of (level, dependence) counts; dependence = k + 1 where k
    is the number of in-mask neighbours within alpha of the voxel."""
    n_voxels = int((grid > 0).sum())
    if n_voxels == 0:
        raise DomainError("empty ROI")
    if offsets is None:
        offsets = kernels.neighbour_shell(grid.shape)
    counts = kernels.gldm_counts(grid, ng, offsets, alpha)
    return TextureMatrix("gldm", counts.astype(np.float64), ng,
                         {"n_voxels": n_voxels, "alpha": int(alpha)})


def ngtdm_vectors(grid: np.ndarray, ng: int, offsets=None) -> TextureMatrix:
    """s-vector (entries) with n- and p-vectors in the metadata."""
    if not (grid > 0).any():
        raise DomainError("empty ROI")
    if offsets is None:
        offsets = kernels.neighbour_shell(grid.shape)
    s, n = kernels.ngtdm_sums(grid, ng, offsets)
    total = int(n.sum())
    p = n / total if total > 0 else np.zeros(ng)
    return TextureMatrix("ngtdm", s, ng, {"n": n, "p": p, "n_valid": total})


# ---------------------------------------------------------------------------
# features

def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def glcm_features(tm: TextureMatrix) -> dict:
    p = tm.entries
    ng = tm.ng
    i = np.arange(1, ng + 1, dtype=np.float64)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    px = p.sum(axis=1)
    mu = float((i * px).sum())
    var = float((((i - mu) ** 2) * px).sum())
    cross = float((ii * jj * p).sum())
    if var > 0:
        correlation = (cross - mu * mu) / var
    else:
        correlation = 1.0
    pdiff = np.zeros(ng)
    np.add.at(pdiff, np.abs(ii - jj).astype(np.int64).ravel(), p.ravel())
    return {
        "glcm_joint_energy": float((p ** 2).sum()),
        "glcm_contrast": float((((ii - jj) ** 2) * p).sum()),
        "glcm_correlation": float(correlation),
        "glcm_joint_entropy": _entropy(p.ravel()),
        "glcm_idm": float((p / (1.0 + (ii - jj) ** 2)).sum()),
        "glcm_inverse_difference": float((p / (1.0 + np.abs(ii - jj))).sum()),
        "glcm_cluster_shade": float((((ii + jj - 2 * mu) ** 3) * p).sum()),
        "glcm_cluster_prominence": float((((ii + jj - 2 * mu) ** 4) * p).sum()),
        "glcm_cluster_tendency": float((((ii + jj - 2 * mu) ** 2) * p).sum()),
        "glcm_autocorrelation": cross,
        "glcm_joint_average": mu,
        "glcm_difference_entropy": _entropy(pdiff),
    }


def glrlm_features(tm: TextureMatrix) -> dict:
    r = tm.entries
    nr = float(r.sum())
    np_vox = tm.meta["n_voxels"]
    ng, max_run = r.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, max_run + 1, dtype=np.float64)[None, :]
    row = r.sum(axis=1)
    col = r.sum(axis=0)
    return {
        "glrlm_sre": float((r / j ** 2).sum() / nr),
        "glrlm_lre": float((r * j ** 2).sum() / nr),
        "glrlm_gln": float((row ** 2).sum() / nr),
        "glrlm_glnn": float((row ** 2).sum() / nr ** 2),
        "glrlm_rln": float((col ** 2).sum() / nr),
        "glrlm_rlnn": float((col ** 2).sum() / nr ** 2),
        "glrlm_rp": float(nr / np_vox),
        "glrlm_lglre": float((r / i ** 2).sum() / nr),
        "glrlm_hglre": float((r * i ** 2).sum() / nr),
        "glrlm_run_entropy": _entropy((r / nr).ravel()),
    }


def glszm_features(tm: TextureMatrix) -> dict:
    z = tm.entries
    nz = float(z.sum())
    np_vox = tm.meta["n_voxels"]
    ng, max_size = z.shape
    s = np.arange(1, max_size + 1, dtype=np.float64)[None, :]
    row = z.sum(axis=1)
    col = z.sum(axis=0)
    return {
        "glszm_sae": float((z / s ** 2).sum() / nz),
        "glszm_lae": float((z * s ** 2).sum() / nz),
        "glszm_zp": float(nz / np_vox),
        "glszm_gln": float((row ** 2).sum() / nz),
        "glszm_glnn": float((row ** 2).sum() / nz ** 2),
        "glszm_szn": float((col ** 2).sum() / nz),
        "glszm_sznn": float((col ** 2).sum() / nz ** 2),
        "glszm_zone_entropy": _entropy((z / nz).ravel()),
    }


def gldm_features(tm: TextureMatrix) -> dict:
    d = tm.entries
    nd = float(d.sum())
    ng, max_dep = d.shape
    j = np.arange(1, max_dep + 1, dtype=np.float64)[None, :]
    row = d.sum(axis=1)
    col = d.sum(axis=0)
    p = d / nd
    mu_dep = float((p * j).sum())
    return {
        "gldm_sde": float((d / j ** 2).sum() / nd),
        "gldm_lde": float((d * j ** 2).sum() / nd),
        "gldm_dn": float((col ** 2).sum() / nd),
        "gldm_dnn": float((col ** 2).sum() / nd ** 2),
        "gldm_gln": float((row ** 2).sum() / nd),
        "gldm_dependence_entropy": _entropy(p.ravel()),
        "gldm_dependence_variance": float((p * (j - mu_dep) ** 2).sum()),
    }


def ngtdm_features(tm: TextureMatrix) -> dict:
    s = tm.entries
    p = tm.meta["p"]
    n_valid = tm.meta["n_valid"]
    ng = tm.ng
    i = np.arange(1, ng + 1, dtype=np.float64)
    nz = p > 0
    ngp = int(nz.sum())
    ps = float((p * s).sum())

    coarseness = 1.0 / ps if ps > 0 else COARSENESS_CAP
    coarseness = min(coarseness, COARSENESS_CAP)

    if ngp > 1 and n_valid > 0:
        pi = p[nz][:, None]
        pj = p[nz][None, :]
        di = i[nz][:, None] - i[nz][None, :]
        contrast = float((pi * pj * di ** 2).sum()) / (ngp * (ngp - 1))
        contrast *= float(s.sum()) / n_valid
        bus_den = float(np.abs(i[nz][:, None] * pi - i[nz][None, :] * pj).sum())
        busyness = ps / bus_den if bus_den > 0 else 0.0
        si = s[nz][:, None]
        sj = s[nz][None, :]
        complexity = float((np.abs(di) * (pi * si + pj * sj) / (pi + pj)).sum())
        complexity /= n_valid
        s_sum = float(s.sum())
        strength = (float(((pi + pj) * di ** 2).sum()) / s_sum
                    if s_sum > 0 else 0.0)
    else:
        contrast = 0.0
        busyness = 0.0
        complexity = 0.0
        strength = 0.0
    return {
        "ngtdm_coarseness": coarseness,
        "ngtdm_contrast": contrast,
        "ngtdm_busyness": busyness,
        "ngtdm_complexity": complexity,
        "ngtdm_strength": strength,
    }


def texture_features(grid: np.ndarray, ng: int) -> dict:
    """All 42 texture features from a levels grid.

    GLCM features come back as None when the ROI has no co-occurring
    pair in any direction.
    """
    out: dict = {}
    tm = glcm_matrix(grid, ng)
    if tm is None:
        for name in ("glcm_joint_energy", "glcm_contrast", "glcm_correlation",
                     "glcm_joint_entropy", "glcm_idm",
                     "glcm_inverse_difference", "glcm_cluster_shade",
                     "glcm_cluster_prominence", "glcm_cluster_tendency",
                     "glcm_autocorrelation", "glcm_joint_average",
                     "glcm_difference_entropy"):
            out[name] = None
    else:
        out.update(glcm_features(tm))
    out.update(glrlm_features(glrlm_matrix(grid, ng)))
    out.update(glszm_features(glszm_matrix(grid, ng)))
    out.update(gldm_features(gldm_matrix(grid, ng)))
    out.update(ngtdm_features(ngtdm_vectors(grid, ng)))
    return out
