"""Kernel backend selection and canonical neighbour geometry.

The texture-matrix kernels exist twice: a compiled extension
(``_ckernels``) and a pure-NumPy fallback (``_pykernels``).  The
compiled one is used when importable unless ``RADFLAVOUR_DISABLE_EXT``
is set to a non-empty value other than "0".  Both return identical
arrays; which one is active is reported in ``BACKEND``.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("RADFLAVOUR_DISABLE_EXT", "0") not in ("", "0"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _pykernels as _impl

BACKEND: str = _impl.BACKEND


def unique_directions(dims) -> list[tuple[int, int, int]]:
    """Unique lattice directions at Chebyshev distance 1.

    13 for a proper 3D grid; the 4 in-plane ones when nz == 1.  One
    offset per +/- pair; the kernels count directed pairs and the
    matrices are symmetrized downstream.
    """
    planar = dims[2] == 1
    out = []
    for dz in (-1, 0, 1):
        if planar and dz != 0:
            continue
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0 and dz == 0:
                    continue
                if dz > 0 or (dz == 0 and (dy > 0 or (dy == 0 and dx > 0))):
                    out.append((dx, dy, dz))
    return out


def neighbour_shell(dims) -> list[tuple[int, int, int]]:
    """All neighbour offsets at Chebyshev distance 1: 26, or 8 when nz == 1."""
    planar = dims[2] == 1
    out = []
    for dz in (-1, 0, 1):
        if planar and dz != 0:
            continue
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0 and dz == 0:
                    continue
                out.append((dx, dy, dz))
    return out


def _grid(levels: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(levels, dtype=np.int64)
    if a.ndim != 3:
        raise ValueError("levels grid must be 3-dimensional")
    return a


def _offs(offsets) -> np.ndarray:
    return np.ascontiguousarray(offsets, dtype=np.int64).reshape(-1, 3)


def glcm_pair_counts(levels, ng, offsets):
    return _impl.glcm_pair_counts(_grid(levels), int(ng), _offs(offsets))


def glrlm_run_counts(levels, ng, offsets):
    return _impl.glrlm_run_counts(_grid(levels), int(ng), _offs(offsets))


def glszm_zones(levels, ng):
    return _impl.glszm_zones(_grid(levels), int(ng))


def gldm_counts(levels, ng, offsets, alpha=0):
    return _impl.gldm_counts(_grid(levels), int(ng), _offs(offsets), int(alpha))


def ngtdm_sums(levels, ng, offsets):
    return _impl.ngtdm_sums(_grid(levels), int(ng), _offs(offsets))
