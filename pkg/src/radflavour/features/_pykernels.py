"""Pure-NumPy texture-matrix kernels.

Fallback backend used when the compiled extension is unavailable (or
disabled via ``RADFLAVOUR_DISABLE_EXT``).  Both backends must return
byte-identical count arrays; the compiled one only exists for speed.

All kernels take a ``levels`` grid: int64, shape (nx, ny, nz), value 0
outside the ROI and 1..ng inside.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

BACKEND = "python"


def _pair_slices(shape, offset):
    """Slices (src, dst) so that levels[src] and levels[dst] are voxel
    pairs separated by ``offset`` with both endpoints in bounds."""
    src, dst = [], []
    for n, d in zip(shape, offset):
        src.append(slice(max(0, -d), n - max(0, d)))
        dst.append(slice(max(0, d), n - max(0, -d)))
    return tuple(src), tuple(dst)


def glcm_pair_counts(levels: np.ndarray, ng: int, offsets) -> np.ndarray:
    """Directed co-occurrence counts per offset, shape (ndir, ng, ng)."""
    out = np.zeros((len(offsets), ng, ng), dtype=np.int64)
    for d, offset in enumerate(offsets):
        src, dst = _pair_slices(levels.shape, offset)
        a = levels[src].ravel()
        b = levels[dst].ravel()
        ok = (a > 0) & (b > 0)
        if not ok.any():
            continue
        pair = (a[ok] - 1) * ng + (b[ok] - 1)
        out[d] += np.bincount(pair, minlength=ng * ng).reshape(ng, ng)
    return out


def glrlm_run_counts(levels: np.ndarray, ng: int, offsets) -> np.ndarray:
    """Run-length counts per offset, shape (ndir, ng, max_run).

    A run is a maximal same-level sequence along an offset direction;
    out-of-mask voxels break runs.
    """
    max_run = max(levels.shape)
    out = np.zeros((len(offsets), ng, max_run), dtype=np.int64)
    coords = np.argwhere(levels > 0)
    if len(coords) == 0:
        return out
    vals = levels[levels > 0]
    for d, offset in enumerate(offsets):
        off = np.asarray(offset, dtype=np.int64)
        axis = int(np.flatnonzero(off)[0])
        # Position along the line and a per-line base point; consecutive
        # voxels of one run differ by exactly 1 in t.
        t = coords[:, axis] * off[axis]
        base = coords - t[:, None] * off[None, :]
        order = np.lexsort((t, base[:, 2], base[:, 1], base[:, 0]))
        t_s = t[order]
        base_s = base[order]
        val_s = vals[order]
        start = np.ones(len(order), dtype=bool)
        if len(order) > 1:
            same_line = ~np.any(base_s[1:] != base_s[:-1], axis=1)
            adjacent = t_s[1:] == t_s[:-1] + 1
            same_level = val_s[1:] == val_s[:-1]
            start[1:] = ~(same_line & adjacent & same_level)
        starts = np.flatnonzero(start)
        lengths = np.diff(np.append(starts, len(order)))
        np.add.at(out[d], (val_s[starts] - 1, lengths - 1), 1)
    return out


def glszm_zones(levels: np.ndarray, ng: int) -> tuple[np.ndarray, np.ndarray]:
    """Connected same-level zones: (zone levels, zone sizes), sorted.

    Connectivity is the full 26-neighbour shell; on single-slice grids
    this reduces to 8-connectivity.
    """
    structure = np.ones((3, 3, 3), dtype=bool)
    zone_levels, zone_sizes = [], []
    present = np.unique(levels[levels > 0])
    for g in present:
        labelled, n_zones = ndimage.label(levels == g, structure=structure)
        if n_zones == 0:
            continue
        sizes = np.bincount(labelled.ravel())[1:]
        zone_levels.extend([int(g)] * n_zones)
        zone_sizes.extend(int(s) for s in sizes)
    zl = np.asarray(zone_levels, dtype=np.int64)
    zs = np.asarray(zone_sizes, dtype=np.int64)
    order = np.lexsort((zs, zl))
    return zl[order], zs[order]


def gldm_counts(levels: np.ndarray, ng: int, offsets, alpha: int) -> np.ndarray:
    """Dependence counts, shape (ng, n_offsets + 1).

    Column k holds voxels with k in-mask neighbours whose level differs
    by at most ``alpha``.
    """
    dep = np.zeros(levels.shape, dtype=np.int64)
    for offset in offsets:
        src, dst = _pair_slices(levels.shape, offset)
        b = levels[dst]
        dep[src] += (b > 0) & (np.abs(levels[src] - b) <= alpha)
    inm = levels > 0
    out = np.zeros((ng, len(offsets) + 1), dtype=np.int64)
    np.add.at(out, (levels[inm] - 1, dep[inm]), 1)
    return out


def ngtdm_sums(levels: np.ndarray, ng: int, offsets) -> tuple[np.ndarray, np.ndarray]:
    """Per-level absolute deviation sums s and participant counts n.

    A voxel participates when it has at least one in-mask neighbour; its
    contribution is |level - mean(neighbour levels)|.
    """
    nsum = np.zeros(levels.shape, dtype=np.int64)
    lsum = np.zeros(levels.shape, dtype=np.float64)
    for offset in offsets:
        src, dst = _pair_slices(levels.shape, offset)
        b = levels[dst]
        inb = b > 0
        nsum[src] += inb
        lsum[src] += np.where(inb, b, 0)
    valid = (levels > 0) & (nsum > 0)
    s = np.zeros(ng, dtype=np.float64)
    n = np.zeros(ng, dtype=np.int64)
    if valid.any():
        dev = np.abs(levels[valid] - lsum[valid] / nsum[valid])
        np.add.at(s, levels[valid] - 1, dev)
        np.add.at(n, levels[valid] - 1, 1)
    return s, n
