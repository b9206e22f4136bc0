# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled texture-matrix kernels.

Must return byte-identical arrays to ``_pykernels``; the pure-Python
module is the reference, this one is the fast path.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "cython"


def glcm_pair_counts(cnp.int64_t[:, :, ::1] levels, int ng, offsets):
    cdef cnp.int64_t[:, :] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef int ndir = offs.shape[0]
    out_arr = np.zeros((ndir, ng, ng), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] out = out_arr
    cdef int nx = levels.shape[0], ny = levels.shape[1], nz = levels.shape[2]
    cdef int d, x, y, z, xx, yy, zz
    cdef cnp.int64_t a, b
    for d in range(ndir):
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    a = levels[x, y, z]
                    if a == 0:
                        continue
                    xx = x + offs[d, 0]
                    yy = y + offs[d, 1]
                    zz = z + offs[d, 2]
                    if xx < 0 or xx >= nx or yy < 0 or yy >= ny or zz < 0 or zz >= nz:
                        continue
                    b = levels[xx, yy, zz]
                    if b == 0:
                        continue
                    out[d, a - 1, b - 1] += 1
    return out_arr


def glrlm_run_counts(cnp.int64_t[:, :, ::1] levels, int ng, offsets):
    cdef cnp.int64_t[:, :] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef int ndir = offs.shape[0]
    cdef int nx = levels.shape[0], ny = levels.shape[1], nz = levels.shape[2]
    cdef int max_run = max(nx, max(ny, nz))
    out_arr = np.zeros((ndir, ng, max_run), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] out = out_arr
    cdef int d, x, y, z, px, py, pz, qx, qy, qz, length
    cdef cnp.int64_t a
    for d in range(ndir):
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    a = levels[x, y, z]
                    if a == 0:
                        continue
                    # run start: predecessor missing or different
                    px = x - offs[d, 0]
                    py = y - offs[d, 1]
                    pz = z - offs[d, 2]
                    if (0 <= px < nx and 0 <= py < ny and 0 <= pz < nz
                            and levels[px, py, pz] == a):
                        continue
                    length = 1
                    qx = x + offs[d, 0]
                    qy = y + offs[d, 1]
                    qz = z + offs[d, 2]
                    while (0 <= qx < nx and 0 <= qy < ny and 0 <= qz < nz
                           and levels[qx, qy, qz] == a):
                        length += 1
                        qx += offs[d, 0]
                        qy += offs[d, 1]
                        qz += offs[d, 2]
                    out[d, a - 1, length - 1] += 1
    return out_arr


def glszm_zones(cnp.int64_t[:, :, ::1] levels, int ng):
    cdef int nx = levels.shape[0], ny = levels.shape[1], nz = levels.shape[2]
    cdef cnp.uint8_t[:, :, ::1] seen = np.zeros((nx, ny, nz), dtype=np.uint8)
    cdef cnp.int64_t[:, ::1] stack = np.empty((nx * ny * nz, 3), dtype=np.int64)
    zone_levels = []
    zone_sizes = []
    cdef int x, y, z, cx, cy, cz, xx, yy, zz, dx, dy, dz, top, size
    cdef cnp.int64_t g
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                g = levels[x, y, z]
                if g == 0 or seen[x, y, z]:
                    continue
                size = 0
                top = 0
                stack[top, 0] = x
                stack[top, 1] = y
                stack[top, 2] = z
                top += 1
                seen[x, y, z] = 1
                while top > 0:
                    top -= 1
                    cx = stack[top, 0]
                    cy = stack[top, 1]
                    cz = stack[top, 2]
                    size += 1
                    for dx in range(-1, 2):
                        for dy in range(-1, 2):
                            for dz in range(-1, 2):
                                if dx == 0 and dy == 0 and dz == 0:
                                    continue
                                xx = cx + dx
                                yy = cy + dy
                                zz = cz + dz
                                if (0 <= xx < nx and 0 <= yy < ny and 0 <= zz < nz
                                        and not seen[xx, yy, zz]
                                        and levels[xx, yy, zz] == g):
                                    seen[xx, yy, zz] = 1
                                    stack[top, 0] = xx
                                    stack[top, 1] = yy
                                    stack[top, 2] = zz
                                    top += 1
                zone_levels.append(int(g))
                zone_sizes.append(size)
    zl = np.asarray(zone_levels, dtype=np.int64)
    zs = np.asarray(zone_sizes, dtype=np.int64)
    order = np.lexsort((zs, zl))
    return zl[order], zs[order]


def gldm_counts(cnp.int64_t[:, :, ::1] levels, int ng, offsets, int alpha):
    cdef cnp.int64_t[:, :] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef int noff = offs.shape[0]
    out_arr = np.zeros((ng, noff + 1), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef int nx = levels.shape[0], ny = levels.shape[1], nz = levels.shape[2]
    cdef int x, y, z, o, xx, yy, zz, k
    cdef cnp.int64_t a, b
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                a = levels[x, y, z]
                if a == 0:
                    continue
                k = 0
                for o in range(noff):
                    xx = x + offs[o, 0]
                    yy = y + offs[o, 1]
                    zz = z + offs[o, 2]
                    if xx < 0 or xx >= nx or yy < 0 or yy >= ny or zz < 0 or zz >= nz:
                        continue
                    b = levels[xx, yy, zz]
                    if b > 0 and (b - a if b > a else a - b) <= alpha:
                        k += 1
                out[a - 1, k] += 1
    return out_arr


def ngtdm_sums(cnp.int64_t[:, :, ::1] levels, int ng, offsets):
    cdef cnp.int64_t[:, :] offs = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef int noff = offs.shape[0]
    s_arr = np.zeros(ng, dtype=np.float64)
    n_arr = np.zeros(ng, dtype=np.int64)
    cdef cnp.float64_t[::1] s = s_arr
    cdef cnp.int64_t[::1] n = n_arr
    cdef int nx = levels.shape[0], ny = levels.shape[1], nz = levels.shape[2]
    cdef int x, y, z, o, xx, yy, zz, cnt
    cdef cnp.int64_t a, b
    cdef double fsum
    for x in range(nx):
        for y in range(ny):
            for z in range(nz):
                a = levels[x, y, z]
                if a == 0:
                    continue
                cnt = 0
                fsum = 0.0
                # neighbour sum accumulates in offset order to match the
                # float arithmetic of the fallback backend
                for o in range(noff):
                    xx = x + offs[o, 0]
                    yy = y + offs[o, 1]
                    zz = z + offs[o, 2]
                    if xx < 0 or xx >= nx or yy < 0 or yy >= ny or zz < 0 or zz >= nz:
                        continue
                    b = levels[xx, yy, zz]
                    if b > 0:
                        cnt += 1
                        fsum += <double>b
                if cnt > 0:
                    s[a - 1] += fabs(<double>a - fsum / cnt)
                    n[a - 1] += 1
    return s_arr, n_arr
