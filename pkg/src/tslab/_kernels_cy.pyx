# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the numpy kernels in ``tslab._kernels_py``.

Same quadrature rules and cutoffs; only the execution strategy differs
(per-face recursion instead of level-synchronous array passes), so
results agree up to floating-point summation order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

BACKEND = "cython"


def cotan_lap_areas(double[:, ::1] v, int[:, ::1] f):
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t m = f.shape[0]
    lap_arr = np.zeros((n, 3), dtype=np.float64)
    area_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] lap = lap_arr
    cdef double[::1] area = area_arr
    cdef Py_ssize_t k, d
    cdef int i0, i1, i2
    cdef double ab[3]
    cdef double ac[3]
    cdef double bc[3]
    cdef double cx, cy, cz, dbl
    cdef double cot0, cot1, cot2, third, w
    for k in range(m):
        i0 = f[k, 0]; i1 = f[k, 1]; i2 = f[k, 2]
        for d in range(3):
            ab[d] = v[i1, d] - v[i0, d]
            ac[d] = v[i2, d] - v[i0, d]
            bc[d] = v[i2, d] - v[i1, d]
        cx = ab[1] * ac[2] - ab[2] * ac[1]
        cy = ab[2] * ac[0] - ab[0] * ac[2]
        cz = ab[0] * ac[1] - ab[1] * ac[0]
        dbl = sqrt(cx * cx + cy * cy + cz * cz)
        cot0 = (ab[0] * ac[0] + ab[1] * ac[1] + ab[2] * ac[2]) / dbl
        cot1 = (bc[0] * (-ab[0]) + bc[1] * (-ab[1]) + bc[2] * (-ab[2])) / dbl
        cot2 = ((-ac[0]) * (-bc[0]) + (-ac[1]) * (-bc[1])
                + (-ac[2]) * (-bc[2])) / dbl
        for d in range(3):
            w = cot0 * bc[d]              # edge (1, 2)
            lap[i1, d] += w
            lap[i2, d] -= w
            w = cot1 * (-ac[d])           # edge (2, 0)
            lap[i2, d] += w
            lap[i0, d] -= w
            w = cot2 * ab[d]              # edge (0, 1)
            lap[i0, d] += w
            lap[i1, d] -= w
        third = dbl / 6.0
        area[i0] += third
        area[i1] += third
        area[i2] += third
    return lap_arr, area_arr


cdef double _tri_quad(double* A, double* B, double* C, double inv4s,
                      double thresh, double exp_cut, int depth,
                      int max_depth) noexcept nogil:
    cdef double e0, e1, e2, diam, cenx, ceny, cenz, d2, dc, gap
    cdef double ux, uy, uz, wx, wy, wz, nx, ny, nz, area
    cdef double mab[3]
    cdef double mbc[3]
    cdef double mca[3]
    cdef int d
    e0 = sqrt((B[0] - C[0]) ** 2 + (B[1] - C[1]) ** 2 + (B[2] - C[2]) ** 2)
    e1 = sqrt((C[0] - A[0]) ** 2 + (C[1] - A[1]) ** 2 + (C[2] - A[2]) ** 2)
    e2 = sqrt((A[0] - B[0]) ** 2 + (A[1] - B[1]) ** 2 + (A[2] - B[2]) ** 2)
    diam = e0
    if e1 > diam:
        diam = e1
    if e2 > diam:
        diam = e2
    cenx = (A[0] + B[0] + C[0]) / 3.0
    ceny = (A[1] + B[1] + C[1]) / 3.0
    cenz = (A[2] + B[2] + C[2]) / 3.0
    d2 = cenx * cenx + ceny * ceny + cenz * cenz
    dc = sqrt(d2)
    gap = dc - diam
    if gap > 0.0 and gap * gap * inv4s > exp_cut:
        return 0.0
    if diam <= thresh or depth == max_depth:
        ux = B[0] - A[0]; uy = B[1] - A[1]; uz = B[2] - A[2]
        wx = C[0] - A[0]; wy = C[1] - A[1]; wz = C[2] - A[2]
        nx = uy * wz - uz * wy
        ny = uz * wx - ux * wz
        nz = ux * wy - uy * wx
        area = 0.5 * sqrt(nx * nx + ny * ny + nz * nz)
        return area * exp(-d2 * inv4s)
    for d in range(3):
        mab[d] = 0.5 * (A[d] + B[d])
        mbc[d] = 0.5 * (B[d] + C[d])
        mca[d] = 0.5 * (C[d] + A[d])
    return (_tri_quad(A, mab, mca, inv4s, thresh, exp_cut, depth + 1, max_depth)
            + _tri_quad(B, mbc, mab, inv4s, thresh, exp_cut, depth + 1, max_depth)
            + _tri_quad(C, mca, mbc, inv4s, thresh, exp_cut, depth + 1, max_depth)
            + _tri_quad(mab, mbc, mca, inv4s, thresh, exp_cut, depth + 1,
                        max_depth))


def gaussian_area_sum(double[:, ::1] v, int[:, ::1] f, double[::1] x0,
                      double s0, double split=0.25, double exp_cut=46.0,
                      int max_depth=14):
    cdef Py_ssize_t m = f.shape[0]
    cdef double thresh = split * sqrt(s0)
    cdef double inv4s = 1.0 / (4.0 * s0)
    cdef double total = 0.0
    cdef double A[3]
    cdef double B[3]
    cdef double C[3]
    cdef Py_ssize_t k
    cdef int d, i0, i1, i2
    with nogil:
        for k in range(m):
            i0 = f[k, 0]; i1 = f[k, 1]; i2 = f[k, 2]
            for d in range(3):
                A[d] = v[i0, d] - x0[d]
                B[d] = v[i1, d] - x0[d]
                C[d] = v[i2, d] - x0[d]
            total += _tri_quad(A, B, C, inv4s, thresh, exp_cut, 0, max_depth)
    return total / (4.0 * np.pi * s0)
