# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: exact minimum enclosing balls (scalar and batch)
and GF(2) boundary-matrix column reduction.

Contracts match cechbetti._pykernels exactly.
"""
from libc.stdlib cimport malloc, free
from libc.math cimport sqrt

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

DEF MAXD = 16  # supports d <= 15 (support sets up to d+1 points)


cdef int _solve(double* a, double* b, double* x, int m) nogil:
    """Gaussian elimination with partial pivoting on an m x m system.
    Returns 0 on success, 1 if (numerically) singular."""
    cdef int i, j, k, piv
    cdef double best, tmp, factor
    for k in range(m):
        piv = k
        best = a[k * m + k]
        if best < 0:
            best = -best
        for i in range(k + 1, m):
            tmp = a[i * m + k]
            if tmp < 0:
                tmp = -tmp
            if tmp > best:
                best = tmp
                piv = i
        if best < 1e-14:
            return 1
        if piv != k:
            for j in range(m):
                tmp = a[k * m + j]
                a[k * m + j] = a[piv * m + j]
                a[piv * m + j] = tmp
            tmp = b[k]
            b[k] = b[piv]
            b[piv] = tmp
        for i in range(k + 1, m):
            factor = a[i * m + k] / a[k * m + k]
            for j in range(k, m):
                a[i * m + j] -= factor * a[k * m + j]
            b[i] -= factor * b[k]
    for i in range(m - 1, -1, -1):
        tmp = b[i]
        for j in range(i + 1, m):
            tmp -= a[i * m + j] * x[j]
        x[i] = tmp / a[i * m + i]
    return 0


cdef void _ball_from_boundary(const double* pts, const int* bnd, int nb, int d,
                              double* center, double* radius) nogil:
    """Circumsphere of the boundary set (nb <= d+1 points)."""
    cdef double a[MAXD * MAXD]
    cdef double b[MAXD]
    cdef double lam[MAXD]
    cdef int i, j, ax, m
    cdef double dot, r2
    if nb == 0:
        for ax in range(d):
            center[ax] = 0.0
        radius[0] = -1.0
        return
    if nb == 1:
        for ax in range(d):
            center[ax] = pts[bnd[0] * d + ax]
        radius[0] = 0.0
        return
    m = nb - 1
    for i in range(m):
        for j in range(m):
            dot = 0.0
            for ax in range(d):
                dot += (pts[bnd[i + 1] * d + ax] - pts[bnd[0] * d + ax]) * \
                       (pts[bnd[j + 1] * d + ax] - pts[bnd[0] * d + ax])
            a[i * m + j] = 2.0 * dot
        dot = 0.0
        for ax in range(d):
            dot += (pts[bnd[i + 1] * d + ax] - pts[bnd[0] * d + ax]) ** 2
        b[i] = dot
    if _solve(a, b, lam, m):
        # degenerate boundary set; fall back to the first point
        for ax in range(d):
            center[ax] = pts[bnd[0] * d + ax]
        radius[0] = 0.0
        return
    r2 = 0.0
    for ax in range(d):
        dot = pts[bnd[0] * d + ax]
        for i in range(m):
            dot += lam[i] * (pts[bnd[i + 1] * d + ax] - pts[bnd[0] * d + ax])
        center[ax] = dot
        r2 += (dot - pts[bnd[0] * d + ax]) ** 2
    radius[0] = sqrt(r2)


cdef void _welzl(const double* pts, int* idx, int n, int* bnd, int nb, int d,
                 double tol, double* center, double* radius) nogil:
    cdef int p, ax
    cdef double dist2, r
    if n == 0 or nb == d + 1:
        _ball_from_boundary(pts, bnd, nb, d, center, radius)
        return
    p = idx[0]
    _welzl(pts, idx + 1, n - 1, bnd, nb, d, tol, center, radius)
    r = radius[0]
    if r >= 0.0:
        dist2 = 0.0
        for ax in range(d):
            dist2 += (pts[p * d + ax] - center[ax]) ** 2
        if sqrt(dist2) <= r + tol:
            return
    bnd[nb] = p
    _welzl(pts, idx + 1, n - 1, bnd, nb + 1, d, tol, center, radius)


cdef double _meb(const double* pts, int n, int d, double* center) nogil:
    cdef int* idx = <int*> malloc(n * sizeof(int))
    cdef int bnd[MAXD]
    cdef int i, ax
    cdef double radius = 0.0
    cdef double span = 1.0, v
    for i in range(n):
        idx[i] = i
        for ax in range(d):
            v = pts[i * d + ax]
            if v < 0:
                v = -v
            if v > span:
                span = v
    _welzl(pts, idx, n, bnd, 0, d, 1e-10 * span, center, &radius)
    free(idx)
    if radius < 0.0:
        radius = 0.0
    return radius


def meb_ball(points):
    """Exact minimum enclosing ball (Welzl, deterministic input order)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] pts = \
        np.ascontiguousarray(points, dtype=np.float64)
    if pts.shape[0] == 0:
        raise ValueError("expected a nonempty (m, d) array of points")
    cdef int d = <int> pts.shape[1]
    if d + 1 > MAXD:
        raise ValueError(f"dimension {d} too large for the compiled kernel")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] center = np.zeros(d)
    cdef double r = _meb(<double*> pts.data, <int> pts.shape[0], d,
                         <double*> center.data)
    return center, r


def meb_radius(points):
    return meb_ball(points)[1]


def meb_radius_batch(configs):
    """Minimum enclosing ball radii for a batch of small point sets.
    configs: (N, m, d) -> (N,)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] y = \
        np.ascontiguousarray(configs, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    cdef int m = <int> y.shape[1]
    cdef int d = <int> y.shape[2]
    if d + 1 > MAXD:
        raise ValueError(f"dimension {d} too large for the compiled kernel")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double center[MAXD]
    cdef double* base = <double*> y.data
    cdef double* res = <double*> out.data
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            res[i] = _meb(base + i * m * d, m, d, center)
    return out


def gf2_reduce(offsets, faces):
    """Column reduction of a GF(2) boundary matrix in filtration order.

    Column j holds the (strictly smaller) row indices
    faces[offsets[j]:offsets[j+1]].  Returns (positive, death_of).
    """
    cdef cnp.ndarray[cnp.int64_t, ndim=1] off = \
        np.ascontiguousarray(offsets, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] fac = \
        np.ascontiguousarray(faces, dtype=np.int64)
    cdef Py_ssize_t ncols = off.shape[0] - 1
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] positive = np.zeros(ncols, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] death_of = np.full(ncols, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] low_inv = np.full(ncols, -1, dtype=np.int64)
    # reduced columns kept as sorted int64 arrays
    reduced = [None] * ncols
    cdef cnp.ndarray[cnp.int64_t, ndim=1] col, other, merged
    cdef Py_ssize_t j, j2, low, a, b, w, na, nb
    for j in range(ncols):
        col = np.sort(fac[off[j]:off[j + 1]])
        while col.shape[0] > 0:
            low = col[col.shape[0] - 1]
            j2 = low_inv[low]
            if j2 < 0:
                break
            other = reduced[j2]
            # symmetric difference of two sorted arrays
            na = col.shape[0]
            nb = other.shape[0]
            merged = np.empty(na + nb, dtype=np.int64)
            a = 0
            b = 0
            w = 0
            while a < na and b < nb:
                if col[a] < other[b]:
                    merged[w] = col[a]
                    a += 1
                    w += 1
                elif col[a] > other[b]:
                    merged[w] = other[b]
                    b += 1
                    w += 1
                else:
                    a += 1
                    b += 1
            while a < na:
                merged[w] = col[a]
                a += 1
                w += 1
            while b < nb:
                merged[w] = other[b]
                b += 1
                w += 1
            col = merged[:w]
        if col.shape[0] > 0:
            low = col[col.shape[0] - 1]
            low_inv[low] = j
            death_of[low] = j
            reduced[j] = col
        else:
            positive[j] = 1
    return positive, death_of
