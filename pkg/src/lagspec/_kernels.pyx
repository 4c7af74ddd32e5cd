# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference versions."""
import numpy as np
cimport numpy as cnp
from libc.math cimport expm1, log1p

cnp.import_array()


def gamma_remainder(a, double gamma):
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = av.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef double inv = 1.0 / gamma
    for i in range(n):
        ov[i] = expm1(-gamma * log1p(av[i])) * inv + av[i]
    return out.reshape(np.shape(a))


def etd_apply(c00, c01, c10, c11, a, v, s0=None, s1=None, g=None):
    # complex products spelled out in reals: the C99 operator carries NaN/inf
    # recovery code that dominates this loop
    cdef const double[::1] e00 = np.ascontiguousarray(c00, dtype=np.complex128).view(np.float64)
    cdef const double[::1] e01 = np.ascontiguousarray(c01, dtype=np.complex128).view(np.float64)
    cdef const double[::1] e10 = np.ascontiguousarray(c10, dtype=np.complex128).view(np.float64)
    cdef const double[::1] e11 = np.ascontiguousarray(c11, dtype=np.complex128).view(np.float64)
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.complex128).view(np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.complex128).view(np.float64)
    cdef Py_ssize_t i, r, n = av.shape[0] // 2
    out_a = np.empty(n, dtype=np.complex128)
    out_v = np.empty(n, dtype=np.complex128)
    cdef double[::1] oa = out_a.view(np.float64)
    cdef double[::1] ov = out_v.view(np.float64)
    cdef const double[::1] p0
    cdef const double[::1] p1
    cdef const double[::1] gv
    cdef double xr, xi, yr, yi, gr, gi
    cdef bint forced = g is not None
    if forced:
        p0 = np.ascontiguousarray(s0, dtype=np.complex128).view(np.float64)
        p1 = np.ascontiguousarray(s1, dtype=np.complex128).view(np.float64)
        gv = np.ascontiguousarray(g, dtype=np.complex128).view(np.float64)
    for i in range(n):
        r = 2 * i
        xr = av[r]
        xi = av[r + 1]
        yr = vv[r]
        yi = vv[r + 1]
        oa[r] = e00[r] * xr - e00[r + 1] * xi + e01[r] * yr - e01[r + 1] * yi
        oa[r + 1] = e00[r] * xi + e00[r + 1] * xr + e01[r] * yi + e01[r + 1] * yr
        ov[r] = e10[r] * xr - e10[r + 1] * xi + e11[r] * yr - e11[r + 1] * yi
        ov[r + 1] = e10[r] * xi + e10[r + 1] * xr + e11[r] * yi + e11[r + 1] * yr
        if forced:
            gr = gv[r]
            gi = gv[r + 1]
            oa[r] += p0[r] * gr - p0[r + 1] * gi
            oa[r + 1] += p0[r] * gi + p0[r + 1] * gr
            ov[r] += p1[r] * gr - p1[r + 1] * gi
            ov[r + 1] += p1[r] * gi + p1[r + 1] * gr
    return out_a, out_v


def block_energies(hat, filters, weights):
    cdef const double complex[::1] h = np.ascontiguousarray(hat, dtype=np.complex128)
    cdef const double[:, ::1] f = np.ascontiguousarray(filters, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t j, i, nj = f.shape[0], m = f.shape[1]
    out = np.zeros(nj, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc, re, im, fi
    for j in range(nj):
        acc = 0.0
        for i in range(m):
            fi = f[j, i]
            if fi != 0.0:
                re = h[i].real * fi
                im = h[i].imag * fi
                acc += (re * re + im * im) * w[i]
        o[j] = acc
    return out
