# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Same contracts as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, fmod, M_PI

cnp.import_array()

# phasor re-anchored every ANCHOR samples to bound rotation drift
cdef enum:
    ANCHOR = 128


cdef void _phasor_table(double f_dt, double decay, Py_ssize_t n,
                        double* tc, double* ts) noexcept nogil:
    cdef Py_ssize_t i, start, stop
    cdef double damp = exp(-decay)
    cdef double step_c = damp * cos(2.0 * M_PI * fmod(f_dt, 1.0))
    cdef double step_s = -damp * sin(2.0 * M_PI * fmod(f_dt, 1.0))
    cdef double pc, ps, tmp, cyc, mag
    start = 0
    while start < n:
        stop = start + ANCHOR
        if stop > n:
            stop = n
        cyc = fmod(<double>start * f_dt, 1.0)
        mag = exp(-decay * <double>start)
        pc = mag * cos(2.0 * M_PI * cyc)
        ps = -mag * sin(2.0 * M_PI * cyc)
        for i in range(start, stop):
            tc[i] = pc
            ts[i] = ps
            tmp = pc * step_c - ps * step_s
            ps = pc * step_s + ps * step_c
            pc = tmp
        start = stop


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t i = 0
    while i + 4 <= n:
        s0 += a[i] * b[i]
        s1 += a[i + 1] * b[i + 1]
        s2 += a[i + 2] * b[i + 2]
        s3 += a[i + 3] * b[i + 3]
        i += 4
    while i < n:
        s0 += a[i] * b[i]
        i += 1
    return (s0 + s1) + (s2 + s3)


def dtft(h, freqs, double dt, decays=None):
    cdef double[:, ::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[::1] fv = np.ascontiguousarray(freqs, dtype=np.float64)
    if decays is None:
        decays = np.zeros(fv.shape[0])
    cdef double[::1] dv = np.ascontiguousarray(decays, dtype=np.float64)
    cdef Py_ssize_t rows = hv.shape[0], n = hv.shape[1], nf = fv.shape[0]
    out = np.empty((rows, nf), dtype=np.complex128)
    cdef double complex[:, ::1] ov = out
    tables = np.empty((nf, 2, n), dtype=np.float64)
    cdef double[:, :, ::1] tv = tables
    cdef Py_ssize_t r, k
    if n == 0:
        out[...] = 0
        return out
    with nogil:
        for k in range(nf):
            _phasor_table(fv[k] * dt, dv[k], n, &tv[k, 0, 0], &tv[k, 1, 0])
        for r in range(rows):
            for k in range(nf):
                ov[r, k] = dt * (_dot(&hv[r, 0], &tv[k, 0, 0], n)
                                 + 1j * _dot(&hv[r, 0], &tv[k, 1, 0], n))
    return out


def modulated_sum(bands, gains, decays):
    cdef double[:, :, ::1] bv = np.ascontiguousarray(bands, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gains, dtype=np.float64)
    cdef double[::1] dv = np.ascontiguousarray(decays, dtype=np.float64)
    cdef Py_ssize_t rows = bv.shape[0], nb = bv.shape[1], n = bv.shape[2]
    out = np.zeros((rows, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t r, b, i, start, stop
    cdef double env, ratio
    for r in range(rows):
        for b in range(nb):
            ratio = exp(-dv[b])
            start = 0
            while start < n:
                stop = start + ANCHOR
                if stop > n:
                    stop = n
                env = gv[b] * exp(-dv[b] * <double>start)
                for i in range(start, stop):
                    ov[r, i] += env * bv[r, b, i]
                    env *= ratio
                start = stop
    return out
