# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled per-timestep neuron kernels (hot path of the clock-driven loop).

Mirrors ``_kernels_py`` exactly: same IEEE operations in the same order, so
the two backends are bit-identical.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

BACKEND = "compiled"


def if_step(
    cnp.float64_t[:] v,
    cnp.float64_t[:] current,
    double theta,
    long gamma,
    cnp.int64_t[:] spikes_out,
):
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double q
    cdef long k
    for i in range(n):
        v[i] = v[i] + current[i]
        q = floor(v[i] / theta)
        if q < 0.0:
            q = 0.0
        elif q > <double> gamma:
            q = <double> gamma
        k = <long> q
        v[i] = v[i] - q * theta
        spikes_out[i] = k
    return np.asarray(spikes_out)


def constant_if_step(
    cnp.float64_t[:] current,
    long t,
    double v0,
    double theta,
    long gamma,
    cnp.int64_t[:] s_cum,
    cnp.int64_t[:] spikes_out,
    cnp.float64_t[:] v_out,
):
    cdef Py_ssize_t i, n = current.shape[0]
    cdef double v_pre, q
    cdef long k
    for i in range(n):
        v_pre = v0 + t * current[i] - theta * s_cum[i]
        q = floor(v_pre / theta)
        if q < 0.0:
            q = 0.0
        elif q > <double> gamma:
            q = <double> gamma
        k = <long> q
        s_cum[i] = s_cum[i] + k
        v_out[i] = v_pre - q * theta
        spikes_out[i] = k
    return np.asarray(spikes_out)


def spicalib_step(
    cnp.int64_t[:] spikes,
    long t,
    double beta,
    long gamma,
    cnp.float64_t[:] phi,
    cnp.int64_t[:] isi_n,
    cnp.int64_t[:] t_last,
    cnp.uint8_t[:] flagged,
    cnp.int64_t[:] cancelled,
    cnp.int64_t[:] neg_out,
    bint enabled,
):
    cdef Py_ssize_t i, n = spikes.shape[0]
    cdef long s, d
    for i in range(n):
        s = spikes[i]
        neg_out[i] = 0
        if s > 0:
            phi[i] = (phi[i] * isi_n[i] + (t - t_last[i])) / (isi_n[i] + s)
            isi_n[i] = isi_n[i] + s
            t_last[i] = t
            flagged[i] = 0
        elif enabled and isi_n[i] > 0:
            if flagged[i] == 0 and (t - t_last[i]) > phi[i] + beta:
                flagged[i] = 1
            if flagged[i]:
                d = isi_n[i] - cancelled[i]
                if d > gamma:
                    d = gamma
                if d < 0:
                    d = 0
                neg_out[i] = d
                cancelled[i] = cancelled[i] + d
    return np.asarray(neg_out)
