# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_pykernels``; see there for the semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log2, INFINITY

cnp.import_array()


def best_responses(alpha, active, ph, power, bits, e_local, server_delay,
                   double tau, double chan_bw, double noise, int M):
    cdef cnp.int64_t[::1] a = np.ascontiguousarray(alpha, dtype=np.int64)
    cdef cnp.uint8_t[::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef double[::1] rx = np.ascontiguousarray(ph, dtype=np.float64)
    cdef double[::1] pw = np.ascontiguousarray(power, dtype=np.float64)
    cdef double[::1] nb = np.ascontiguousarray(bits, dtype=np.float64)
    cdef double[::1] el = np.ascontiguousarray(e_local, dtype=np.float64)
    cdef double[::1] sd = np.ascontiguousarray(server_delay, dtype=np.float64)
    cdef Py_ssize_t K = a.shape[0]
    out_arr = np.zeros(K, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef double[::1] loads = np.zeros(M + 1)
    cdef double[::1] costs = np.zeros(M + 1)
    cdef Py_ssize_t k, n, m, o
    cdef long best
    cdef double rate, best_cost
    for k in range(K):
        if not act[k]:
            continue
        for m in range(M + 1):
            loads[m] = 0.0
        for n in range(K):
            if n != k and a[n] > 0:
                loads[a[n]] += rx[n]
        costs[0] = el[k]
        for m in range(1, M + 1):
            rate = chan_bw * log2(1.0 + rx[k] / (loads[m] + noise))
            if sd[k] + nb[k] / rate <= tau:
                costs[m] = pw[k] * nb[k] / rate
            else:
                costs[m] = INFINITY
        best = a[k]
        best_cost = costs[best]
        for o in range(M + 1):
            if costs[o] < best_cost:
                best = o
                best_cost = costs[o]
        out[k] = best
    return out_arr


def knapsack_tables(values, weights, long cap):
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.int64_t[::1] w = np.ascontiguousarray(weights, dtype=np.int64)
    cdef Py_ssize_t F = v.shape[0]
    xi_arr = np.zeros((F + 1, cap + 1))
    xr_arr = np.zeros((F + 1, cap + 1), dtype=np.int8)
    b_arr = np.zeros(F, dtype=np.int8)
    cdef double[:, ::1] xi = xi_arr
    cdef cnp.int8_t[:, ::1] xr = xr_arr
    cdef cnp.int8_t[::1] b = b_arr
    cdef Py_ssize_t f, c, lo
    cdef long wf
    cdef double vf, keep, take
    for f in range(1, F + 1):
        wf = w[f - 1]
        vf = v[f - 1]
        lo = 0 if f < F else cap
        for c in range(lo, cap + 1):
            keep = xi[f - 1, c]
            if wf <= c:
                take = vf + xi[f - 1, c - wf]
                if take > keep:
                    xr[f, c] = 1
                    xi[f, c] = take
                    continue
            xi[f, c] = keep
    c = cap
    for f in range(F, 0, -1):
        if xr[f, c]:
            b[f - 1] = 1
            c -= w[f - 1]
    return xi_arr, xr_arr, b_arr
