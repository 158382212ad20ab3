"""Pure-Python kernels. Reference semantics for the compiled twin in
``_ckernels.pyx``; both must produce identical results.
"""
import math

import numpy as np

INF = float("inf")


def best_responses(alpha, active, ph, power, bits, e_local, server_delay,
                   tau, chan_bw, noise, M):
    """Best response of every active user against the current profile.

    A user's options are local computing (0) or channel m in 1..M; channels whose
    delay exceeds ``tau`` are excluded. The incumbent wins ties, then the lowest
    option index. Inactive users always answer 0.
    """
    alpha = [int(a) for a in alpha]
    active = [bool(a) for a in active]
    ph = [float(x) for x in ph]
    K = len(alpha)
    out = np.zeros(K, dtype=np.int64)
    for k in range(K):
        if not active[k]:
            continue
        loads = [0.0] * (M + 1)
        for n in range(K):
            if n != k and alpha[n] > 0:
                loads[alpha[n]] += ph[n]
        p_k = float(power[k])
        b_k = float(bits[k])
        sd_k = float(server_delay[k])
        costs = [INF] * (M + 1)
        costs[0] = float(e_local[k])
        for m in range(1, M + 1):
            rate = chan_bw * math.log2(1.0 + ph[k] / (loads[m] + noise))
            if sd_k + b_k / rate <= tau:
                costs[m] = p_k * b_k / rate
        best = alpha[k]
        best_cost = costs[best]
        for o in range(M + 1):
            if costs[o] < best_cost:
                best = o
                best_cost = costs[o]
        out[k] = best
    return out


def knapsack_tables(values, weights, cap):
    """0/1 knapsack tables on an integer capacity grid.

    Rows 1..F-1 are filled for every capacity; the last row only at ``cap``,
    which is all the backtrack needs. Taking an item requires a strict gain, so
    zero- and negative-valued items are never chosen.
    """
    v = [float(x) for x in values]
    w = [int(x) for x in weights]
    F = len(v)
    cap = int(cap)
    xi = np.zeros((F + 1, cap + 1))
    xr = np.zeros((F + 1, cap + 1), dtype=np.int8)
    prev = [0.0] * (cap + 1)
    for f in range(1, F + 1):
        wf, vf = w[f - 1], v[f - 1]
        cols = range(cap + 1) if f < F else (cap,)
        row = [0.0] * (cap + 1)
        for c in cols:
            keep = prev[c]
            if wf <= c:
                take = vf + prev[c - wf]
                if take > keep:
                    xr[f, c] = 1
                    row[c] = take
                    continue
            row[c] = keep
        xi[f] = row
        prev = row
    b = np.zeros(F, dtype=np.int8)
    c = cap
    for f in range(F, 0, -1):
        if xr[f, c]:
            b[f - 1] = 1
            c -= w[f - 1]
    return xi, xr, b
