"""Fused per-row loops for the cascade window maps."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _phi_prefix(row, L, h, P, F):
    n = row.shape[0]
    for i in range(n):
        v = L * row[i]
        if v > 1.0:
            v = 1.0
        elif v < -1.0:
            v = -1.0
        P[i] = v
    F[0] = 0.0
    half_h = 0.5 * h
    for i in range(1, n):
        F[i] = F[i - 1] + half_h * (P[i] + P[i - 1])


@njit(cache=True, nogil=True)
def level_map(xi, L, h, i_lo, wl_lo, wr_lo, i_hi, wl_hi, wr_hi, node_lo, node_hi, full, scale):
    """Window integrals of ``phi(L xi)`` between paired abscissae, with exact
    values on windows where every touched node is saturated."""
    C, n = xi.shape
    m = i_lo.shape[0]
    out = np.empty((C, m))
    P = np.empty(n)
    F = np.empty(n)
    pos = np.empty(n + 1, np.int64)
    neg = np.empty(n + 1, np.int64)
    for c in range(C):
        _phi_prefix(xi[c], L, h, P, F)
        pos[0] = 0
        neg[0] = 0
        for i in range(n):
            pos[i + 1] = pos[i] + (1 if P[i] == 1.0 else 0)
            neg[i + 1] = neg[i] + (1 if P[i] == -1.0 else 0)
        for j in range(m):
            a, b = node_lo[j], node_hi[j]
            width = b - a + 1
            if pos[b + 1] - pos[a] == width:
                total = full
            elif neg[b + 1] - neg[a] == width:
                total = -full
            else:
                k = i_hi[j]
                hi = F[k] + wl_hi[j] * P[k] + wr_hi[j] * P[k + 1]
                k = i_lo[j]
                lo = F[k] + wl_lo[j] * P[k] + wr_lo[j] * P[k + 1]
                total = hi - lo
            out[c, j] = scale * total
    return out


@njit(cache=True, nogil=True)
def antiderivative_phi(xi, L, h, idx, wl, wr):
    """``int_{lo}^{t_j} phi(L xi)`` for each row of ``xi``."""
    C, n = xi.shape
    m = idx.shape[0]
    out = np.empty((C, m))
    P = np.empty(n)
    F = np.empty(n)
    for c in range(C):
        _phi_prefix(xi[c], L, h, P, F)
        for j in range(m):
            k = idx[j]
            out[c, j] = F[k] + wl[j] * P[k] + wr[j] * P[k + 1]
    return out
