"""Compiled inner loop of the inf-sup operator.

The arithmetic follows ``game._cost`` term by term (same association, same
summation order), so the compiled and reference paths agree bitwise.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def inf_sup(S, etas, Xs, F, moves, neg_eps, half_eps2, eps2, out):
    n, K = S.shape
    C = F.shape[1]
    m1 = moves.shape[1]
    for p in range(n):
        best = np.inf
        for c in range(C):
            top = -np.inf
            for k in range(K):
                lin = 0.0
                for i in range(m1):
                    lin = lin + etas[p, c, i] * moves[k, i]
                quad = 0.0
                for i in range(m1):
                    for j in range(m1):
                        quad = quad + Xs[p, c, i, j] * moves[k, i] * moves[k, j]
                v = S[p, k] + (neg_eps * lin - half_eps2 * quad - eps2 * F[p, c])
                if v > top:
                    top = v
            if top < best:
                best = top
        out[p] = best
    return out
