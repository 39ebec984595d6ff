"""Compiled inner loops for replicate-heavy simulation.

The walk below is the same algorithm as HotelLedger.advance, expressed
over flat arrays so numba can compile it.  Both paths share the
precomputed per-risk toll-rate table and use identical arithmetic, so
their outputs agree bitwise; tests enforce this.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def monopoly_walk(X, rho, beta, nu, base_rate):
    """Run the full toll-and-tax walk for funds X.

    base_rate[R] is the nu-free toll rate with R travellers still ahead.
    Returns per-pilgrim (T, toll, tax, forfeit, new-hotel flag) and the
    final hotel arrays (position, occupancy, wealth, founder pilgrim).
    """
    n = X.shape[0]
    pos = np.empty(n, np.float64)
    occ = np.empty(n, np.int64)
    wel = np.empty(n, np.float64)
    fdr = np.empty(n, np.int64)
    T = np.empty(n, np.float64)
    toll = np.empty(n, np.float64)
    tax = np.empty(n, np.float64)
    forf = np.empty(n, np.float64)
    newh = np.empty(n, np.int8)
    k = 0
    for m in range(n):
        funds = X[m]
        R = m
        cur = 0.0
        toll_m = 0.0
        tax_m = 0.0
        forf_m = 0.0
        dest = -1.0
        joined = -1
        insert_at = -1
        j = 0
        while j < k:
            rate = nu * base_rate[R]
            cost = rate * (pos[j] - cur)
            if funds < cost:
                dest = cur + funds / rate
                toll_m += funds
                funds = 0.0
                if dest >= pos[j]:
                    joined = j  # rounding collision with the next hotel
                else:
                    insert_at = j
                break
            toll_m += cost
            funds -= cost
            cur = pos[j]
            d = occ[j]
            atom = math.log((R + rho + beta) / (R - d + rho))
            if funds <= atom:
                forf_m = funds
                funds = 0.0
                joined = j
                break
            tax_m += atom
            funds -= atom
            wel[j] += atom
            R -= d
            j += 1
        if joined < 0 and insert_at < 0:
            rate = nu * base_rate[R]
            dest = cur + funds / rate
            toll_m += funds
            funds = 0.0
            insert_at = k
        if joined >= 0:
            dest = pos[joined]
            occ[joined] += 1
            wel[joined] += forf_m
            newh[m] = 0
        else:
            for i in range(k, insert_at, -1):
                pos[i] = pos[i - 1]
                occ[i] = occ[i - 1]
                wel[i] = wel[i - 1]
                fdr[i] = fdr[i - 1]
            pos[insert_at] = dest
            occ[insert_at] = 1
            wel[insert_at] = 0.0
            fdr[insert_at] = m + 1
            k += 1
            newh[m] = 1
        T[m] = dest
        toll[m] = toll_m
        tax[m] = tax_m
        forf[m] = forf_m
    return (
        T,
        toll,
        tax,
        forf,
        newh,
        pos[:k].copy(),
        occ[:k].copy(),
        wel[:k].copy(),
        fdr[:k].copy(),
    )


@njit(cache=True)
def crp_walk(u, theta, alpha):
    """Two-parameter seating walk driven by pre-drawn uniforms u (one per
    customer).  Returns block sizes and per-customer block labels."""
    n = u.shape[0]
    sizes = np.zeros(n, np.int64)
    labels = np.empty(n, np.int64)
    k = 0
    for m in range(n):
        if m == 0:
            sizes[0] = 1
            labels[0] = 0
            k = 1
            continue
        x = u[m] * (theta + m)
        cut = theta + alpha * k
        if x < cut:
            sizes[k] = 1
            labels[m] = k
            k += 1
        else:
            x -= cut
            j = 0
            acc = sizes[0] - alpha
            while x >= acc and j < k - 1:
                j += 1
                acc += sizes[j] - alpha
            sizes[j] += 1
            labels[m] = j
    return sizes[:k].copy(), labels
