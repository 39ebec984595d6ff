"""Replicate-level simulation harness.

Replicate r of a run with seed s draws its funds from the independent
stream SeedSequence(s, spawn_key=(r,)), so results do not depend on
execution order and replicates can be farmed out in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exponent import ModelParams
from .monopoly import replicate_rng, toll_rate_base

__all__ = ["BlockStats", "walk_arrays", "simulate_block_stats", "simulate_trajectory",
           "simulate_times_matrix"]


def walk_arrays(X: np.ndarray, params: ModelParams):
    """Raw kernel output for one funds vector: per-pilgrim
    (T, toll, tax, forfeit, new-hotel flag) and final hotel arrays."""
    base = toll_rate_base(params, X.size)
    return _kernels.monopoly_walk(X, params.rho, params.beta, params.nu, base)


@dataclass
class BlockStats:
    """Per-replicate summaries of a batch of simulations."""

    n: int
    params: ModelParams
    K: np.ndarray  # number of hotels
    Z: np.ndarray  # total tolls
    first_block: np.ndarray  # occupancy of the spatially first hotel
    spectrum: np.ndarray | None = None  # counts of size-j hotels, j = 1..j_max


def simulate_block_stats(n: int, params: ModelParams, reps: int, seed: int,
                         j_max: int = 0) -> BlockStats:
    K = np.empty(reps, dtype=np.int64)
    Z = np.empty(reps)
    first = np.empty(reps, dtype=np.int64)
    spec = np.empty((reps, j_max), dtype=np.int64) if j_max else None
    for r in range(reps):
        X = replicate_rng(seed, r).exponential(size=n)
        _, toll, _, _, newh, _, occ, _, _ = walk_arrays(X, params)
        K[r] = occ.size
        Z[r] = toll.sum()
        first[r] = occ[0]
        if j_max:
            spec[r] = np.bincount(occ, minlength=j_max + 1)[1 : j_max + 1]
    return BlockStats(n=n, params=params, K=K, Z=Z, first_block=first, spectrum=spec)


def simulate_trajectory(n: int, params: ModelParams, seed: int, replicate: int = 0):
    """(K_m, Z_m) after each of m = 1..n travellers, for one replicate."""
    X = replicate_rng(seed, replicate).exponential(size=n)
    _, toll, _, _, newh, _, _, _, _ = walk_arrays(X, params)
    return np.cumsum(newh.astype(np.int64)), np.cumsum(toll)


def simulate_times_matrix(n: int, params: ModelParams, reps: int, seed: int) -> np.ndarray:
    """Event times for many replicates, one row per replicate.

    Meant for small-n Monte Carlo: funds for all replicates come from a
    single stream as one block draw, which keeps the per-replicate
    overhead negligible.
    """
    X = np.random.default_rng(np.random.SeedSequence(int(seed))).exponential(size=(reps, n))
    out = np.empty((reps, n))
    for r in range(reps):
        out[r] = walk_arrays(X[r], params)[0]
    return out
