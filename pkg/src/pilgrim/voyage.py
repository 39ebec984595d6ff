"""Recurrent-event voyages and the Indian buffet process.

Every traveller now continues to a fixed final destination, re-funding
after each stop, so a single traveller leaves a Poisson trail of new
hotels and each later traveller independently joins each existing hotel.
With m-1 previous travellers the new-hotel rate per mile is
nu * B(rho + m - 1, beta + 1) and the chance of joining a hotel with d
residents is (d + beta) / (m - 1 + rho + beta).

Forgetting positions leaves an exchangeable feature allocation.  At
beta = 0 it is exactly the Indian buffet process with theta = rho,
gamma = nu/rho (horizon 1); in general the buffet with parameters
(gamma, theta, alpha) corresponds to beta = -alpha, rho = theta + alpha,
nu = gamma * Gamma(theta+1) / (Gamma(theta+alpha) Gamma(1-alpha)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .exponent import ModelParams
from .monopoly import toll_rate_base

__all__ = [
    "Feature",
    "FeatureAllocation",
    "simulate_voyage",
    "ibp_sample",
    "ibp_new_dish_rate",
    "voyage_new_hotel_rate",
    "voyage_occupy_prob",
    "ibp_params_for_voyage",
    "voyage_pattern_probs",
    "ibp_pattern_probs",
    "voyage_ibp_distance",
    "VoyageIbpReport",
]


@dataclass(frozen=True)
class Feature:
    """One hotel/dish: its founder, its members, and (for voyages) where it is."""

    founder: int
    members: frozenset
    position: float | None = None


@dataclass(frozen=True)
class FeatureAllocation:
    """Multiset of features over travellers 1..n, in founding order."""

    n: int
    features: tuple
    horizon: float | None = None

    def __post_init__(self):
        for f in self.features:
            if not f.members:
                raise ValueError("features must be non-empty")
            if min(f.members) != f.founder:
                raise ValueError("founder must be the smallest member")
            if self.horizon is not None and f.position is not None:
                if not (0 < f.position <= self.horizon):
                    raise ValueError("positions must lie in (0, horizon]")

    @property
    def k(self) -> int:
        return len(self.features)

    def counts(self) -> np.ndarray:
        return np.array([len(f.members) for f in self.features], dtype=np.int64)

    def incidence_matrix(self) -> np.ndarray:
        """0/1 matrix, rows = travellers, columns = features in founding order."""
        out = np.zeros((self.n, self.k), dtype=np.int8)
        for j, f in enumerate(self.features):
            for i in f.members:
                out[i - 1, j] = 1
        return out

    def pattern(self) -> tuple:
        """Canonical multiset of member sets (order-free, position-free)."""
        return tuple(sorted(tuple(sorted(f.members)) for f in self.features))

    def relabelled(self, perm: dict) -> "FeatureAllocation":
        feats = []
        for f in self.features:
            members = frozenset(perm[i] for i in f.members)
            feats.append(Feature(min(members), members, f.position))
        return FeatureAllocation(self.n, tuple(feats), self.horizon)


def voyage_new_hotel_rate(n_prev: int, params: ModelParams) -> float:
    """Per-mile rate at which traveller n_prev+1 founds hotels."""
    return params.nu * float(toll_rate_base(params, n_prev + 1)[n_prev])


def voyage_occupy_prob(d: int, n_prev: int, params: ModelParams) -> float:
    """Chance that traveller n_prev+1 joins a hotel with d residents."""
    return (d + params.beta) / (n_prev + params.rho + params.beta)


def simulate_voyage(n: int, horizon: float, params: ModelParams, seed):
    """Simulate n travellers to a fixed destination.

    Occupying a hotel never interrupts the journey: the traveller pays
    the forfeit, stays registered, and continues to the destination.
    Returns (times_by_traveller, FeatureAllocation); positions are carried
    so the output doubles as a recurrent-event time dataset.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValueError("horizon must be a positive real")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(
        np.random.SeedSequence(int(seed))
    )
    positions: list[float] = []
    members: list[list[int]] = []
    founders: list[int] = []
    times: list[np.ndarray] = []
    for i in range(1, n + 1):
        prev = i - 1
        visited: list[float] = []
        counts = np.array([len(m) for m in members], dtype=float)
        if counts.size:
            p = (counts + params.beta) / (prev + params.rho + params.beta)
            hits = rng.random(counts.size) < p
            for j in np.flatnonzero(hits):
                members[j].append(i)
                visited.append(positions[j])
        rate = voyage_new_hotel_rate(prev, params)
        k_new = rng.poisson(rate * horizon)
        if k_new:
            new_pos = horizon * (1.0 - rng.random(k_new))  # lies in (0, horizon]
            for t in new_pos:
                positions.append(float(t))
                members.append([i])
                founders.append(i)
                visited.append(float(t))
        times.append(np.sort(np.asarray(visited)))
    order = range(len(positions))
    feats = tuple(
        Feature(founders[j], frozenset(members[j]), positions[j]) for j in order
    )
    return times, FeatureAllocation(n, feats, horizon)


# ---------------------------------------------------------------------------
# Indian buffet process
# ---------------------------------------------------------------------------


def ibp_new_dish_rate(n_prev: int, gamma: float, theta: float, alpha: float) -> float:
    """Poisson rate of new dishes for customer n_prev + 1:

        gamma * Gamma(theta+1) Gamma(theta+alpha+n_prev) / (Gamma(theta+n_prev+1) Gamma(theta+alpha))
    """
    return gamma * math.exp(
        gammaln(theta + 1.0)
        + gammaln(theta + alpha + n_prev)
        - gammaln(theta + n_prev + 1.0)
        - gammaln(theta + alpha)
    )


def ibp_sample(n: int, gamma: float, theta: float, alpha: float, seed) -> FeatureAllocation:
    """Sequential Indian buffet: customer m samples dish k with probability
    (N_k - alpha)/(theta + m - 1), then Poisson-many new dishes."""
    if gamma <= 0 or theta <= 0:
        raise ValueError("gamma and theta must be positive")
    if not (0 <= alpha < 1):
        raise ValueError("alpha must lie in [0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(
        np.random.SeedSequence(int(seed))
    )
    members: list[list[int]] = []
    founders: list[int] = []
    for m in range(1, n + 1):
        prev = m - 1
        counts = np.array([len(b) for b in members], dtype=float)
        if counts.size:
            p = (counts - alpha) / (theta + prev)
            for j in np.flatnonzero(rng.random(counts.size) < p):
                members[j].append(m)
        for _ in range(rng.poisson(ibp_new_dish_rate(prev, gamma, theta, alpha))):
            members.append([m])
            founders.append(m)
    feats = tuple(Feature(founders[j], frozenset(members[j])) for j in range(len(members)))
    return FeatureAllocation(n, feats)


def ibp_params_for_voyage(params: ModelParams, horizon: float = 1.0) -> tuple:
    """(gamma, theta, alpha) of the buffet matching a voyage term by term."""
    gamma = params.nu * horizon * math.exp(
        gammaln(params.rho) + gammaln(params.beta + 1.0) - gammaln(params.rho + params.beta + 1.0)
    )
    return gamma, params.rho + params.beta, -params.beta


# ---------------------------------------------------------------------------
# exact pattern probabilities
# ---------------------------------------------------------------------------


def _pattern_probs(n: int, occupy_prob, new_rate, max_features: int) -> dict:
    """Exact law of the feature multiset for any sequential description.

    occupy_prob(d, n_prev) and new_rate(n_prev) define the description.
    Patterns needing more than max_features features are aggregated under
    the key ``"overflow"``, so the returned masses sum to one.
    """
    states = {(): 1.0}
    overflow = 0.0
    for m in range(1, n + 1):
        prev = m - 1
        rate = new_rate(prev)
        nxt: dict[tuple, float] = {}
        for state, prob in states.items():
            # occupancy choices per class of identical features
            choices = [(state, prob)]
            for sig, c in state:
                p_occ = occupy_prob(len(sig), prev)
                grown: list[tuple, float] = []
                for st, pr in choices:
                    for i in range(c + 1):
                        w = math.comb(c, i) * p_occ**i * (1.0 - p_occ) ** (c - i)
                        new_state = _bump(st, sig, c, i, m)
                        grown.append((new_state, pr * w))
                choices = grown
            # new features founded by m
            for st, pr in choices:
                used = sum(c for _, c in st)
                cum = 0.0
                for j in range(0, max_features - used + 1):
                    pj = math.exp(-rate) * rate**j / math.factorial(j)
                    cum += pj
                    key = _add_new(st, m, j)
                    nxt[key] = nxt.get(key, 0.0) + pr * pj
                overflow += pr * (1.0 - cum)
        states = nxt
    out = {state: p for state, p in states.items()}
    out["overflow"] = overflow
    return out


def _bump(state: tuple, sig: frozenset, c: int, i: int, m: int) -> tuple:
    """Move i of the c features with signature sig to sig + {m}."""
    items = dict(state)
    if i == 0:
        return state
    if items[sig] == i:
        del items[sig]
    else:
        items[sig] -= i
    new_sig = sig | {m}
    items[new_sig] = items.get(new_sig, 0) + i
    return tuple(sorted(items.items(), key=lambda kv: (sorted(kv[0]), kv[1])))


def _add_new(state: tuple, m: int, j: int) -> tuple:
    if j == 0:
        return state
    items = dict(state)
    sig = frozenset([m])
    items[sig] = items.get(sig, 0) + j
    return tuple(sorted(items.items(), key=lambda kv: (sorted(kv[0]), kv[1])))


def voyage_pattern_probs(n: int, params: ModelParams, horizon: float = 1.0,
                         max_features: int = 4) -> dict:
    """Exact feature-pattern law of the voyage (positions ignored)."""
    return _pattern_probs(
        n,
        lambda d, prev: voyage_occupy_prob(d, prev, params),
        lambda prev: voyage_new_hotel_rate(prev, params) * horizon,
        max_features,
    )


def ibp_pattern_probs(n: int, gamma: float, theta: float, alpha: float,
                      max_features: int = 4) -> dict:
    """Exact feature-pattern law of the Indian buffet process."""
    return _pattern_probs(
        n,
        lambda d, prev: (d - alpha) / (theta + prev),
        lambda prev: ibp_new_dish_rate(prev, gamma, theta, alpha),
        max_features,
    )


@dataclass(frozen=True)
class VoyageIbpReport:
    """Summary of the voyage-vs-buffet comparison."""

    n: int
    reps: int
    exact_max_diff: float | None
    mean_features_voyage: float
    mean_features_ibp: float
    mean_features_exact: float
    mean_shared_voyage: float
    mean_shared_ibp: float
    rate_max_diff: float


def voyage_ibp_distance(n: int, params: ModelParams, gamma: float, theta: float,
                        reps: int, seed: int, alpha: float = 0.0,
                        horizon: float = 1.0) -> VoyageIbpReport:
    """Compare the voyage and the buffet under the stated parameter mapping:
    simulated feature counts and sharing counts, exact sequential pattern
    probabilities for n <= 3, and the per-step new-feature rates."""
    rng_v = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0,)))
    rng_i = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(1,)))
    kv = np.empty(reps)
    ki = np.empty(reps)
    sv = np.empty(reps)
    si = np.empty(reps)
    for r in range(reps):
        _, fa_v = simulate_voyage(n, horizon, params, rng_v)
        fa_i = ibp_sample(n, gamma, theta, alpha, rng_i)
        kv[r] = fa_v.k
        ki[r] = fa_i.k
        sv[r] = int(np.sum(fa_v.counts() >= 2)) if fa_v.k else 0
        si[r] = int(np.sum(fa_i.counts() >= 2)) if fa_i.k else 0
    exact = None
    if n <= 3:
        pv = voyage_pattern_probs(n, params, horizon)
        pi = ibp_pattern_probs(n, gamma, theta, alpha)
        keys = set(pv) | set(pi)
        exact = max(abs(pv.get(kx, 0.0) - pi.get(kx, 0.0)) for kx in keys)
    rate_diff = max(
        abs(voyage_new_hotel_rate(m, params) * horizon - ibp_new_dish_rate(m, gamma, theta, alpha))
        for m in range(n)
    )
    mean_exact = horizon * sum(voyage_new_hotel_rate(m, params) for m in range(n))
    return VoyageIbpReport(
        n=n,
        reps=reps,
        exact_max_diff=exact,
        mean_features_voyage=float(kv.mean()),
        mean_features_ibp=float(ki.mean()),
        mean_features_exact=mean_exact,
        mean_shared_voyage=float(sv.mean()),
        mean_shared_ibp=float(si.mean()),
        rate_max_diff=rate_diff,
    )
