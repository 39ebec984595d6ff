"""Exact joint log-densities and conditional hazards.

Densities of sequences with ties are taken with respect to Lebesgue
measure on the distinct values: a configuration with k distinct times has
a density in k dimensions.  That is the only convention under which the
closed forms below integrate to one, and it is what the quadrature checks
in the test suite verify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .events import as_event_array, tie_profile, risk_integral, TieProfile
from .exponent import CharacteristicExponent, ModelParams, forward_difference

__all__ = [
    "HazardProfile",
    "log_density_pilgrim",
    "log_density_general",
    "conditional_hazard",
    "hazard_atoms",
    "voyage_log_density",
]


def _log_fd(exponent: CharacteristicExponent, r: int, d: int) -> float:
    """log of (-1)^(d-1) (Delta^d zeta)(r); -inf when the difference is 0."""
    if exponent.family == "iid" and d >= 2:
        return -math.inf
    return exponent.log_forward_difference(r, d)


def hazard_atoms(profile: TieProfile, exponent: CharacteristicExponent) -> np.ndarray:
    """Tax atoms -log[ (Delta^d zeta)(R+1) / (Delta^d zeta)(R) ] per hotel."""
    out = np.empty(profile.k)
    for i in range(profile.k):
        r = int(profile.risk_after[i])
        d = int(profile.occupancy[i])
        out[i] = _log_fd(exponent, r, d) - _log_fd(exponent, r + 1, d)
    return out


@dataclass(frozen=True)
class HazardProfile:
    """Atoms and continuous rates of the conditional hazard given a history."""

    positions: np.ndarray  # hotel positions t_1 < ... < t_k
    atoms: np.ndarray  # tax at each hotel
    segment_rates: np.ndarray  # (Delta zeta)(R(s)) on each of the k+1 segments
    risk_after: np.ndarray
    occupancy: np.ndarray


def conditional_hazard(history, exponent: CharacteristicExponent) -> HazardProfile:
    """Conditional hazard of the next event: an atom at every hotel plus a
    continuous component with density (Delta zeta)(R(s))."""
    hist = as_event_array(history) if history is not None else np.empty(0)
    if hist.size == 0:
        rate0 = forward_difference(exponent, 0, 1)
        return HazardProfile(
            np.empty(0), np.empty(0), np.array([rate0]), np.empty(0, int), np.empty(0, int)
        )
    prof = tie_profile(hist)
    risks = np.concatenate((prof.risk_on_segment, [0]))
    rates = np.array([forward_difference(exponent, int(r), 1) for r in risks])
    return HazardProfile(prof.positions, hazard_atoms(prof, exponent), rates,
                         prof.risk_after, prof.occupancy)


def log_density_pilgrim(times, params: ModelParams) -> float:
    """Joint log-density under the harmonic (beta = 0) process:

        log f = -int zeta(R(s)) ds + sum_r log Gamma(d_r)
                + k log(nu) - log rho^(n ascending)

    Permutation-invariant; nu enters only through time scaling.
    """
    if params.beta != 0.0:
        raise ValueError("log_density_pilgrim requires beta = 0")
    prof = tie_profile(times)
    n = prof.n
    zeta = params.exponent().index(n)
    integral = risk_integral(prof, zeta)
    return float(
        -integral
        + gammaln(prof.occupancy).sum()
        + prof.k * math.log(params.nu)
        - (gammaln(params.rho + n) - gammaln(params.rho))
    )


def log_density_general(times, exponent: CharacteristicExponent) -> float:
    """Joint log-density for any valid exponent:

        f = exp(-int zeta(R(s)) ds) * prod_r (-1)^(d_r - 1) (Delta^{d_r} zeta)(R(t_r)).

    Returns -inf when the configuration has probability zero (ties under
    the iid family); raises if a forward difference has the wrong sign.
    """
    prof = tie_profile(times)
    zeta = exponent.index(prof.n)
    integral = risk_integral(prof, zeta)
    tot = -integral
    for i in range(prof.k):
        tot += _log_fd(exponent, int(prof.risk_after[i]), int(prof.occupancy[i]))
    return float(tot)


def voyage_log_density(times_by_pilgrim, horizon: float, params: ModelParams) -> float:
    """Exact log-density of a recurrent-event configuration on (0, horizon].

    Computed as the sequential product: every traveller contributes the
    no-new-hotel exponential over the full horizon, each hotel contributes
    its founding rate nu/(rho + founder - 1), and each later traveller m
    contributes d/(m-1+rho) if he occupies or (m-1+rho-d)/(m-1+rho) if he
    passes, d being the occupancy just before him.  Invariant under
    relabelling of travellers.
    """
    if params.beta != 0.0:
        raise ValueError("the recurrent-event density is defined for beta = 0")
    if not (horizon > 0 and math.isfinite(horizon)):
        raise ValueError("horizon must be a positive real")
    rho, nu = params.rho, params.nu
    seqs = [np.asarray(s, dtype=float) for s in times_by_pilgrim]
    n = len(seqs)
    if n == 0:
        raise ValueError("need at least one traveller")
    for s in seqs:
        if s.size and (np.any(s <= 0) or np.any(s > horizon)):
            raise ValueError("all event times must lie in (0, horizon]")
        if s.size > 1 and np.any(np.diff(s) <= 0):
            raise ValueError("per-traveller times must be strictly increasing")

    # exponential factor: sum_i nu * horizon / (rho + i - 1) = nu * horizon * zeta(n)
    zeta_n = float(np.sum(1.0 / (rho + np.arange(n))))
    total = -nu * horizon * zeta_n

    visitors: dict[float, list[int]] = {}
    for i, s in enumerate(seqs, start=1):
        for t in s:
            visitors.setdefault(float(t), []).append(i)
    for t, vis in visitors.items():
        founder = vis[0]
        total += math.log(nu / (rho + founder - 1))
        d = 1
        occupants = set(vis)
        for m in range(founder + 1, n + 1):
            if m in occupants:
                total += math.log(d / (m - 1 + rho))
                d += 1
            else:
                total += math.log((m - 1 + rho - d) / (m - 1 + rho))
    return float(total)
