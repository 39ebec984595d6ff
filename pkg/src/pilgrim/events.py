"""Tie structure of event sequences: hotels, occupancies, risk counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TieProfile", "as_event_array", "tie_profile", "risk_integral"]


def as_event_array(times) -> np.ndarray:
    """Validate and return an event sequence as a float array."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.ndim != 1:
        raise ValueError("an event sequence must be one-dimensional")
    if t.size and not np.all(np.isfinite(t)):
        raise ValueError("event times must be finite")
    if t.size and np.any(t <= 0):
        raise ValueError("event times must be strictly positive")
    return t


@dataclass(frozen=True)
class TieProfile:
    """Distinct times with occupancies and risk counts.

    positions: distinct times t_1 < ... < t_k
    occupancy: d_r = multiplicity of t_r (sum = n)
    risk_after: number of events strictly beyond t_r (so risk_after[-1] = 0)
    """

    positions: np.ndarray
    occupancy: np.ndarray
    risk_after: np.ndarray

    @property
    def n(self) -> int:
        return int(self.occupancy.sum())

    @property
    def k(self) -> int:
        return self.positions.size

    @property
    def risk_on_segment(self) -> np.ndarray:
        """Risk count on (t_{r-1}, t_r), i.e. just below each position."""
        return self.risk_after + self.occupancy


def tie_profile(times) -> TieProfile:
    """Extract the tie structure of an event sequence.

    Ties are exact float equality; the sequential simulation produces tied
    values by copying positions, so no tolerance is involved.
    """
    t = as_event_array(times)
    if t.size == 0:
        raise ValueError("empty event sequence")
    pos, counts = np.unique(t, return_counts=True)
    risk_after = t.size - np.cumsum(counts)
    return TieProfile(pos, counts, risk_after)


def risk_integral(profile: TieProfile, index_values: np.ndarray) -> float:
    """Exact value of the integral of zeta(R(s)) ds over s > 0.

    The risk function is piecewise constant, so the integral is the finite
    sum of index_values[R] * segment length over inter-hotel segments.
    index_values must cover 0..n.
    """
    seg = np.diff(np.concatenate(([0.0], profile.positions)))
    return float(np.dot(index_values[profile.risk_on_segment], seg))
