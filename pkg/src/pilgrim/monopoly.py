"""Sequential simulation of the toll-and-tax survival process.

Travellers set out from the origin with independent unit-mean exponential
funds.  With R travellers still ahead of point s, the posted toll rate is

    tau(s) = nu * B(rho + R, beta + 1)   per mile
           = nu / (rho + R)              at beta = 0,

and a hotel housing d residents, with R travellers beyond it, taxes each
passer-by

    log((R + d + rho + beta) / (R + rho)),

the log-ratio of upstream to downstream toll rates when beta = 0.  A
traveller whose funds run out mid-segment founds a new hotel there; one
who cannot cover a tax forfeits the remainder and joins that hotel.  The
map from funds to destinations is deterministic; multiplying nu by c
divides every destination by c and leaves all taxes unchanged.

The money ledger accounts for every dollar: funds = tolls + taxes +
forfeits, and total tolls equal the integral of zeta(R(s)) ds over the
final risk function.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from . import _kernels
from .events import TieProfile, as_event_array, tie_profile, risk_integral
from .exponent import CharacteristicExponent, ModelParams

__all__ = [
    "HotelLedger",
    "PredictiveCurve",
    "StepFunction",
    "WealthReport",
    "advance_one_pilgrim",
    "simulate_from_funds",
    "simulate",
    "predictive_survival",
    "taxes_only_survival",
    "toll_total",
    "wealth_report",
    "replicate_rng",
]

FAST_ENGINE_THRESHOLD = 4096


def replicate_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator stream for replicate ``index`` of run ``seed``.

    Streams are derived as SeedSequence(seed, spawn_key=(index,)), so any
    subset of replicates can be produced in any order or in parallel.
    """
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def toll_rate_base(params: ModelParams, count: int) -> np.ndarray:
    """nu-free toll rates indexed by the number of travellers ahead."""
    r = np.arange(max(count, 1))
    if params.beta == 0.0:
        return 1.0 / (params.rho + r)
    return np.exp(betaln(params.rho + r, params.beta + 1.0))


class HotelLedger:
    """Full state of the process after n travellers: hotel positions,
    occupancies, per-hotel wealth, and the per-traveller money split."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.positions: list[float] = []
        self.occupancy: list[int] = []
        self.wealth: list[float] = []
        self.founder: list[int] = []
        self.times: list[float] = []
        self.funds: list[float] = []
        self.toll_paid: list[float] = []
        self.tax_paid: list[float] = []
        self.forfeit: list[float] = []
        self._base = toll_rate_base(params, 1)

    # -- state ---------------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.times)

    @property
    def k(self) -> int:
        return len(self.positions)

    def risk_counts(self) -> np.ndarray:
        """Travellers beyond each hotel, in spatial order (last entry 0)."""
        return self.n - np.cumsum(np.asarray(self.occupancy, dtype=np.int64))

    def _ensure_base(self, count: int) -> None:
        if self._base.size < count:
            self._base = toll_rate_base(self.params, max(count, 2 * self._base.size))

    # -- the walk --------------------------------------------------------------

    def advance(self, funds: float) -> float:
        """Send one traveller with the given funds; return the destination.

        Exhausting funds exactly at a hotel counts as staying there.
        """
        if not (math.isfinite(funds) and funds > 0):
            raise ValueError(f"funds must be a positive real, got {funds}")
        funds_in = funds
        rho, beta, nu = self.params.rho, self.params.beta, self.params.nu
        m = self.n
        self._ensure_base(m + 1)
        base = self._base
        pos, occ, wel = self.positions, self.occupancy, self.wealth
        R = m
        cur = 0.0
        toll_m = 0.0
        tax_m = 0.0
        forf_m = 0.0
        dest = -1.0
        joined = -1
        insert_at = -1
        j = 0
        k = len(pos)
        while j < k:
            rate = nu * base[R]
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
            rate = nu * base[R]
            dest = cur + funds / rate
            toll_m += funds
            funds = 0.0
            insert_at = k
        if joined >= 0:
            dest = pos[joined]
            occ[joined] += 1
            wel[joined] = float(wel[joined] + forf_m)
        else:
            pos.insert(insert_at, float(dest))
            occ.insert(insert_at, 1)
            wel.insert(insert_at, 0.0)
            self.founder.insert(insert_at, m + 1)
        dest = float(dest)
        self.times.append(dest)
        self.funds.append(float(funds_in))
        self.toll_paid.append(float(toll_m))
        self.tax_paid.append(float(tax_m))
        self.forfeit.append(float(forf_m))
        return dest

    # -- money ---------------------------------------------------------------

    @property
    def total_funds(self) -> float:
        return float(np.sum(self.funds))

    @property
    def total_tolls(self) -> float:
        return float(np.sum(self.toll_paid))

    @property
    def total_taxes_and_forfeits(self) -> float:
        return float(np.sum(self.wealth))

    def money_residual(self) -> float:
        """sum(funds) - toll integral - hotel wealth; 0 up to rounding."""
        return self.total_funds - toll_total(self) - self.total_taxes_and_forfeits

    def segment_tolls(self) -> list[dict]:
        """Total toll collected per inter-hotel segment, from the final
        risk function (zeta(R) times segment length)."""
        if self.k == 0:
            return []
        prof = self.profile()
        zeta = self.params.exponent().index(self.n)
        seg = np.diff(np.concatenate(([0.0], prof.positions)))
        risks = prof.risk_on_segment
        return [
            {
                "segment": i + 1,
                "start": float(np.concatenate(([0.0], prof.positions))[i]),
                "end": float(prof.positions[i]),
                "risk": int(risks[i]),
                "toll": float(zeta[risks[i]] * seg[i]),
            }
            for i in range(self.k)
        ]

    # -- views ---------------------------------------------------------------

    def profile(self) -> TieProfile:
        return TieProfile(
            np.asarray(self.positions, dtype=float),
            np.asarray(self.occupancy, dtype=np.int64),
            self.risk_counts(),
        )

    def hotel_index_of(self, t: float) -> int:
        """1-based spatial index of the hotel at position t."""
        i = int(np.searchsorted(self.positions, t))
        if i >= self.k or self.positions[i] != t:
            raise ValueError(f"no hotel at position {t}")
        return i + 1

    def pilgrim_table(self) -> list[dict]:
        return [
            {
                "pilgrim": i + 1,
                "time": self.times[i],
                "hotel_index": self.hotel_index_of(self.times[i]),
                "funds": self.funds[i],
                "toll_paid": self.toll_paid[i],
                "tax_paid": self.tax_paid[i],
                "forfeit": self.forfeit[i],
            }
            for i in range(self.n)
        ]

    def hotel_table(self) -> list[dict]:
        order = np.argsort(np.argsort(self.founder))  # founding rank per spatial slot
        return [
            {
                "hotel_index": i + 1,
                "founding_order": int(order[i]) + 1,
                "position": self.positions[i],
                "occupancy": self.occupancy[i],
                "wealth": self.wealth[i],
                "founded_by": self.founder[i],
            }
            for i in range(self.k)
        ]

    def write_csv(self, path_or_buf) -> None:
        rows = self.pilgrim_table()
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            f = open(path_or_buf, "w", newline="")
            close = True
        else:
            f = path_or_buf
        try:
            w = csv.writer(f)
            w.writerow(["pilgrim", "time", "hotel_index", "funds", "toll_paid", "tax_paid", "forfeit"])
            for r in rows:
                w.writerow(
                    [
                        r["pilgrim"],
                        repr(r["time"]),
                        r["hotel_index"],
                        repr(r["funds"]),
                        repr(r["toll_paid"]),
                        repr(r["tax_paid"]),
                        repr(r["forfeit"]),
                    ]
                )
        finally:
            if close:
                f.close()

    def to_json(self) -> str:
        payload = {
            "params": {"rho": self.params.rho, "beta": self.params.beta, "nu": self.params.nu},
            "pilgrims": self.pilgrim_table(),
            "hotels": self.hotel_table(),
        }
        return json.dumps(payload)

    # -- construction from kernel output --------------------------------------

    @classmethod
    def _from_arrays(cls, params, X, T, toll, tax, forf, newh, pos, occ, wel, fdr) -> "HotelLedger":
        led = cls(params)
        led.positions = [float(v) for v in pos]
        led.occupancy = [int(v) for v in occ]
        led.wealth = [float(v) for v in wel]
        led.founder = [int(v) for v in fdr]
        led.times = [float(v) for v in T]
        led.funds = [float(v) for v in X]
        led.toll_paid = [float(v) for v in toll]
        led.tax_paid = [float(v) for v in tax]
        led.forfeit = [float(v) for v in forf]
        return led


def advance_one_pilgrim(ledger: HotelLedger, funds: float) -> tuple[float, HotelLedger]:
    """Advance the ledger by one traveller; returns (destination, ledger)."""
    t = ledger.advance(funds)
    return t, ledger


def simulate_from_funds(X, params: ModelParams, engine: str = "auto"):
    """Deterministic funds-to-times map; returns (times, ledger).

    engine: "python" walks the reference ledger, "fast" uses the compiled
    kernel, "auto" picks by size.  Both produce identical output.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 1 or X.size == 0:
        raise ValueError("X must be a non-empty one-dimensional sequence")
    if np.any(X <= 0) or not np.all(np.isfinite(X)):
        raise ValueError("funds must be positive and finite")
    if engine == "auto":
        engine = "fast" if (_kernels.HAVE_NUMBA and X.size >= FAST_ENGINE_THRESHOLD) else "python"
    if engine == "fast":
        base = toll_rate_base(params, X.size)
        out = _kernels.monopoly_walk(X, params.rho, params.beta, params.nu, base)
        ledger = HotelLedger._from_arrays(params, X, *out)
        return np.asarray(ledger.times, dtype=float), ledger
    if engine != "python":
        raise ValueError(f"unknown engine {engine!r}")
    ledger = HotelLedger(params)
    for x in X:
        ledger.advance(float(x))
    return np.asarray(ledger.times, dtype=float), ledger


def simulate(n: int, params: ModelParams, seed: int, engine: str = "auto"):
    """Simulate n travellers with unit-mean exponential funds.

    Fully reproducible: the same (n, params, seed) give bit-identical
    output.  Returns (times, ledger).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    X = rng.exponential(size=n)
    return simulate_from_funds(X, params, engine=engine)


# ---------------------------------------------------------------------------
# predictive distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredictiveCurve:
    """Conditional survival curve of the next event given a history.

    Piecewise-exponential with atoms: hazard density ``rates[i]`` on the
    segment (starts[i], starts[i+1]) and an atom ``atoms[r]`` at each
    hotel.  survival() is right-continuous with S(0) = 1.
    """

    starts: np.ndarray  # 0 = s_0 < t_1 < ... < t_k
    rates: np.ndarray  # per-mile hazard on each of the k+1 segments
    atoms: np.ndarray  # tax at t_1..t_k
    _cum: np.ndarray = None

    def __post_init__(self):
        seg = np.diff(self.starts)
        cum = np.zeros(self.starts.size)
        if seg.size:
            cum[1:] = np.cumsum(self.rates[:-1] * seg + self.atoms)
        object.__setattr__(self, "_cum", cum)

    @property
    def positions(self) -> np.ndarray:
        return self.starts[1:]

    def cumulative_hazard(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("t must be nonnegative")
        j = np.searchsorted(self.starts, t, side="right") - 1
        out = self._cum[j] + self.rates[j] * (t - self.starts[j])
        return out if out.shape else float(out)

    def survival(self, t):
        return np.exp(-self.cumulative_hazard(t))

    def __call__(self, t):
        return self.survival(t)


def predictive_survival(history, params: ModelParams) -> PredictiveCurve:
    """Posted tolls and taxes for the next traveller, as a survival curve.

    With no history the curve is exponential with rate zeta(1).
    """
    from .density import hazard_atoms  # local import to avoid a cycle

    exponent = params.exponent()
    hist = as_event_array(history) if history is not None else np.empty(0)
    base = toll_rate_base(params, hist.size + 1) * params.nu
    if hist.size == 0:
        return PredictiveCurve(np.array([0.0]), base[:1], np.empty(0))
    prof = tie_profile(hist)
    starts = np.concatenate(([0.0], prof.positions))
    rates = base[np.concatenate((prof.risk_on_segment, [0]))]
    atoms = hazard_atoms(prof, exponent)
    return PredictiveCurve(starts, rates, atoms)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function with value 1 before the first knot."""

    knots: np.ndarray
    values: np.ndarray  # value on [knots[i], knots[i+1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        j = np.searchsorted(self.knots, t, side="right") - 1
        vals = np.concatenate(([1.0], self.values))
        out = vals[j + 1]
        return out if out.shape else float(out)


def taxes_only_survival(history, rho: float) -> StepFunction:
    """Survival from hotel taxes alone (beta = 0 schedule):

        S(t) = prod_{r: t_r <= t} (rho + R(t_r)) / (rho + R(t_r) + d_r).

    At rho = 0 this is exactly the Kaplan-Meier estimate of the history.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    prof = tie_profile(history)
    factors = (rho + prof.risk_after) / (rho + prof.risk_after + prof.occupancy)
    return StepFunction(prof.positions, np.cumprod(factors))


# ---------------------------------------------------------------------------
# money reports
# ---------------------------------------------------------------------------


def toll_total(ledger: HotelLedger) -> float:
    """Total toll take Z = integral of zeta(R(s)) ds, as an exact finite sum."""
    if ledger.k == 0:
        return 0.0
    zeta = ledger.params.exponent().index(ledger.n)
    return risk_integral(ledger.profile(), zeta)


@dataclass(frozen=True)
class WealthReport:
    """Per-hotel wealth in spatial order, with founding ranks attached."""

    rows: tuple
    toll_total: float
    money_residual: float

    def spatial(self) -> list[dict]:
        return list(self.rows)

    def temporal(self) -> list[dict]:
        return sorted(self.rows, key=lambda r: r["founding_order"])


def wealth_report(ledger: HotelLedger) -> WealthReport:
    rows = []
    for h in ledger.hotel_table():
        h = dict(h)
        h["per_occupant"] = h["wealth"] / h["occupancy"]
        rows.append(h)
    return WealthReport(
        rows=tuple(rows),
        toll_total=toll_total(ledger),
        money_residual=ledger.money_residual(),
    )
