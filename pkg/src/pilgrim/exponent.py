"""Characteristic exponents, forward differences, and splitting rules.

Everything observable about the survival processes in this package is
driven by one object: the characteristic exponent of a nonnegative
infinitely divisible random variable,

    zeta(t) = -log E[exp(-t X)],   t >= 0,

restricted to the nonnegative integers (the "characteristic index").
Per-mile toll rates are first forward differences of the index, hotel
taxes are log-ratios of higher-order forward differences, and the
splitting rules q(r, d) that govern tie formation are normalized forward
differences.

Supported families:

* ``pilgrim(rho, nu)``:     zeta(t) = nu * (psi(rho + t) - psi(rho))
* ``gamma(rho)``:           zeta(t) = log(1 + t / rho)
* ``generalized(rho, beta, nu)``: index fixed by the normalization of the
  splitting rule q(r, d) ~ Gamma(r+rho) Gamma(d+beta) / Gamma(r+d+rho+beta);
  reduces to the pilgrim family at beta = 0
* ``iid(lam)``:             zeta(t) = lam * t (ties never occur)

Gamma-ratio arithmetic is done in log space with explicit sign tracking.
Alternating sums are never on the hot path; they exist as a cross-check
oracle (``forward_difference_alternating``) evaluated in extended
precision, because a double-precision alternating sum loses all accuracy
for orders d around 15-20.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.special import betaln, gammaln, psi

__all__ = [
    "ModelParams",
    "CharacteristicExponent",
    "SignedLog",
    "ForwardDifferenceTable",
    "ContinuityReport",
    "zeta_continuous",
    "zeta_discrete",
    "forward_difference",
    "forward_difference_signed",
    "forward_difference_alternating",
    "splitting_prob",
    "splitting_prob_from_index",
    "splitting_normalization",
    "continuity_check",
    "index_from_continuity",
    "levy_density",
]


@dataclass(frozen=True)
class ModelParams:
    """Parameter triple (rho, beta, nu) shared by every process variant.

    rho > 0 sets the baseline toll scale, beta > -1 interpolates between
    tie-rich (beta < 0) and tie-poor (beta > 0) regimes, and nu > 0 is a
    pure time scaling that never affects tie structure.
    """

    rho: float
    beta: float = 0.0
    nu: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be a positive real, got {self.rho}")
        if not (math.isfinite(self.beta) and self.beta > -1):
            raise ValueError(f"beta must exceed -1, got {self.beta}")
        if not (math.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be a positive real, got {self.nu}")

    @property
    def is_pilgrim(self) -> bool:
        return self.beta == 0.0

    def exponent(self) -> "CharacteristicExponent":
        if self.beta == 0.0:
            return CharacteristicExponent.pilgrim(self.rho, self.nu)
        return CharacteristicExponent.generalized(self.rho, self.beta, self.nu)


@dataclass(frozen=True)
class SignedLog:
    """A signed real stored as (sign, log magnitude).

    sign is -1, 0 or +1; log_abs is -inf when sign == 0.
    """

    sign: int
    log_abs: float

    @classmethod
    def from_value(cls, x: float) -> "SignedLog":
        if x == 0.0:
            return cls(0, -math.inf)
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @property
    def value(self) -> float:
        return 0.0 if self.sign == 0 else self.sign * math.exp(self.log_abs)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class CharacteristicExponent:
    """One member of the supported exponent families.

    Use the classmethod constructors; the generic constructor does not
    validate cross-field consistency.
    """

    family: str
    rho: float = math.nan
    beta: float = 0.0
    nu: float = 1.0
    lam: float = math.nan

    @classmethod
    def pilgrim(cls, rho: float, nu: float = 1.0) -> "CharacteristicExponent":
        ModelParams(rho, 0.0, nu)
        return cls("pilgrim", rho=rho, nu=nu)

    @classmethod
    def gamma(cls, rho: float) -> "CharacteristicExponent":
        if not (math.isfinite(rho) and rho > 0):
            raise ValueError(f"rho must be a positive real, got {rho}")
        return cls("gamma", rho=rho)

    @classmethod
    def generalized(cls, rho: float, beta: float, nu: float = 1.0) -> "CharacteristicExponent":
        ModelParams(rho, beta, nu)
        if beta == 0.0:
            return cls.pilgrim(rho, nu)
        return cls("generalized", rho=rho, beta=beta, nu=nu)

    @classmethod
    def iid(cls, lam: float) -> "CharacteristicExponent":
        if not (math.isfinite(lam) and lam > 0):
            raise ValueError(f"lam must be a positive real, got {lam}")
        return cls("iid", lam=lam)

    @classmethod
    def from_params(cls, params: ModelParams) -> "CharacteristicExponent":
        return params.exponent()

    # -- continuous exponent ------------------------------------------------

    def zeta(self, t):
        """Continuous exponent zeta(t) for t >= 0 (vectorized in t)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("t must be nonnegative")
        if self.family == "pilgrim":
            out = self.nu * (psi(self.rho + t) - psi(self.rho))
        elif self.family == "gamma":
            out = np.log1p(t / self.rho)
        elif self.family == "iid":
            out = self.lam * t
        else:  # generalized: only the integer index is defined
            n = np.rint(t)
            if not np.allclose(t, n, rtol=0, atol=0):
                raise ValueError(
                    "the generalized family has no continuous exponent; "
                    "evaluate at integer arguments"
                )
            out = self.index(int(np.max(n)) if t.size else 0)[n.astype(int)]
        return out if out.shape else float(out)

    # -- integer index ------------------------------------------------------

    def index(self, n_max: int) -> np.ndarray:
        """Index values (zeta_0, ..., zeta_{n_max}); zeta_0 = 0."""
        n = np.arange(n_max + 1)
        if self.family == "pilgrim":
            return self.nu * (psi(self.rho + n) - psi(self.rho))
        if self.family == "gamma":
            return np.log1p(n / self.rho)
        if self.family == "iid":
            return self.lam * n.astype(float)
        # generalized: telescoped first differences; matches the
        # normalization sum to rounding (tested against zeta_discrete)
        steps = np.exp(betaln(self.rho + np.arange(n_max), self.beta + 1.0)) if n_max else np.empty(0)
        return self.nu * np.concatenate(([0.0], np.cumsum(steps)))

    def mp_index(self, n_max: int) -> list:
        """Index values as mpmath numbers, for exact-arithmetic checks."""
        if self.family == "pilgrim":
            base = mpmath.digamma(self.rho)
            return [self.nu * (mpmath.digamma(self.rho + n) - base) for n in range(n_max + 1)]
        if self.family == "gamma":
            return [mpmath.log(1 + mpmath.mpf(n) / self.rho) for n in range(n_max + 1)]
        if self.family == "iid":
            return [mpmath.mpf(self.lam) * n for n in range(n_max + 1)]
        rho, beta = mpmath.mpf(self.rho), mpmath.mpf(self.beta)
        vals = [mpmath.mpf(0)]
        for r in range(n_max):
            vals.append(vals[-1] + self.nu * mpmath.beta(rho + r, beta + 1))
        return vals

    # -- forward differences ------------------------------------------------

    def log_forward_difference(self, r: int, d: int) -> float:
        """log of (-1)^(d-1) (Delta^d zeta)(r) for d >= 1.

        Closed forms exist for the pilgrim and generalized families; the
        gamma family falls back to a compensated alternating sum, and the
        iid family is exactly zero for d >= 2 (returns -inf).
        """
        if d < 1 or r < 0:
            raise ValueError("need r >= 0 and d >= 1")
        if self.family in ("pilgrim", "generalized"):
            return (
                math.log(self.nu)
                + gammaln(r + self.rho)
                + gammaln(d + self.beta)
                - gammaln(r + d + self.rho + self.beta)
            )
        if self.family == "iid":
            if d == 1:
                return math.log(self.lam)
            return -math.inf
        val = self._alternating_sum_float(r, d) * (-1) ** (d - 1)
        if val <= 0:
            raise ValueError(
                f"forward difference of order {d} at {r} is not positive; "
                "not a valid survival-process exponent"
            )
        return math.log(val)

    def _alternating_sum_float(self, r: int, d: int) -> float:
        zs = self.index(r + d)
        terms = [(-1.0) ** (d - j) * math.comb(d, j) * zs[r + j] for j in range(d + 1)]
        return math.fsum(terms)


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def zeta_continuous(exponent: CharacteristicExponent, t) -> float:
    """Evaluate the continuous exponent zeta(t)."""
    return exponent.zeta(t)


def zeta_discrete(params: ModelParams, n: int) -> float:
    """Index value zeta_n of the generalized family, by the normalization sum.

    zeta_n = nu * sum_{d=1}^{n} C(n,d) Gamma(n-d+rho) Gamma(d+beta) / Gamma(n+rho+beta),

    accumulated in log space.  At beta = 0 this agrees with the pilgrim
    closed form nu * (psi(n+rho) - psi(rho)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = np.arange(1, n + 1)
    logterms = (
        gammaln(n + 1)
        - gammaln(d + 1)
        - gammaln(n - d + 1)
        + gammaln(n - d + params.rho)
        + gammaln(d + params.beta)
        - gammaln(n + params.rho + params.beta)
    )
    m = logterms.max()
    return params.nu * float(np.exp(m) * np.exp(logterms - m).sum())


def forward_difference_signed(exponent: CharacteristicExponent, r: int, d: int) -> SignedLog:
    """(Delta^d zeta)(r) as a SignedLog; d = 0 returns zeta(r)."""
    if r < 0 or d < 0:
        raise ValueError("need r >= 0 and d >= 0")
    if d == 0:
        return SignedLog.from_value(float(exponent.index(r)[r]))
    if exponent.family == "iid" and d >= 2:
        return SignedLog(0, -math.inf)
    sign = 1 if d % 2 == 1 else -1
    return SignedLog(sign, exponent.log_forward_difference(r, d))


def forward_difference(exponent: CharacteristicExponent, r: int, d: int) -> float:
    """(Delta^d zeta)(r) as a plain signed float."""
    return forward_difference_signed(exponent, r, d).value


def forward_difference_alternating(
    exponent: CharacteristicExponent, r: int, d: int, dps: int = 50
) -> float:
    """Cross-check oracle: the defining alternating sum, in extended precision.

    sum_{j=0}^{d} (-1)^(d-j) C(d,j) zeta(r+j) evaluated with mpmath at
    ``dps`` digits, returned as a float.  Kept off the hot path; with
    doubles the cancellation is catastrophic for d around 15-20.
    """
    if r < 0 or d < 0:
        raise ValueError("need r >= 0 and d >= 0")
    with mpmath.workdps(dps):
        zs = exponent.mp_index(r + d)
        total = mpmath.mpf(0)
        for j in range(d + 1):
            total += (-1) ** (d - j) * math.comb(d, j) * zs[r + j]
        return float(total)


@dataclass(frozen=True)
class ForwardDifferenceTable:
    """Triangular table of (Delta^j zeta)(r+i), built by direct differencing.

    Row j holds (Delta^j zeta)(r), ..., (Delta^j zeta)(r + d - j) as
    SignedLog values.  This is the definition-route artifact used for
    cross-checks; closed forms are preferred for computation.
    """

    origin: int
    order: int
    rows: tuple

    @classmethod
    def build(cls, exponent: CharacteristicExponent, r: int, d: int) -> "ForwardDifferenceTable":
        if r < 0 or d < 1:
            raise ValueError("need r >= 0 and d >= 1")
        vals = [float(z) for z in exponent.index(r + d)[r:]]
        rows = [tuple(SignedLog.from_value(v) for v in vals)]
        cur = vals
        for _ in range(d):
            cur = [b - a for a, b in zip(cur, cur[1:])]
            rows.append(tuple(SignedLog.from_value(v) for v in cur))
        return cls(origin=r, order=d, rows=tuple(rows))

    def value(self, j: int, i: int = 0) -> float:
        return self.rows[j][i].value


def _log_base_index(rho: float, beta: float, n_max: int) -> np.ndarray:
    """log of the nu-free index values zeta_n / nu for n = 1..n_max."""
    if beta == 0.0:
        vals = psi(rho + np.arange(1, n_max + 1)) - psi(rho)
    else:
        steps = np.exp(betaln(rho + np.arange(n_max), beta + 1.0))
        vals = np.cumsum(steps)
    return np.log(vals)


def splitting_prob(params: ModelParams, r: int, d: int) -> float:
    """Splitting rule q(r, d): the chance that a given set of d units fails
    while a given set of r units survives, at an event with r+d at risk.

        q(r, d) = Gamma(r+rho) Gamma(d+beta) / (Gamma(r+d+rho+beta) * zeta_{r+d}/nu)

    nu cancels; the result depends only on (rho, beta).
    """
    if r < 0 or d < 1:
        raise ValueError("need r >= 0 and d >= 1")
    lognum = (
        gammaln(r + params.rho)
        + gammaln(d + params.beta)
        - gammaln(r + d + params.rho + params.beta)
    )
    logden = _log_base_index(params.rho, params.beta, r + d)[-1]
    return float(np.exp(lognum - logden))


def splitting_prob_table(params: ModelParams, n: int) -> np.ndarray:
    """Matrix q[r, d] for r = 0..n-1, d = 1..n-r (nan outside the triangle)."""
    logz = _log_base_index(params.rho, params.beta, n)
    out = np.full((n, n + 1), np.nan)
    for r in range(n):
        d = np.arange(1, n - r + 1)
        lognum = (
            gammaln(r + params.rho)
            + gammaln(d + params.beta)
            - gammaln(r + d + params.rho + params.beta)
        )
        out[r, 1 : n - r + 1] = np.exp(lognum - logz[r + d - 1])
    return out


def splitting_prob_from_index(index_values, r: int, d: int) -> float:
    """q(r, d) computed from a raw characteristic index (zeta_1, zeta_2, ...).

    Uses q(r, d) = (-1)^(d+1) (Delta^d zeta)(r) / zeta_{r+d} with the
    alternating sum on the given values; intended for small r + d.
    """
    zs = [0.0] + [float(z) for z in index_values]
    if r < 0 or d < 1 or r + d > len(zs) - 1:
        raise ValueError("index too short for the requested (r, d)")
    num = math.fsum((-1.0) ** (d - j) * math.comb(d, j) * zs[r + j] for j in range(d + 1))
    return (-1) ** (d + 1) * num / zs[r + d]


def splitting_normalization(params: ModelParams, n: int) -> float:
    """sum_{d=1}^{n} C(n,d) q(n-d, d); equals 1 for a consistent rule."""
    d = np.arange(1, n + 1)
    logc = gammaln(n + 1) - gammaln(d + 1) - gammaln(n - d + 1)
    lognum = (
        gammaln(n - d + params.rho)
        + gammaln(d + params.beta)
        - gammaln(n + params.rho + params.beta)
    )
    logden = _log_base_index(params.rho, params.beta, n)[-1]
    return float(np.exp(logc + lognum - logden).sum())


# ---------------------------------------------------------------------------
# weak-continuity machinery
# ---------------------------------------------------------------------------


@dataclass
class ContinuityReport:
    """Result of checking the weak-continuity condition on an index.

    The condition, for every r >= 0 and d >= 2 with r + d + 1 <= n_max:

        (Delta zeta)(r+d) / (Delta zeta)(r) == (Delta^d zeta)(r+1) / (Delta^d zeta)(r)

    ``max_violation`` is the largest absolute difference of the two ratios;
    0/0 cases (trivial higher differences, the iid family) are listed in
    ``degenerate`` instead of being scored.
    """

    n_max: int
    tol: float
    max_violation: float
    argmax: tuple
    n_checked: int
    degenerate: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def continuity_check(index, tol: float = 1e-10, n_max: int | None = None) -> ContinuityReport:
    """Check the weak-continuity condition for an exponent or a raw index.

    ``index`` may be a CharacteristicExponent (evaluated in extended
    precision, so rounding of the index itself cannot mask violations at
    high orders) or a sequence (zeta_1, ..., zeta_N) of floats.
    """
    if isinstance(index, CharacteristicExponent):
        if n_max is None:
            raise ValueError("n_max is required when passing an exponent")
        with mpmath.workdps(40):
            zs = index.mp_index(n_max)
            return _continuity_scan(zs, n_max, tol)
    vals = list(index)
    if n_max is not None:
        vals = vals[:n_max]
    n = len(vals)
    zs = [mpmath.mpf(0)] + [mpmath.mpf(float(v)) for v in vals]
    return _continuity_scan(zs, n, tol)


def _continuity_scan(zs, n_max: int, tol: float) -> ContinuityReport:
    if n_max < 3:
        raise ValueError("need an index of length >= 3 to test continuity")

    def delta(r, d):
        return mpmath.fsum(
            (-1) ** (d - j) * math.comb(d, j) * zs[r + j] for j in range(d + 1)
        )

    scale = abs(zs[n_max])
    tiny = mpmath.mpf(10) ** (-mpmath.mp.dps + 8) * scale
    best = -1.0
    arg = (-1, -1)
    checked = 0
    degenerate = []
    violations = []
    for d in range(2, n_max):
        for r in range(0, n_max - d):
            lo = delta(r, d)
            hi = delta(r + 1, d)
            if abs(lo) < tiny and abs(hi) < tiny:
                degenerate.append((r, d))
                continue
            lhs = (zs[r + d + 1] - zs[r + d]) / (zs[r + 1] - zs[r])
            rhs = hi / lo
            v = float(abs(lhs - rhs))
            checked += 1
            if v > tol:
                violations.append((r, d, v))
            if v > best:
                best, arg = v, (r, d)
    return ContinuityReport(
        n_max=n_max,
        tol=tol,
        max_violation=best if best >= 0 else 0.0,
        argmax=arg,
        n_checked=checked,
        degenerate=degenerate,
        violations=violations,
    )


def index_from_continuity(zeta1: float, c: float, n_max: int) -> np.ndarray:
    """Reconstruct an index (zeta_1..zeta_N) from the continuity condition.

    Sets zeta_2 = zeta_1 (1 + c) for c in [0, 1] and solves the d = 2
    continuity condition, which is linear in zeta_{n+1} given its
    predecessors.  The result is the harmonic (pilgrim) index with rho
    solving c = rho / (1 + rho); c = 1 gives the iid index, c = 0 the
    single-block limit.
    """
    if not (0.0 <= c <= 1.0):
        raise ValueError(f"c must lie in [0, 1], got {c}")
    if zeta1 <= 0:
        raise ValueError("zeta1 must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    zs = np.zeros(n_max + 1)
    zs[1] = zeta1
    if n_max >= 2:
        zs[2] = zeta1 * (1.0 + c)
    for n in range(2, n_max):
        # (Delta zeta)(n) * (Delta^2 zeta)(n-2) = (Delta^2 zeta)(n-1) * (Delta zeta)(n-2)
        a = zs[n] - 2.0 * zs[n - 1] + zs[n - 2]
        b = zs[n - 1] - zs[n - 2]
        denom = a - b
        if denom == 0.0:
            if a == 0.0 and b == 0.0:
                zs[n + 1] = zs[n]  # constant index (single-block limit): 0/0, stay flat
                continue
            raise ValueError(f"singular linear step at index n={n + 1}")
        zs[n + 1] = (zs[n] * a - (2.0 * zs[n] - zs[n - 1]) * b) / denom
    return zs[1:]


def levy_density(exponent: CharacteristicExponent, z) -> float:
    """Density of the Levy measure at z > 0.

    pilgrim: nu * exp(-rho z) / (1 - exp(-z));  gamma: exp(-rho z) / z.
    The iid and generalized families have no known density here.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("z must be positive")
    if exponent.family == "pilgrim":
        out = exponent.nu * np.exp(-exponent.rho * z) / (-np.expm1(-z))
    elif exponent.family == "gamma":
        out = np.exp(-exponent.rho * z) / z
    else:
        raise ValueError(f"no Levy density available for the {exponent.family} family")
    return out if out.shape else float(out)
