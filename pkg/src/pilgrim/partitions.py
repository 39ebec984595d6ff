"""Ordered partitions, induced partitions, and the Ewens/CRP toolkit.

Units are labelled 1..n.  An ordered partition ranks its blocks by event
time (earliest first); forgetting the ranking gives an exchangeable
partition whose law, for beta = 1, is exactly the Ewens sampling formula
with theta = rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .events import as_event_array
from .exponent import ModelParams, splitting_prob_table
from .monopoly import replicate_rng

__all__ = [
    "OrderedPartition",
    "Partition",
    "extract_ordered_partition",
    "ordered_partition_logprob",
    "induced_partition_prob",
    "esf_logprob",
    "esf_prob",
    "crp_sample",
    "two_param_crp_sample",
    "size_biased_order",
    "size_biased_log_weight",
    "stick_breaking_sample",
    "enumerate_partitions",
    "compositions",
    "ordered_partition_total_prob",
    "tv_distance_to_esf",
]

MAX_EXACT_BLOCKS = 9


def _canonical_blocks(blocks) -> tuple:
    out = tuple(frozenset(int(x) for x in b) for b in blocks)
    if not out or any(len(b) == 0 for b in out):
        raise ValueError("blocks must be non-empty")
    union = set().union(*out)
    if sum(len(b) for b in out) != len(union):
        raise ValueError("blocks must be disjoint")
    if union != set(range(1, len(union) + 1)):
        raise ValueError("blocks must cover {1, ..., n}")
    return out


@dataclass(frozen=True)
class OrderedPartition:
    """Disjoint non-empty blocks of {1..n} in rank order."""

    blocks: tuple

    @classmethod
    def of(cls, blocks) -> "OrderedPartition":
        return cls(_canonical_blocks(blocks))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple:
        return tuple(len(b) for b in self.blocks)

    def partition(self) -> "Partition":
        return Partition.of(self.blocks)

    def to_lists(self) -> list:
        return [sorted(b) for b in self.blocks]


@dataclass(frozen=True)
class Partition:
    """Unordered partition; blocks stored sorted by smallest element."""

    blocks: tuple

    @classmethod
    def of(cls, blocks) -> "Partition":
        canon = sorted(_canonical_blocks(blocks), key=min)
        return cls(tuple(canon))

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        groups: dict[int, list[int]] = {}
        for i, lab in enumerate(labels, start=1):
            groups.setdefault(int(lab), []).append(i)
        return cls.of(groups.values())

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple:
        return tuple(len(b) for b in self.blocks)

    def to_lists(self) -> list:
        return [sorted(b) for b in self.blocks]


def extract_ordered_partition(times) -> OrderedPartition:
    """Group unit labels by tied event times, ranked by increasing time."""
    t = as_event_array(times)
    if t.size == 0:
        raise ValueError("empty event sequence")
    groups: dict[float, list[int]] = {}
    for i, v in enumerate(t, start=1):
        groups.setdefault(float(v), []).append(i)
    return OrderedPartition.of([groups[v] for v in sorted(groups)])


# ---------------------------------------------------------------------------
# exact evaluators
# ---------------------------------------------------------------------------


def ordered_partition_logprob(A: OrderedPartition, params: ModelParams) -> float:
    """log prod_i q(r_i, d_i) with r_i the units ranked below block i."""
    qtab = splitting_prob_table(params, A.n)
    r = A.n
    tot = 0.0
    for d in A.sizes:
        r -= d
        tot += math.log(qtab[r, d])
    return tot


def _induced_prob_given_sizes(sizes: tuple, qtab: np.ndarray) -> float:
    n = sum(sizes)
    k = len(sizes)
    total = 0.0
    for p in permutations(range(k)):
        r = n
        prod = 1.0
        for idx in p:
            d = sizes[idx]
            r -= d
            prod *= qtab[r, d]
        total += prod
    return total


def induced_partition_prob(B: Partition, params: ModelParams) -> float:
    """Probability of an unordered partition: the permutation sum over all
    block rankings.  Exact; refuses beyond 9 blocks (9! terms)."""
    if B.k > MAX_EXACT_BLOCKS:
        raise ValueError(f"exact permutation sum capped at {MAX_EXACT_BLOCKS} blocks")
    qtab = splitting_prob_table(params, B.n)
    return _induced_prob_given_sizes(tuple(sorted(B.sizes)), qtab)


def esf_logprob(B: Partition, theta: float) -> float:
    """Ewens sampling formula: log[ theta^k prod Gamma(d_b) / theta^(n asc) ]."""
    if theta <= 0:
        raise ValueError("theta must be positive")
    n = B.n
    return float(
        B.k * math.log(theta)
        + sum(gammaln(d) for d in B.sizes)
        - (gammaln(theta + n) - gammaln(theta))
    )


def esf_prob(B: Partition, theta: float) -> float:
    return math.exp(esf_logprob(B, theta))


def size_biased_log_weight(A: OrderedPartition) -> float:
    """log prod_i d_i / (d_i + r_i): the chance of drawing the blocks in
    this order when sampling without replacement with size weights."""
    r = A.n
    tot = 0.0
    for d in A.sizes:
        r -= d
        tot += math.log(d / (d + r))
    return tot


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def two_param_crp_sample(n: int, alpha: float, theta: float, seed) -> Partition:
    """Two-parameter seating: a new table with probability proportional to
    theta + alpha * (#tables), table b with probability proportional to
    #b - alpha."""
    if not (0 <= alpha < 1):
        raise ValueError("alpha must lie in [0, 1)")
    if theta <= 0:
        raise ValueError("theta must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _as_rng(seed)
    u = rng.random(n)
    _, labels = _kernels.crp_walk(u, float(theta), float(alpha))
    return Partition.from_labels(labels)


def crp_sample(n: int, theta: float, seed) -> Partition:
    """One-parameter Chinese restaurant seating."""
    return two_param_crp_sample(n, 0.0, theta, seed)


def size_biased_order(B: Partition, seed) -> OrderedPartition:
    """Rank blocks by sampling without replacement, weights = block sizes."""
    rng = _as_rng(seed)
    blocks = list(B.blocks)
    sizes = np.array([len(b) for b in blocks], dtype=float)
    order = []
    idx = list(range(len(blocks)))
    while idx:
        w = sizes[idx] / sizes[idx].sum()
        pick = rng.choice(len(idx), p=w)
        order.append(blocks[idx[pick]])
        idx.pop(pick)
    return OrderedPartition(tuple(order))


def stick_breaking_sample(beta: float, rho: float, depth: int, seed) -> np.ndarray:
    """Ranked block frequencies P_i = W_i prod_{j<i} (1 - W_j), W ~ Beta(beta, rho)."""
    if beta <= 0 or rho <= 0:
        raise ValueError("beta and rho must be positive")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    rng = _as_rng(seed)
    w = rng.beta(beta, rho, size=depth)
    tail = np.concatenate(([1.0], np.cumprod(1.0 - w)[:-1]))
    return w * tail


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def enumerate_partitions(n: int):
    """All set partitions of {1..n}, one Partition per item."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def rec(i, blocks):
        if i > n:
            yield Partition.of([list(b) for b in blocks])
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(1, [])


def compositions(n: int):
    """All ordered tuples of positive integers summing to n."""

    def rec(rem, acc):
        if rem == 0:
            yield tuple(acc)
            return
        for d in range(1, rem + 1):
            acc.append(d)
            yield from rec(rem - d, acc)
            acc.pop()

    yield from rec(n, [])


def ordered_partition_total_prob(n: int, params: ModelParams) -> float:
    """Total mass of the ordered-partition law over all ordered set
    partitions of {1..n}; 1 for a consistent splitting rule.

    Enumerates size compositions and counts labelings with a multinomial
    coefficient instead of materializing every ordered set partition.
    """
    qtab = splitting_prob_table(params, n)
    logfac = gammaln(np.arange(n + 1) + 1)
    total = 0.0
    for comp in compositions(n):
        logmult = logfac[n] - sum(logfac[d] for d in comp)
        r = n
        logq = 0.0
        for d in comp:
            r -= d
            logq += math.log(qtab[r, d])
        total += math.exp(logmult + logq)
    return total


def tv_distance_to_esf(n: int, params: ModelParams, theta: float | None = None) -> float:
    """Total-variation distance between the induced partition law and the
    Ewens sampling formula (theta defaults to rho), by full enumeration."""
    if theta is None:
        theta = params.rho
    qtab = splitting_prob_table(params, n)
    cache: dict[tuple, float] = {}
    tv = 0.0
    for B in enumerate_partitions(n):
        key = tuple(sorted(B.sizes))
        if key not in cache:
            cache[key] = _induced_prob_given_sizes(B.sizes, qtab)
        tv += abs(cache[key] - esf_prob(B, theta))
    return 0.5 * tv
