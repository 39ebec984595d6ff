"""Beta-splitting cladograms with exponential holding times.

A block of m >= 2 leaves splits into sizes (i, m-i) with probability

    q_m(i) = Gamma(beta+i) Gamma(beta+m-i) / (Gamma(i+1) Gamma(m-i+1) a_m(beta)),

normalized over i = 1..m-1 (the middle cell counted once).  beta = 1 is
the Yule model, beta = -1/2 the uniform model, beta -> infinity the
symmetric binary model; the comb model (every split a singleton, the
beta -> -2 endpoint) is implemented as a named special case rather than a
parameter limit.

Holding times: a block of m leaves waits an exponential time with rate
lambda_m before splitting.  Deleting a uniformly chosen leaf must leave
the law of the remaining tree intact, which pins the rates up to scale:

    lambda_m = lambda_{m+1} * (1 - p1(m+1)),

where p1(k) = (q_k(1) + q_k(k-1)) / k is the chance that one particular
leaf splits off alone.  This is the adopted indexing; the variant using
p1(m) in place of p1(m+1) is available behind ``alignment="shifted"`` for
comparison only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

__all__ = [
    "Cladogram",
    "Node",
    "beta_split_weights",
    "beta_split_prob",
    "holding_rates",
    "sample_cladogram",
    "branch_prob_right",
    "branch_prob_consecutive",
    "continuity_equality_check",
    "CladContinuityReport",
    "to_newick",
    "parse_newick",
    "restrict_to_leaves",
]


# ---------------------------------------------------------------------------
# split probabilities
# ---------------------------------------------------------------------------


def beta_split_weights(n: int, beta: float, comb: bool = False) -> np.ndarray:
    """Probabilities of split sizes i = 1..n-1 for a block of n leaves."""
    if n < 2:
        raise ValueError("a split needs n >= 2")
    i = np.arange(1, n)
    if comb:
        w = np.zeros(n - 1)
        w[0] += 0.5
        w[-1] += 0.5  # n = 2 puts both halves in the single cell
        return w
    if beta <= -1:
        raise ValueError("beta must exceed -1 (use comb=True for the comb endpoint)")
    logw = gammaln(beta + i) + gammaln(beta + n - i) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def beta_split_prob(n: int, i: int, beta: float, comb: bool = False) -> float:
    """q_n(i): probability that a block of n splits into sizes (i, n-i)."""
    if not (1 <= i <= n - 1):
        raise ValueError(f"i must lie in 1..{n - 1}, got {i}")
    return float(beta_split_weights(n, beta, comb=comb)[i - 1])


def _singleton_leaf_prob(k: int, beta: float, comb: bool = False) -> float:
    """p1(k): chance a particular leaf splits off alone from a block of k."""
    w = beta_split_weights(k, beta, comb=comb)
    mass = w[0] + w[-1] if k > 2 else w[0]
    return float(mass / k)


def holding_rates(n_max: int, beta: float, lambda2: float = 1.0,
                  alignment: str = "subsample", comb: bool = False) -> np.ndarray:
    """Split rates lambda_2..lambda_{n_max} (index m-2 holds lambda_m).

    "subsample" keeps leaf-deletion consistency exactly; "shifted" is the
    alternative subscript reading, kept only for comparison.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    if lambda2 <= 0:
        raise ValueError("lambda2 must be positive")
    lam = np.empty(n_max - 1)
    lam[0] = lambda2
    for m in range(2, n_max):
        if alignment == "subsample":
            p = _singleton_leaf_prob(m + 1, beta, comb=comb)
        elif alignment == "shifted":
            p = _singleton_leaf_prob(max(m, 3), beta, comb=comb)
        else:
            raise ValueError(f"unknown alignment {alignment!r}")
        lam[m - 1] = lam[m - 2] / (1.0 - p)
    return lam


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------


@dataclass
class Node:
    label: object = None
    children: tuple | None = None
    holding: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.children is None

    def leaves(self) -> list:
        if self.is_leaf:
            return [self.label]
        return self.children[0].leaves() + self.children[1].leaves()

    @property
    def size(self) -> int:
        return 1 if self.is_leaf else self.children[0].size + self.children[1].size


@dataclass
class Cladogram:
    """Rooted binary leaf-labelled tree; left/right order carries no meaning."""

    root: Node

    def __post_init__(self):
        labels = self.root.leaves()
        if len(labels) != len(set(map(str, labels))):
            raise ValueError("leaf labels must be distinct")

    @property
    def n(self) -> int:
        return self.root.size

    def leaf_labels(self) -> list:
        return self.root.leaves()

    def shape_signature(self) -> tuple:
        """Canonical unlabelled shape (rotation-invariant)."""

        def sig(node):
            if node.is_leaf:
                return 1
            return tuple(sorted((sig(node.children[0]), sig(node.children[1])), key=str))

        return sig(self.root)

    def canonical(self) -> tuple:
        """Canonical labelled form (rotation-invariant)."""

        def canon(node):
            if node.is_leaf:
                return (str(node.label),)
            a = canon(node.children[0])
            b = canon(node.children[1])
            return tuple(sorted((a, b)))

        return canon(self.root)

    def split_sizes(self) -> list:
        """(m, i) at every internal node, i the smaller side."""
        out = []

        def walk(node):
            if node.is_leaf:
                return
            a, b = node.children[0].size, node.children[1].size
            out.append((a + b, min(a, b)))
            walk(node.children[0])
            walk(node.children[1])

        walk(self.root)
        return out

    def colless_index(self) -> int:
        """Sum of |left - right| subtree-size differences; larger = more comb-like."""
        total = 0

        def walk(node):
            nonlocal total
            if node.is_leaf:
                return
            total += abs(node.children[0].size - node.children[1].size)
            walk(node.children[0])
            walk(node.children[1])

        walk(self.root)
        return total

    def holding_sequences(self) -> dict:
        """Per leaf, the holding times of its ancestor blocks, root first."""
        out = {}

        def walk(node, acc):
            if node.is_leaf:
                out[node.label] = tuple(acc)
                return
            acc = acc + [node.holding]
            walk(node.children[0], acc)
            walk(node.children[1], acc)

        walk(self.root, [])
        return out


def sample_cladogram(n: int, beta: float, lambda2: float = 1.0, seed=None,
                     with_times: bool = True, comb: bool = False) -> Cladogram:
    """Recursive beta-splitting with uniformly random label assignment.

    Every block of m leaves carries an exponential holding time with the
    leaf-deletion-consistent rate lambda_m (disable with with_times=False).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(
        np.random.SeedSequence(0 if seed is None else int(seed))
    )
    rates = holding_rates(n, beta, lambda2, comb=comb) if with_times else None
    weights = {m: beta_split_weights(m, beta, comb=comb) for m in range(2, n + 1)}

    def build(labels: np.ndarray) -> Node:
        m = labels.size
        if m == 1:
            return Node(label=int(labels[0]))
        i = 1 + rng.choice(m - 1, p=weights[m])
        left_idx = rng.choice(m, size=i, replace=False)
        mask = np.zeros(m, dtype=bool)
        mask[left_idx] = True
        hold = float(rng.exponential(1.0 / rates[m - 2])) if with_times else None
        return Node(children=(build(labels[mask]), build(labels[~mask])), holding=hold)

    return Cladogram(build(np.arange(1, n + 1)))


# ---------------------------------------------------------------------------
# conditional branch probabilities and the continuity check
# ---------------------------------------------------------------------------


def branch_prob_right(n: int, i: int, beta: float) -> float:
    """Chance a new particle goes right of an existing (i, n-i) split."""
    if i < 0 or i > n:
        raise ValueError("need 0 <= i <= n")
    if beta <= -2:
        raise ValueError("beta must exceed -2")
    if i == 0:
        return 1.0
    return (n - i + beta) / (n + 2.0 * beta)


def branch_prob_consecutive(n: int, i: int, beta: float) -> float:
    """Chance a new particle goes right at i consecutive left-singleton splits."""
    if i < 0 or i > n - 1:
        raise ValueError("need 0 <= i <= n-1")
    if beta <= -2:
        raise ValueError("beta must exceed -2")
    out = 1.0
    for j in range(1, i + 1):
        out *= (n - j + beta) / (n - j + 1 + 2.0 * beta)
    return out


@dataclass(frozen=True)
class CladContinuityReport:
    max_abs_gap: float
    argmax: tuple
    signed_gap_at_max: float
    n_checked: int

    @property
    def max_gap(self) -> float:
        return self.max_abs_gap


def continuity_equality_check(beta: float, n_max: int) -> CladContinuityReport:
    """Max |one-step - consecutive-singleton| branch probability gap over the
    grid of valid (n, i); zero exactly when beta = 0."""
    if beta <= -2:
        raise ValueError("beta must exceed -2")
    best = -1.0
    arg = (0, 0)
    signed = 0.0
    checked = 0
    for n in range(2, n_max + 1):
        for i in range(1, n):
            c1 = branch_prob_right(n, i, beta)
            if not (0.0 < c1 <= 1.0):
                continue
            factors = [(n - j + beta) / (n - j + 1 + 2.0 * beta) for j in range(1, i + 1)]
            if any(not (0.0 < f <= 1.0) for f in factors):
                continue
            c2 = math.prod(factors)
            gap = abs(c1 - c2)
            checked += 1
            if gap > best:
                best, arg, signed = gap, (n, i), c1 - c2
    return CladContinuityReport(best if best >= 0 else 0.0, arg, signed, checked)


# ---------------------------------------------------------------------------
# Newick serialization
# ---------------------------------------------------------------------------


def to_newick(tree: Cladogram) -> str:
    """Serialize with branch lengths given by birth-time differences.

    A block is born when its parent splits; the edge to each child of a
    block therefore has length equal to the block's holding time.  Trees
    without holding times serialize without branch lengths.
    """
    timed = tree.root.holding is not None

    def render(node, edge_len):
        if node.is_leaf:
            body = str(node.label)
        else:
            if timed and node.holding is None:
                raise ValueError("malformed tree: missing holding time")
            a = render(node.children[0], node.holding)
            b = render(node.children[1], node.holding)
            body = f"({a},{b})"
        if timed and edge_len is not None:
            return f"{body}:{repr(float(edge_len))}"
        return body

    return render(tree.root, None) + ";"


def parse_newick(text: str) -> Cladogram:
    """Parse the subset of Newick produced by to_newick (binary, optional
    branch lengths); round-trips exactly."""
    s = text.strip()
    if not s.endswith(";"):
        raise ValueError("missing terminating ';'")
    s = s[:-1]
    pos = 0

    def parse_node():
        nonlocal pos
        if pos >= len(s):
            raise ValueError("unexpected end of input")
        if s[pos] == "(":
            pos += 1
            left, llen = parse_node()
            if pos >= len(s) or s[pos] != ",":
                raise ValueError("expected ',' in a binary split")
            pos += 1
            right, rlen = parse_node()
            if pos >= len(s) or s[pos] != ")":
                raise ValueError("expected ')'")
            pos += 1
            node = Node(children=(left, right))
            if (llen is None) != (rlen is None):
                raise ValueError("inconsistent branch lengths on siblings")
            if llen is not None:
                if not math.isclose(llen, rlen, rel_tol=1e-9, abs_tol=0.0):
                    raise ValueError("sibling edges must share the parent holding time")
                node.holding = llen
        else:
            j = pos
            while j < len(s) and s[j] not in ":,()":
                j += 1
            label = s[pos:j]
            if not label:
                raise ValueError(f"empty label at position {pos}")
            pos = j
            node = Node(label=label)
        length = None
        if pos < len(s) and s[pos] == ":":
            pos += 1
            j = pos
            while j < len(s) and s[j] not in ",()":
                j += 1
            length = float(s[pos:j])
            pos = j
        return node, length

    root, _ = parse_node()
    if pos != len(s):
        raise ValueError(f"trailing characters at position {pos}")
    if root.is_leaf:
        raise ValueError("a cladogram needs at least two leaves")
    return Cladogram(root)


def restrict_to_leaves(tree: Cladogram, keep) -> Cladogram:
    """Topology induced on a subset of leaves (holding times dropped:
    suppressed nodes would need summed waits, which are no longer
    exponential)."""
    keep = {str(k) for k in keep}

    def prune(node):
        if node.is_leaf:
            return node if str(node.label) in keep else None
        a = prune(node.children[0])
        b = prune(node.children[1])
        if a is not None and b is not None:
            return Node(children=(Node(a.label, a.children), Node(b.label, b.children)))
        return a if a is not None else b

    pruned = prune(tree.root)
    if pruned is None or pruned.is_leaf:
        raise ValueError("need at least two kept leaves")

    def strip(node):
        if node.is_leaf:
            return Node(label=node.label)
        return Node(children=(strip(node.children[0]), strip(node.children[1])))

    return Cladogram(strip(pruned))
