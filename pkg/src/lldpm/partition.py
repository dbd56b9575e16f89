"""Partitions of n units, Gibbs-type partition laws and partition comparisons.

A partition is stored as a canonical label vector: the first unit is in block
0 and every new block gets the next unused integer, so two partitions are
equal exactly when their label tuples are equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels

ENUMERATION_CAP = 10


@dataclass(frozen=True)
class Partition:
    """Canonical cluster-label assignment of ``n`` units."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        if not labels:
            raise ValueError("a partition needs at least one unit")
        nxt = 0
        for lab in labels:
            if lab == nxt:
                nxt += 1
            elif lab < 0 or lab > nxt:
                raise ValueError(f"labels {labels} are not in canonical first-appearance form")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    @cached_property
    def k(self) -> int:
        return max(self.labels) + 1

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        counts = [0] * self.k
        for lab in self.labels:
            counts[lab] += 1
        return tuple(counts)

    @property
    def blocks(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for i, lab in enumerate(self.labels):
            out[lab].append(i)
        return out

    def as_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64)

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Partition({list(self.labels)})"


@dataclass(frozen=True)
class GibbsParams:
    """Concentration ``theta`` and discount ``sigma`` of a CRP / two-parameter CRP.

    ``sigma == 0`` gives the Dirichlet-process CRP, which needs ``theta > 0``;
    otherwise ``0 < sigma < 1`` and ``theta > -sigma``.
    """

    theta: float
    sigma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.sigma < 1.0:
            raise ValueError(f"sigma must lie in [0, 1), got {self.sigma}")
        if self.sigma == 0.0 and not self.theta > 0.0:
            raise ValueError(f"CRP needs theta > 0, got {self.theta}")
        if not self.theta > -self.sigma:
            raise ValueError(f"need theta > -sigma, got theta={self.theta}, sigma={self.sigma}")

    @property
    def v22(self) -> float:
        """Probability that two units fall in different blocks."""
        return (self.theta + self.sigma) / (self.theta + 1.0)


def canonicalize(raw_labels: Iterable[int]) -> Partition:
    """Relabel by order of first appearance.

    >>> canonicalize([5, 5, 2]).labels
    (0, 0, 1)
    """
    mapping: dict = {}
    out = []
    for lab in raw_labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out.append(mapping[lab])
    if not out:
        raise ValueError("cannot canonicalize an empty label sequence")
    return Partition(tuple(out))


def canonicalize_rows(labels: np.ndarray) -> np.ndarray:
    """Vectorised first-appearance relabelling of each row of an integer matrix."""
    labels = np.atleast_2d(np.asarray(labels))
    out = np.empty(labels.shape, dtype=np.int64)
    for r in range(labels.shape[0]):
        _, first, inv = np.unique(labels[r], return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first)] = np.arange(first.size)
        out[r] = rank[inv]
    return out


def _sizes(p: Partition) -> np.ndarray:
    return np.asarray(p.sizes, dtype=np.int64)


def eppf_log_prob(p: Partition, g: GibbsParams) -> float:
    """log P(p) under the CRP (``sigma == 0``) or the two-parameter CRP."""
    return float(_kernels.eppf_from_sizes(_sizes(p), p.n, float(g.theta), float(g.sigma)))


def log_eppf_rows(labels: np.ndarray, g: GibbsParams) -> np.ndarray:
    """Log EPPF for every canonical row of ``labels``."""
    labels = np.ascontiguousarray(np.atleast_2d(labels), dtype=np.int64)
    return _kernels.eppf_batch(labels, float(g.theta), float(g.sigma))


def sample_partition(n: int, g: GibbsParams, rng: np.random.Generator) -> Partition:
    """One draw from the Chinese restaurant process (two-parameter if sigma > 0)."""
    return Partition(tuple(sample_partitions(n, g, 1, rng)[0].tolist()))


def sample_partitions(n: int, g: GibbsParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent CRP draws as a (size, n) array of canonical labels."""
    if n < 1:
        raise ValueError("n must be positive")
    u = rng.random((size, n))
    return _kernels.crp_sample_batch(n, float(g.theta), float(g.sigma), u)


def enumerate_partitions(n: int, cap: int = ENUMERATION_CAP) -> list[Partition]:
    """All Bell(n) set partitions of ``n`` units in canonical form."""
    if n < 1:
        raise ValueError("n must be positive")
    if n > cap:
        raise ValueError(f"refusing to enumerate partitions of n={n} > cap={cap}")
    out: list[Partition] = []

    def grow(prefix: list[int], k: int):
        if len(prefix) == n:
            out.append(Partition(tuple(prefix)))
            return
        for lab in range(k + 1):
            prefix.append(lab)
            grow(prefix, max(k, lab + 1))
            prefix.pop()

    grow([0], 1)
    return out


def _check_pair(p: Partition, q: Partition):
    if p.n != q.n:
        raise ValueError(f"partition sizes differ: {p.n} vs {q.n}")


def contingency_table(p: Partition, q: Partition) -> np.ndarray:
    _check_pair(p, q)
    table = np.zeros((p.k, q.k), dtype=np.int64)
    np.add.at(table, (p.as_array(), q.as_array()), 1)
    return table


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def rand_index(p: Partition, q: Partition) -> float:
    """Fraction of unit pairs on which the two partitions agree."""
    _check_pair(p, q)
    if p.n < 2:
        raise ValueError("rand index needs at least two units")
    table = contingency_table(p, q)
    together_both = _comb2(table).sum()
    together_p = _comb2(table.sum(axis=1)).sum()
    together_q = _comb2(table.sum(axis=0)).sum()
    total = p.n * (p.n - 1) / 2.0
    apart_both = total - together_p - together_q + together_both
    return float((together_both + apart_both) / total)


def adjusted_rand_index(p: Partition, q: Partition) -> float:
    """Hubert-Arabie adjusted Rand index (permutation model)."""
    _check_pair(p, q)
    if p.n < 2:
        raise ValueError("adjusted rand index needs at least two units")
    table = contingency_table(p, q)
    index = _comb2(table).sum()
    a = _comb2(table.sum(axis=1)).sum()
    b = _comb2(table.sum(axis=0)).sum()
    expected = a * b / (p.n * (p.n - 1) / 2.0)
    max_index = 0.5 * (a + b)
    if max_index == expected:
        # both partitions trivial (one block or all singletons)
        return 1.0 if p == q else 0.0
    return float((index - expected) / (max_index - expected))


def _entropy(counts: np.ndarray, n: int, log) -> float:
    probs = counts[counts > 0] / n
    return float(-(probs * log(probs)).sum())


def variation_of_information(p: Partition, q: Partition) -> float:
    """VI(p, q) = H(p) + H(q) - 2 I(p, q), in bits."""
    table = contingency_table(p, q)
    n = p.n
    h_p = _entropy(table.sum(axis=1), n, np.log2)
    h_q = _entropy(table.sum(axis=0), n, np.log2)
    h_joint = _entropy(table.ravel(), n, np.log2)
    # H(p) + H(q) - 2 I = 2 H(p, q) - H(p) - H(q)
    return max(0.0, 2.0 * h_joint - h_p - h_q)


def partition_entropy(p: Partition) -> float:
    """Shannon entropy (nats) of the block-size distribution, always >= 0."""
    return _entropy(_sizes(p), p.n, np.log)


def expected_clusters(n: int, theta: float, sigma: float = 0.0) -> float:
    """Prior mean number of blocks of a CRP / two-parameter CRP on ``n`` units."""
    if sigma == 0.0:
        return float(np.sum(theta / (theta + np.arange(n))))
    # (theta + sigma)_n / (theta + 1)_{n-1}
    log_ratio = (gammaln(theta + sigma + n) - gammaln(theta + sigma)) - (
        gammaln(theta + n) - gammaln(theta + 1.0)
    )
    return float((math.exp(log_ratio) - theta) / sigma)


def solve_theta(n: int, expected: float, sigma: float = 0.0, tol: float = 1e-9) -> float:
    """Concentration giving ``expected`` prior blocks on ``n`` units, by bisection."""
    if not 1.0 < expected < n:
        raise ValueError(f"expected cluster count must lie in (1, {n}), got {expected}")
    lo = -sigma + 1e-8
    hi = 1e4
    f = lambda th: expected_clusters(n, th, sigma) - expected  # noqa: E731
    if f(lo) > 0:
        raise ValueError(f"expected={expected} is below the attainable range for n={n}, sigma={sigma}")
    while f(hi) < 0:
        hi *= 10.0
        if hi > 1e12:
            raise ValueError(f"expected={expected} is above the attainable range for n={n}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def partitions_from_rows(rows: Sequence[Sequence[int]]) -> list[Partition]:
    return [Partition(tuple(int(x) for x in r)) for r in rows]
