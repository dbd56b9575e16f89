"""Partition state model prior: simulation and dependence diagnostics.

At every time the partition is either copied from the previous time
(``gamma_t = 0``) or redrawn from the base CRP law (``gamma_t = 1``), with
``gamma_t ~ Bernoulli(eta_t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .partition import GibbsParams, Partition, sample_partitions


@dataclass(frozen=True)
class PsmPrior:
    g: GibbsParams
    etas: float | Sequence[float]

    def __post_init__(self):
        etas = np.atleast_1d(np.asarray(self.etas, dtype=np.float64))
        if np.any((etas < 0) | (etas > 1)) or not np.all(np.isfinite(etas)):
            raise ValueError(f"changepoint probabilities must lie in [0, 1], got {etas}")

    def eta_vector(self, T: int) -> np.ndarray:
        """eta_2..eta_T as an array of length T - 1."""
        etas = np.atleast_1d(np.asarray(self.etas, dtype=np.float64))
        if etas.size == 1:
            return np.full(max(T - 1, 0), etas[0])
        if etas.size != T - 1:
            raise ValueError(f"need {T - 1} changepoint probabilities, got {etas.size}")
        return etas


@dataclass(frozen=True)
class PsmDraw:
    partitions: list[Partition]
    gammas: np.ndarray


class MCEstimate(NamedTuple):
    mean: float
    stderr: float


def psm_forward_labels(n: int, T: int, prior: PsmPrior, size: int, rng: np.random.Generator):
    """Vectorised forward simulation of ``size`` independent sequences.

    Returns ``(labels, gammas)`` with shapes (size, T, n) and (size, T - 1).
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    etas = prior.eta_vector(T)
    fresh = sample_partitions(n, prior.g, size * T, rng).reshape(size, T, n)
    gammas = (rng.random((size, T - 1)) < etas).astype(np.int8)
    labels = fresh.copy()
    for t in range(1, T):
        keep = gammas[:, t - 1] == 0
        labels[keep, t] = labels[keep, t - 1]
    return labels, gammas


def psm_forward(n: int, T: int, prior: PsmPrior, rng: np.random.Generator) -> PsmDraw:
    labels, gammas = psm_forward_labels(n, T, prior, 1, rng)
    return PsmDraw([Partition(tuple(row)) for row in labels[0].tolist()], gammas[0])


def eri_closed_form(g: GibbsParams, eta: float, lag: int) -> float:
    """Expected Rand index between partitions ``lag`` steps apart under a shared eta."""
    if lag < 1:
        raise ValueError("lag must be a positive integer")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    v22 = g.v22
    return 1.0 - 2.0 * v22 * (1.0 - v22) * (1.0 - (1.0 - eta) ** lag)


def _pair_counts(a: np.ndarray, b: np.ndarray):
    """Per-row pair counts from the contingency tables of two (m, n) label arrays.

    Returns (together in both, together in a, together in b, total pairs).
    """
    m, n = a.shape
    codes = a * n + b + (np.arange(m) * n * n)[:, None]
    table = np.bincount(codes.ravel(), minlength=m * n * n).reshape(m, n, n).astype(np.float64)
    comb = lambda x: x * (x - 1.0) / 2.0  # noqa: E731
    both = comb(table).sum(axis=(1, 2))
    in_a = comb(table.sum(axis=2)).sum(axis=1)
    in_b = comb(table.sum(axis=1)).sum(axis=1)
    return both, in_a, in_b, n * (n - 1) / 2.0


def rand_index_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    both, in_a, in_b, total = _pair_counts(a, b)
    return (total - in_a - in_b + 2.0 * both) / total


def ari_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Adjusted Rand index for each row pair; trivial-vs-trivial pairs score 1 iff equal."""
    both, in_a, in_b, total = _pair_counts(a, b)
    expected = in_a * in_b / total
    max_index = 0.5 * (in_a + in_b)
    denom = max_index - expected
    equal = np.all(a == b, axis=1)
    safe = np.where(denom == 0, 1.0, denom)
    return np.where(denom == 0, equal.astype(np.float64), (both - expected) / safe)


def eri_monte_carlo(
    n: int, T: int, prior: PsmPrior, t1: int, t2: int, draws: int, rng: np.random.Generator
) -> MCEstimate:
    """Monte Carlo mean of the Rand index between times ``t1 < t2`` (1-based)."""
    if not 1 <= t1 < t2 <= T:
        raise ValueError(f"need 1 <= t1 < t2 <= T, got t1={t1}, t2={t2}, T={T}")
    labels, _ = psm_forward_labels(n, T, prior, draws, rng)
    vals = rand_index_rows(labels[:, t1 - 1], labels[:, t2 - 1])
    se = float(vals.std(ddof=1) / math.sqrt(draws)) if draws > 1 else float("nan")
    return MCEstimate(float(vals.mean()), se)


def lagged_ari_matrix(n: int, T: int, prior: PsmPrior, draws: int, rng: np.random.Generator) -> np.ndarray:
    """Average ARI between every pair of times across forward draws."""
    if draws < 1:
        raise ValueError("need at least one draw")
    labels, _ = psm_forward_labels(n, T, prior, draws, rng)
    out = np.eye(T)
    for i in range(T):
        for j in range(i + 1, T):
            out[i, j] = out[j, i] = ari_rows(labels[:, i], labels[:, j]).mean()
    return out


def eta_tilde_from_eta(eta: float) -> float:
    """Per-view copy-failure probability reproducing a two-time PSM with ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return 1.0 - math.sqrt(1.0 - eta)


def multiview_forward(
    n: int, views: int, g: GibbsParams, eta_tilde: float, rng: np.random.Generator
) -> tuple[Partition, list[Partition], np.ndarray]:
    """Parent partition plus ``views`` children, each copying it with prob 1 - eta_tilde."""
    labels, parents, indicators = multiview_forward_labels(n, views, g, eta_tilde, 1, rng)
    children = [Partition(tuple(row)) for row in labels[0].tolist()]
    return Partition(tuple(parents[0].tolist())), children, indicators[0]


def multiview_forward_labels(n: int, views: int, g: GibbsParams, eta_tilde: float, size: int, rng):
    if views < 2:
        raise ValueError("multiview simulation needs at least two views")
    if not 0.0 <= eta_tilde <= 1.0:
        raise ValueError("eta_tilde must lie in [0, 1]")
    parents = sample_partitions(n, g, size, rng)
    fresh = sample_partitions(n, g, size * views, rng).reshape(size, views, n)
    indicators = (rng.random((size, views)) < eta_tilde).astype(np.int8)
    children = np.where(indicators[:, :, None] == 1, fresh, parents[:, None, :])
    return children, parents, indicators
