"""Conjugate Normal-Normal observation model.

Each unit at time t is ``Y[i, t] ~ N(beta, tau2)`` with the cluster level
``beta ~ N(mu0, sigma02)`` shared by all units of a block. The block level is
integrated out analytically.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .partition import GibbsParams, Partition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObsHyper:
    tau2: float
    sigma02: float
    mu0: float = 0.0

    def __post_init__(self):
        if not (self.tau2 > 0 and self.sigma02 > 0):
            raise ValueError(f"tau2 and sigma02 must be positive, got {self.tau2}, {self.sigma02}")
        if not math.isfinite(self.mu0):
            raise ValueError("mu0 must be finite")


@dataclass(frozen=True)
class DataMatrix:
    """Observations with units as rows and time points as columns."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"data must be a non-empty n x T matrix, got shape {values.shape}")
        bad = np.argwhere(~np.isfinite(values))
        if bad.size:
            i, t = bad[0]
            raise ValueError(f"non-finite value at unit {i}, time {t}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def column(self, t: int) -> np.ndarray:
        return self.values[:, t]


def as_data_matrix(Y) -> DataMatrix:
    return Y if isinstance(Y, DataMatrix) else DataMatrix(Y)


def cluster_log_marginal(ys, h: ObsHyper) -> float:
    """log of the integral over beta of prod_i N(y_i; beta, tau2) N(beta; mu0, sigma02)."""
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if ys.size == 0:
        raise ValueError("cluster must contain at least one observation")
    return float(
        _kernels.cluster_logml(float(ys.size), float(ys.sum()), float(ys @ ys), h.tau2, h.sigma02, h.mu0)
    )


def partition_log_marginal(y_t, p: Partition, h: ObsHyper) -> float:
    """Sum of block marginal likelihoods for one time column."""
    y_t = np.asarray(y_t, dtype=np.float64).ravel()
    if y_t.size != p.n:
        raise ValueError(f"column has {y_t.size} entries but partition has {p.n} units")
    labels = p.as_array()
    counts = np.bincount(labels, minlength=p.k).astype(np.float64)
    sums = np.bincount(labels, weights=y_t, minlength=p.k)
    sumsq = np.bincount(labels, weights=y_t * y_t, minlength=p.k)
    return float(
        sum(_kernels.cluster_logml(c, s, q, h.tau2, h.sigma02, h.mu0) for c, s, q in zip(counts, sums, sumsq))
    )


def loglik_table(labels: np.ndarray, Y, h: ObsHyper) -> np.ndarray:
    """``out[r, t] = log p(Y[:, t] | labels[r])`` for a batch of canonical label rows."""
    Y = as_data_matrix(Y)
    labels = np.ascontiguousarray(np.atleast_2d(labels), dtype=np.int64)
    if labels.shape[1] != Y.n:
        raise ValueError(f"labels have {labels.shape[1]} units but data has {Y.n}")
    return _kernels.loglik_matrix(labels, np.ascontiguousarray(Y.values), h.tau2, h.sigma02, h.mu0)


def cluster_posterior(y_t, p: Partition, h: ObsHyper) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances of the block levels given one column."""
    y_t = np.asarray(y_t, dtype=np.float64).ravel()
    labels = p.as_array()
    counts = np.bincount(labels, minlength=p.k).astype(np.float64)
    sums = np.bincount(labels, weights=y_t, minlength=p.k)
    var = h.tau2 * h.sigma02 / (counts * h.sigma02 + h.tau2)
    mean = var * (h.mu0 / h.sigma02 + sums / h.tau2)
    return mean, var


def sample_cluster_means(y_t, p: Partition, h: ObsHyper, rng: np.random.Generator) -> np.ndarray:
    mean, var = cluster_posterior(y_t, p, h)
    return rng.normal(mean, np.sqrt(var))


@dataclass(frozen=True)
class InvGamma:
    shape: float
    scale: float

    @property
    def mean(self) -> float:
        if self.shape <= 1:
            raise ValueError("inverse-gamma mean needs shape > 1")
        return self.scale / (self.shape - 1.0)

    def sample(self, rng: np.random.Generator) -> float:
        return self.scale / rng.gamma(self.shape)


def estimate_hyper(
    Y,
    g: GibbsParams,
    tau2_prior: InvGamma,
    sigma02_prior: InvGamma,
    rng: np.random.Generator,
    iters: int = 200,
    mu0: float = 0.0,
) -> ObsHyper:
    """Pre-phase estimate of the kernel and base variances.

    Runs independent per-time allocation samplers that alternate with
    conjugate inverse-gamma updates of ``tau2`` and ``sigma02`` given drawn
    cluster levels, and returns the posterior means over the second half.
    """
    Y = as_data_matrix(Y)
    if iters < 2:
        raise ValueError("pre-phase needs at least two iterations")
    n, T = Y.n, Y.T
    tau2, sigma02 = tau2_prior.mean, sigma02_prior.mean
    labels = np.zeros((T, n), dtype=np.int64)
    keep_tau, keep_sig = [], []
    for it in range(iters):
        resid_ss = 0.0
        level_ss = 0.0
        n_levels = 0
        for t in range(T):
            y = np.ascontiguousarray(Y.values[:, t])
            u = rng.random((1, n))
            labels[t] = _kernels.allocation_sampler(
                y, labels[t], g.theta, g.sigma, tau2, sigma02, mu0, 1, 0, 1, u
            )[0]
            p = Partition(tuple(labels[t].tolist()))
            beta = sample_cluster_means(y, p, ObsHyper(tau2, sigma02, mu0), rng)
            resid_ss += float(((y - beta[labels[t]]) ** 2).sum())
            level_ss += float(((beta - mu0) ** 2).sum())
            n_levels += p.k
        tau2 = InvGamma(tau2_prior.shape + 0.5 * n * T, tau2_prior.scale + 0.5 * resid_ss).sample(rng)
        sigma02 = InvGamma(sigma02_prior.shape + 0.5 * n_levels, sigma02_prior.scale + 0.5 * level_ss).sample(rng)
        if it >= iters // 2:
            keep_tau.append(tau2)
            keep_sig.append(sigma02)
    out = ObsHyper(float(np.mean(keep_tau)), float(np.mean(keep_sig)), mu0)
    logger.info("pre-phase hyperparameters: tau2=%.4g sigma02=%.4g", out.tau2, out.sigma02)
    return out
