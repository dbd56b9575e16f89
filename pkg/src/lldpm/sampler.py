"""Gibbs sampler for the partition state model.

The chain works on integer ids into a table of every partition that appears
in the per-time catalogues; partitions outside the catalogues are never
proposed, so the table is closed under all updates. Log-likelihoods, prior
masses and catalogue counts are tabulated once before the sweeps start.

Random streams are derived from one seed as
``SeedSequence(seed).spawn(4) -> [catalogue, g, chain, prephase]`` and the
catalogue stream is further split into one child per time point, so results
do not depend on the number of worker threads.
"""

from __future__ import annotations

import io
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence, TextIO

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .model import DataMatrix, InvGamma, ObsHyper, as_data_matrix, estimate_hyper, loglik_table, partition_log_marginal
from .partition import GibbsParams, Partition, eppf_log_prob, log_eppf_rows, sample_partitions

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
_G_CHUNK = 20_000


def default_threads() -> int:
    raw = os.environ.get("LLDPM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"LLDPM_THREADS must be a positive integer, got {raw!r}") from None


@dataclass(frozen=True)
class SamplerConfig:
    iters: int = 10_000
    burnin: int = 5_000
    thin: int = 1
    eta_a: float = 0.1
    eta_b: float = 0.9
    catalogue_size: int = 2000
    catalogue_burnin: int = 500
    g_samples: int = 20_000
    sir_candidates: int = 50
    sir_correction: bool = True
    copy_move: bool = True
    sweep_order: str = "ascending"
    block_size: int | None = None
    trace_every: int = 1
    prephase_iters: int = 0
    tau2_prior: InvGamma = InvGamma(15.0, 3.0)
    sigma02_prior: InvGamma = InvGamma(15.0, 3.0)
    threads: int | None = None

    def __post_init__(self):
        if not self.iters > self.burnin >= 0:
            raise ValueError(f"need iters > burnin >= 0, got iters={self.iters}, burnin={self.burnin}")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")
        if not (self.eta_a > 0 and self.eta_b > 0):
            raise ValueError("Beta hyperparameters must be positive")
        if self.catalogue_size < 1 or self.catalogue_burnin < 0:
            raise ValueError("catalogue size must be positive and its burn-in non-negative")
        if self.g_samples < 1 or self.sir_candidates < 1:
            raise ValueError("g sample count and SIR candidate count must be positive")
        if self.sweep_order not in ("ascending", "random"):
            raise ValueError(f"unknown sweep order {self.sweep_order!r}")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block size must be positive")
        if self.trace_every < 1 or self.prephase_iters < 0:
            raise ValueError("trace stride must be positive and pre-phase length non-negative")

    @property
    def n_draws(self) -> int:
        return len(range(self.burnin, self.iters, self.thin))


@dataclass(frozen=True)
class Catalogue:
    """Per-time posterior draws from independent fits, with duplicates kept."""

    draws: tuple[np.ndarray, ...]
    log_g: np.ndarray | None = None

    def __post_init__(self):
        if not self.draws or any(d.ndim != 2 or d.shape[0] == 0 for d in self.draws):
            raise ValueError("every time point needs a non-empty catalogue")
        if self.log_g is not None and len(self.log_g) != len(self.draws):
            raise ValueError("one g value per time point is required")

    @property
    def T(self) -> int:
        return len(self.draws)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([d.shape[0] for d in self.draws])

    def partitions(self, t: int) -> list[Partition]:
        return [Partition(tuple(r)) for r in self.draws[t].tolist()]

    def with_g(self, log_g) -> "Catalogue":
        return replace(self, log_g=np.asarray(log_g, dtype=np.float64))


@dataclass
class ChainState:
    """Mutable chain state; index 0 of ``gammas`` and ``etas`` is unused."""

    partitions: list[Partition]
    gammas: np.ndarray
    etas: np.ndarray
    beta_prior: tuple[float, float]
    hyper: ObsHyper
    prior: GibbsParams

    def consistent(self) -> bool:
        return all(
            self.partitions[t] == self.partitions[t - 1] for t in range(1, len(self.partitions)) if self.gammas[t] == 0
        )


@dataclass(frozen=True)
class ChainOutput:
    """Retained draws. Times are 0-based; ``gammas[:, j]`` is the indicator at time ``j + 1``."""

    table: np.ndarray
    ids: np.ndarray
    gammas: np.ndarray
    etas: np.ndarray
    iters: int
    burnin: int
    thin: int
    seed: int | None
    hyper: ObsHyper
    prior: GibbsParams
    log_g: np.ndarray
    sir_failures: int = 0
    runtime: float = 0.0

    @property
    def T(self) -> int:
        return self.ids.shape[1]

    @property
    def n(self) -> int:
        return self.table.shape[1]

    @property
    def n_draws(self) -> int:
        return self.ids.shape[0]

    def labels_at(self, t: int) -> np.ndarray:
        """(draws, n) canonical labels of the partition at time ``t``."""
        return self.table[self.ids[:, t]]

    def partitions_at(self, t: int) -> list[Partition]:
        return [Partition(tuple(r)) for r in self.labels_at(t).tolist()]


def _is_degenerate(y: np.ndarray) -> bool:
    return float(np.ptp(y)) <= np.finfo(float).eps * max(1.0, float(np.abs(y).max()))


def build_catalogue(
    Y,
    hyper: ObsHyper,
    g: GibbsParams,
    size: int,
    burnin: int,
    rng: np.random.Generator,
    threads: int | None = None,
) -> Catalogue:
    """Run an independent allocation sampler at every time point.

    Each time gets its own child stream of ``rng`` so the result is the same
    for any thread count.
    """
    Y = as_data_matrix(Y)
    if size < 1 or burnin < 0:
        raise ValueError("catalogue size must be positive and burn-in non-negative")
    children = rng.spawn(Y.T)
    for t in range(Y.T):
        if _is_degenerate(Y.values[:, t]):
            warnings.warn(f"data column {t} is constant; its catalogue reflects the prior only", RuntimeWarning)

    def one(t):
        y = np.ascontiguousarray(Y.values[:, t])
        u = children[t].random((burnin + size, Y.n))
        init = np.zeros(Y.n, dtype=np.int64)
        return _kernels.allocation_sampler(
            y, init, g.theta, g.sigma, hyper.tau2, hyper.sigma02, hyper.mu0, burnin + size, burnin, 1, u
        )

    workers = threads or default_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            draws = list(pool.map(one, range(Y.T)))
    else:
        draws = [one(t) for t in range(Y.T)]
    return Catalogue(tuple(draws))


def estimate_g(Y, g: GibbsParams, hyper: ObsHyper, M: int, rng: np.random.Generator) -> np.ndarray:
    """log g_t for every t from one shared sample of ``M`` prior partitions."""
    Y = as_data_matrix(Y)
    if M < 1:
        raise ValueError("need at least one prior draw")
    sample = sample_partitions(Y.n, g, M, rng)
    parts = [logsumexp(loglik_table(sample[s : s + _G_CHUNK], Y.values, hyper), axis=0) for s in range(0, M, _G_CHUNK)]
    return logsumexp(np.vstack(parts), axis=0) - math.log(M)


# Reference single-site updates on a ChainState. The chain itself runs the
# compiled equivalents in ``_kernels`` over tabulated partitions.


def _catalogue_draw(cat: Catalogue, t: int, rng) -> Partition:
    d = cat.draws[t]
    return Partition(tuple(d[rng.integers(d.shape[0])].tolist()))


def gibbs_update_partition(t: int, state: ChainState, cat: Catalogue, Y, rng: np.random.Generator) -> Partition:
    """Update the partition at 0-based time ``t`` in place and return it."""
    Y = as_data_matrix(Y)
    if cat.log_g is None:
        raise ValueError("catalogue has no g estimates")
    T = len(state.partitions)
    if t < T - 1 and state.gammas[t + 1] == 0:
        new = state.partitions[t + 1]
    elif t == 0:
        new = _catalogue_draw(cat, 0, rng)
    else:
        eta = float(state.etas[t])
        prev = state.partitions[t - 1]
        lk = math.log1p(-eta) + partition_log_marginal(Y.column(t), prev, state.hyper) if eta < 1 else -math.inf
        lc = math.log(eta) + float(cat.log_g[t]) if eta > 0 else -math.inf
        p_keep = 0.0 if lk == -math.inf else 1.0 if lc == -math.inf else 1.0 / (1.0 + math.exp(lc - lk))
        new = prev if rng.random() < p_keep else _catalogue_draw(cat, t, rng)
    state.partitions[t] = new
    return new


def gamma_probability(t: int, state: ChainState) -> float:
    p, prev = state.partitions[t], state.partitions[t - 1]
    if p != prev:
        return 1.0
    eta = float(state.etas[t])
    a = eta * math.exp(eppf_log_prob(p, state.prior))
    return a / (a + 1.0 - eta)


def gibbs_update_gamma(t: int, state: ChainState, rng: np.random.Generator) -> int:
    if t < 1:
        raise ValueError("indicators exist only for t >= 1")
    state.gammas[t] = int(rng.random() < gamma_probability(t, state))
    return int(state.gammas[t])


def _clip_eta(x):
    return np.clip(x, np.finfo(float).tiny, np.nextafter(1.0, 0.0))


def gibbs_update_eta(t: int, state: ChainState, rng: np.random.Generator) -> float:
    a, b = state.beta_prior
    gam = int(state.gammas[t])
    state.etas[t] = float(_clip_eta(rng.beta(a + gam, b + 1 - gam)))
    return float(state.etas[t])


def change_blocks(gammas: np.ndarray) -> list[tuple[int, int]]:
    """Half-open runs of times linked by zero indicators."""
    T = len(gammas)
    starts = [0] + [t for t in range(1, T) if gammas[t] == 1]
    return list(zip(starts, starts[1:] + [T]))


def _frequencies(draws: np.ndarray) -> dict:
    rows, counts = np.unique(draws, axis=0, return_counts=True)
    return {tuple(r): c / draws.shape[0] for r, c in zip(rows.tolist(), counts)}


def reshuffle(
    state: ChainState, cat: Catalogue, Y, rng: np.random.Generator, candidates: int = 50, correct: bool = True
) -> int:
    """Redraw each block's shared partition. Returns the number of underflowed blocks."""
    Y = as_data_matrix(Y)
    fails = 0
    for lo, hi in change_blocks(state.gammas):
        if hi - lo == 1:
            state.partitions[lo] = _catalogue_draw(cat, lo, rng)
            continue
        cands = [_catalogue_draw(cat, l, rng) for l in range(lo, hi) for _ in range(candidates)]
        freqs = [_frequencies(cat.draws[l]) for l in range(lo, hi)] if correct else []
        logw = np.empty(len(cands))
        for r, c in enumerate(cands):
            lw = eppf_log_prob(c, state.prior) + sum(
                partition_log_marginal(Y.column(l), c, state.hyper) for l in range(lo, hi)
            )
            if correct:
                lw -= math.log(np.mean([f.get(c.labels, 0.0) for f in freqs]))
            logw[r] = lw
        if not np.isfinite(logw.max()):
            fails += 1
            logger.warning("all reshuffle weights underflowed for times %d..%d; keeping current value", lo, hi - 1)
            continue
        w = np.exp(logw - logw.max())
        win = cands[int(rng.choice(len(cands), p=w / w.sum()))]
        for l in range(lo, hi):
            state.partitions[l] = win
    return fails


class _Table:
    """Every distinct catalogue partition with its tabulated quantities."""

    def __init__(self, cat: Catalogue, Y: DataMatrix, prior: GibbsParams, hyper: ObsHyper):
        stacked = np.vstack(cat.draws)
        self.labels, inverse = np.unique(stacked, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1).astype(np.int64)
        U, T = self.labels.shape[0], cat.T
        self.cat_off = np.concatenate([[0], np.cumsum(cat.sizes)]).astype(np.int64)
        self.cat_ids = inverse
        tidx = np.repeat(np.arange(T), cat.sizes)
        self.counts = np.zeros((U, T), dtype=np.int32)
        np.add.at(self.counts, (inverse, tidx), 1)
        self.loglik = loglik_table(self.labels, Y.values, hyper)
        self.logprior = log_eppf_rows(self.labels, prior)
        self.k = self.labels.max(axis=1) + 1
        self.entropy = np.array([_entropy(row) for row in self.labels])
        logger.info("partition table: %d distinct partitions over %d times", U, T)


def _entropy(labels: np.ndarray) -> float:
    p = np.bincount(labels) / labels.size
    return float(-(p * np.log(p)).sum())


_TRACE_HEADER = "iteration,t,gamma,eta,k,entropy\n"


def _write_trace(trace: TextIO, it: int, ids, gammas, etas, tab: _Table):
    buf = io.StringIO()
    for t in range(ids.shape[0]):
        gam = "" if t == 0 else str(int(gammas[t]))
        eta = "" if t == 0 else repr(float(etas[t]))
        buf.write(f"{it},{t + 1},{gam},{eta},{int(tab.k[ids[t]])},{float(tab.entropy[ids[t]])!r}\n")
    trace.write(buf.getvalue())


def _save_checkpoint(path, it, ids, gammas, etas, rng, kept, fails):
    state = json.dumps(rng.bit_generator.state)
    tmp = f"{path}.tmp.npz"
    np.savez(
        tmp,
        version=CHECKPOINT_VERSION,
        iteration=it,
        ids=ids,
        gammas=gammas,
        etas=etas,
        rng_state=np.array(state),
        kept_ids=np.array(kept[0], dtype=np.int32).reshape(-1, ids.size),
        kept_gammas=np.array(kept[1], dtype=np.int8).reshape(-1, ids.size - 1),
        kept_etas=np.array(kept[2], dtype=np.float64).reshape(-1, ids.size - 1),
        fails=fails,
    )
    os.replace(tmp, path)


def _load_checkpoint(path, rng):
    with np.load(path) as z:
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version {int(z['version'])} is not supported")
        rng.bit_generator.state = json.loads(str(z["rng_state"]))
        kept = (list(z["kept_ids"]), list(z["kept_gammas"]), list(z["kept_etas"]))
        return int(z["iteration"]), z["ids"].copy(), z["gammas"].copy(), z["etas"].copy(), kept, int(z["fails"])


def prepare(Y, prior: GibbsParams, hyper: ObsHyper, config: SamplerConfig, seed):
    """Pre-phase (optional), catalogues and g estimates. Returns (hyper, catalogue, chain seed)."""
    Y = as_data_matrix(Y)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    cat_ss, g_ss, chain_ss, pre_ss = ss.spawn(4)
    if config.prephase_iters > 0:
        hyper = estimate_hyper(
            Y.values,
            prior,
            config.tau2_prior,
            config.sigma02_prior,
            np.random.default_rng(pre_ss),
            iters=config.prephase_iters,
            mu0=hyper.mu0,
        )
    cat = build_catalogue(
        Y, hyper, prior, config.catalogue_size, config.catalogue_burnin, np.random.default_rng(cat_ss), config.threads
    )
    cat = cat.with_g(estimate_g(Y, prior, hyper, config.g_samples, np.random.default_rng(g_ss)))
    return hyper, cat, chain_ss


def run_chain(
    Y,
    prior: GibbsParams,
    hyper: ObsHyper,
    config: SamplerConfig = SamplerConfig(),
    seed: int | np.random.SeedSequence | None = 0,
    trace: TextIO | None = None,
    checkpoint: str | os.PathLike | None = None,
    resume: bool = False,
) -> ChainOutput:
    """Full sampler: catalogues, g estimates, then repeated sweeps.

    Each sweep updates (partition, indicator) pairs at every time, redraws the
    change probabilities and reshuffles the blocks of linked times. With
    ``config.block_size`` set the sweeps run in blocks and, if ``checkpoint``
    is given, the state and retained draws are saved after each block;
    ``resume=True`` continues from that file.
    """
    start = time.perf_counter()
    Y = as_data_matrix(Y)
    hyper, cat, chain_ss = prepare(Y, prior, hyper, config, seed)
    tab = _Table(cat, Y, prior, hyper)
    rng = np.random.default_rng(chain_ss)
    T = Y.T
    a, b = config.eta_a, config.eta_b

    ids = np.array([tab.cat_ids[tab.cat_off[t] + rng.integers(cat.sizes[t])] for t in range(T)], dtype=np.int64)
    gammas = np.ones(T, dtype=np.int64)
    etas = _clip_eta(rng.beta(a, b, size=T))
    etas[0] = np.nan
    kept: tuple[list, list, list] = ([], [], [])
    fails = 0
    first = 0
    if resume:
        if checkpoint is None or not os.path.exists(checkpoint):
            raise FileNotFoundError(f"no checkpoint to resume from at {checkpoint}")
        first, ids, gammas, etas, kept, fails = _load_checkpoint(checkpoint, rng)

    if trace is not None and first == 0:
        trace.write(_TRACE_HEADER)
    order = np.arange(T, dtype=np.int64)
    block = config.block_size or config.iters
    m_sir = config.sir_candidates
    for it in range(first, config.iters):
        if config.sweep_order == "random":
            order = rng.permutation(T).astype(np.int64)
        u = rng.random((T, 3))
        _kernels.chain_sweep(ids, gammas, etas, order, tab.loglik, tab.logprior, cat.log_g, tab.cat_ids, tab.cat_off, u, config.copy_move)
        etas[1:] = _clip_eta(rng.beta(a + gammas[1:], b + 1 - gammas[1:]))
        u_cand = rng.random(T * m_sir)
        u_pick = rng.random(T)
        nf = _kernels.chain_reshuffle(
            ids, gammas, tab.loglik, tab.logprior, tab.counts, tab.cat_ids, tab.cat_off,
            m_sir, config.sir_correction, u_cand, u_pick,
        )  # fmt: skip
        if nf:
            fails += nf
            logger.warning("iteration %d: %d reshuffle blocks underflowed; current values kept", it, nf)
        if trace is not None and it % config.trace_every == 0:
            _write_trace(trace, it, ids, gammas, etas, tab)
        if it >= config.burnin and (it - config.burnin) % config.thin == 0:
            kept[0].append(ids.astype(np.int32))
            kept[1].append(gammas[1:].astype(np.int8))
            kept[2].append(etas[1:].copy())
        if checkpoint is not None and (it + 1) % block == 0 and it + 1 < config.iters:
            _save_checkpoint(checkpoint, it + 1, ids, gammas, etas, rng, kept, fails)

    return ChainOutput(
        table=tab.labels,
        ids=np.array(kept[0], dtype=np.int32).reshape(-1, T),
        gammas=np.array(kept[1], dtype=np.int8).reshape(-1, T - 1),
        etas=np.array(kept[2], dtype=np.float64).reshape(-1, T - 1),
        iters=config.iters,
        burnin=config.burnin,
        thin=config.thin,
        seed=seed if isinstance(seed, int) else None,
        hyper=hyper,
        prior=prior,
        log_g=cat.log_g,
        sir_failures=fails,
        runtime=time.perf_counter() - start,
    )


@dataclass(frozen=True)
class TwoViewResult:
    chain: ChainOutput
    parents: np.ndarray
    eta_tilde: np.ndarray
    change_probability: float
    eta_mean: float
    view_labels: tuple[np.ndarray, np.ndarray] = field(repr=False, default=())

    @property
    def eta_hat(self) -> float:
        return self.change_probability


def _parent_draws(out: ChainOutput, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sample the common parent given each retained pair of view partitions."""
    eta_tilde = 1.0 - np.sqrt(1.0 - out.etas[:, 0])
    lp = log_eppf_rows(out.table, out.prior)
    n = out.n
    fresh = sample_partitions(n, out.prior, out.n_draws, rng)
    u = rng.random(out.n_draws)
    parents = np.empty((out.n_draws, n), dtype=np.int64)
    for d in range(out.n_draws):
        i1, i2 = out.ids[d]
        le, l1e = math.log(max(eta_tilde[d], 1e-300)), math.log1p(-eta_tilde[d])
        # weights relative to p*(pi_1) p*(pi_2):
        # both fresh / parent = view 1 / parent = view 2 / both copied
        lw = np.array([2 * le, le + l1e, le + l1e, 2 * l1e - lp[i1] if i1 == i2 else -np.inf])
        w = np.exp(lw - lw.max())
        k = int(np.searchsorted(np.cumsum(w), u[d] * w.sum(), side="right"))
        parents[d] = fresh[d] if k == 0 else out.table[i1] if k in (1, 3) else out.table[i2]
    return parents, eta_tilde


def run_two_view(
    y1, y2, prior: GibbsParams, hyper: ObsHyper, config: SamplerConfig = SamplerConfig(), seed=0
) -> TwoViewResult:
    """Two views of the same units fitted as a two-time chain."""
    y1 = np.asarray(y1, dtype=np.float64).reshape(-1)
    y2 = np.asarray(y2, dtype=np.float64).reshape(-1)
    if y1.shape != y2.shape:
        raise ValueError(f"views must cover the same units, got {y1.size} and {y2.size}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    chain_ss, parent_ss = ss.spawn(2)
    out = run_chain(np.column_stack([y1, y2]), prior, hyper, config, chain_ss)
    out = replace(out, seed=seed if isinstance(seed, int) else None)
    parents, eta_tilde = _parent_draws(out, np.random.default_rng(parent_ss))
    return TwoViewResult(
        chain=out,
        parents=parents,
        eta_tilde=eta_tilde,
        change_probability=float(out.gammas[:, 0].mean()),
        eta_mean=float(out.etas[:, 0].mean()),
        view_labels=(out.labels_at(0), out.labels_at(1)),
    )


def initial_state(cat: Catalogue, prior: GibbsParams, hyper: ObsHyper, beta_prior: Sequence[float], rng) -> ChainState:
    """A consistent starting state for the reference updates."""
    T = cat.T
    etas = _clip_eta(rng.beta(beta_prior[0], beta_prior[1], size=T))
    etas[0] = np.nan
    return ChainState(
        partitions=[_catalogue_draw(cat, t, rng) for t in range(T)],
        gammas=np.ones(T, dtype=np.int64),
        etas=etas,
        beta_prior=(float(beta_prior[0]), float(beta_prior[1])),
        hyper=hyper,
        prior=prior,
    )
