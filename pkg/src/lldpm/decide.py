"""Posterior summaries and changepoint decisions.

Changepoint times are 1-based and live in ``{2, ..., T}``; a PPC vector of
length ``T - 1`` has entry ``j`` for time ``j + 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partition import Partition, adjusted_rand_index, canonicalize

DEFAULT_ZETA = 0.01
_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def compute_ppc(output) -> np.ndarray:
    """Per-time mean of the retained change indicators.

    Accepts a ``ChainOutput`` or a (draws, T - 1) indicator array.
    """
    gam = np.asarray(getattr(output, "gammas", output))
    if gam.ndim != 2 or gam.shape[0] == 0:
        raise ValueError("need a non-empty (draws, T-1) array of indicators")
    return gam.mean(axis=0)


def bfdr(ppc, h: float) -> float:
    """Expected proportion of false flags among times with PPC above ``h``."""
    ppc = np.asarray(ppc, dtype=np.float64)
    if not 0.0 <= h <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    flag = ppc > h
    return float((1.0 - ppc[flag]).sum() / max(int(flag.sum()), 1))


def effective_level(zeta: float, nonmarginal: bool) -> float:
    if not 0.0 < zeta < 1.0:
        raise ValueError(f"zeta must lie in (0, 1), got {zeta}")
    return zeta / 3.0 if nonmarginal else zeta


def threshold_grid(ppc) -> np.ndarray:
    return np.unique(np.concatenate([[0.0], np.asarray(ppc, dtype=np.float64)]))


def optimal_threshold(ppc, zeta: float = DEFAULT_ZETA, nonmarginal: bool = True) -> float:
    """Smallest grid threshold whose BFDR is within the (possibly tightened) level."""
    level = effective_level(zeta, nonmarginal)
    for h in threshold_grid(ppc):
        if bfdr(ppc, float(h)) <= level:
            return float(h)
    return 1.0


def flagged_times(ppc, h: float) -> frozenset[int]:
    return frozenset(int(j) + 2 for j in np.flatnonzero(np.asarray(ppc) > h))


@dataclass(frozen=True)
class DecisionVector:
    d: np.ndarray
    r: np.ndarray | None = None

    def __post_init__(self):
        if self.r is not None and len(self.r) != len(self.d):
            raise ValueError("decisions and truths must have equal length")

    @classmethod
    def from_times(cls, detected, T: int, truth=None) -> "DecisionVector":
        return cls(_indicator(detected, T), None if truth is None else _indicator(truth, T))


def _indicator(times, T: int) -> np.ndarray:
    times = set(int(t) for t in times)
    bad = [t for t in times if not 2 <= t <= T]
    if bad:
        raise ValueError(f"changepoint times must lie in 2..{T}, got {sorted(bad)}")
    v = np.zeros(T - 1)
    v[[t - 2 for t in times]] = 1.0
    return v


def compound_loss(d, r, kappa: float = 1.0) -> tuple[float, float, float]:
    """(TPR, ER, loss) for decisions ``d`` against truths or PPC values ``r``.

    ER counts each false flag once for every window {t-1, t, t+1} that
    contains it. With no flags all three are 0.
    """
    d = np.asarray(getattr(d, "d", d), dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if d.shape != r.shape:
        raise ValueError(f"length mismatch: {d.shape} vs {r.shape}")
    D = d.sum()
    if D == 0:
        return 0.0, 0.0, 0.0
    e = d * (1.0 - r)
    er = (3.0 * e.sum() - e[0] - e[-1]) / D
    tpr = float((d * r).sum() / D)
    return tpr, float(er), float(-tpr + kappa * er)


def similarity_matrix(labels) -> np.ndarray:
    """Co-clustering frequencies from (draws, n) labels."""
    labels = np.atleast_2d(np.asarray(labels))
    if labels.shape[0] == 0:
        raise ValueError("need at least one draw")
    rows, counts = np.unique(labels, axis=0, return_counts=True)
    n = labels.shape[1]
    S = np.zeros((n, n))
    for row, c in zip(rows, counts):
        S += c * (row[:, None] == row[None, :])
    S /= labels.shape[0]
    np.fill_diagonal(S, 1.0)
    return S


def vi_lower_bound(labels, similarity: np.ndarray) -> float:
    """Lower bound (bits) of the posterior expected VI of a candidate partition."""
    c = np.asarray(labels)
    n = c.size
    same = c[:, None] == c[None, :]
    a = same.sum(axis=1)
    b = similarity.sum(axis=1)
    ab = (same * similarity).sum(axis=1)
    return float((np.log2(a) + np.log2(b) - 2.0 * np.log2(ab)).sum() / n)


def vi_point_estimate(labels, similarity: np.ndarray | None = None) -> Partition:
    """Minimiser of the VI lower bound among the distinct sampled partitions.

    Ties (to 1e-12) go to fewer blocks, then lexicographically smaller labels.
    """
    labels = np.atleast_2d(np.asarray(labels))
    if similarity is None:
        similarity = similarity_matrix(labels)
    cands = np.unique(labels, axis=0)
    best_key, best = None, None
    for row in cands:
        p = canonicalize(row)
        key = (round(vi_lower_bound(row, similarity), 12), p.k, p.labels)
        if best_key is None or key < best_key:
            best_key, best = key, p
    return best


@dataclass(frozen=True)
class ChangepointMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    specificity: float
    accuracy: float
    recall: float
    precision: float
    f1: float
    auc: float | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _ratio(num: float, den: float) -> float:
    return 1.0 if den == 0 else num / den


def roc_auc(ppc, truth_times, T: int) -> float:
    """Trapezoidal area under the ROC traced by thresholding PPC at every observed value."""
    ppc = np.asarray(ppc, dtype=np.float64)
    if ppc.size != T - 1:
        raise ValueError(f"PPC vector must have length {T - 1}")
    y = _indicator(truth_times, T).astype(bool)
    P, N = int(y.sum()), int((~y).sum())
    if P == 0 or N == 0:
        return float("nan")
    tpr, fpr = [0.0], [0.0]
    for h in np.unique(ppc)[::-1]:
        flag = ppc >= h
        tpr.append((flag & y).sum() / P)
        fpr.append((flag & ~y).sum() / N)
    return float(_trapezoid(tpr, fpr))


def changepoint_metrics(detected, truth, T: int, ppc=None) -> ChangepointMetrics:
    d = _indicator(detected, T).astype(bool)
    r = _indicator(truth, T).astype(bool)
    tp = int((d & r).sum())
    fp = int((d & ~r).sum())
    fn = int((~d & r).sum())
    tn = int((~d & ~r).sum())
    recall = _ratio(tp, tp + fn)
    precision = _ratio(tp, tp + fp)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ChangepointMetrics(
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        specificity=_ratio(tn, tn + fp),
        accuracy=(tp + tn) / (T - 1),
        recall=recall,
        precision=precision,
        f1=f1,
        auc=None if ppc is None else roc_auc(ppc, truth, T),
    )


@dataclass(frozen=True)
class PosteriorSummary:
    ppc: np.ndarray
    similarity: list[np.ndarray]
    point_partitions: list[Partition]
    flagged: frozenset[int]
    threshold: float
    level: float

    def __post_init__(self):
        if np.any((self.ppc < 0) | (self.ppc > 1)):
            raise ValueError("PPC values must lie in [0, 1]")
        if self.flagged != flagged_times(self.ppc, self.threshold):
            raise ValueError("flagged set disagrees with the threshold")


def summarize(output, zeta: float = DEFAULT_ZETA, nonmarginal: bool = True) -> PosteriorSummary:
    """PPC, BFDR threshold, flagged times, similarity matrices and VI point partitions."""
    ppc = compute_ppc(output)
    h = optimal_threshold(ppc, zeta, nonmarginal)
    sims, points = [], []
    for t in range(output.T):
        lab = output.labels_at(t)
        S = similarity_matrix(lab)
        sims.append(S)
        points.append(vi_point_estimate(lab, S))
    return PosteriorSummary(ppc, sims, points, flagged_times(ppc, h), h, effective_level(zeta, nonmarginal))


def mean_ari(points, truths) -> float:
    if len(points) != len(truths):
        raise ValueError("horizon mismatch")
    return float(np.mean([adjusted_rand_index(p, q) for p, q in zip(points, truths)]))
