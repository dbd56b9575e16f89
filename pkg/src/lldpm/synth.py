"""Synthetic scenarios with known partitions, and series preprocessing.

Times in ``Scenario.true_changepoints`` are 1-based, matching the
``t = 2..T`` indexing of the change indicators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import DataMatrix
from .partition import Partition, canonicalize


@dataclass(frozen=True)
class Scenario:
    n: int
    T: int
    true_partitions: tuple[Partition, ...]
    true_changepoints: frozenset[int]
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        if len(self.true_partitions) != self.T:
            raise ValueError("one partition per time point is required")
        if set(self.true_changepoints) != changepoints_of(self.true_partitions):
            raise ValueError("changepoints disagree with the partition sequence")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "T": self.T,
            "seed": self.seed,
            "params": self.params,
            "true_changepoints": sorted(self.true_changepoints),
            "true_partitions": [list(p.labels) for p in self.true_partitions],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        parts = tuple(canonicalize(p) for p in d["true_partitions"])
        return cls(int(d["n"]), int(d["T"]), parts, frozenset(d["true_changepoints"]), d.get("params", {}), d.get("seed"))


def changepoints_of(partitions) -> set[int]:
    return {t + 1 for t in range(1, len(partitions)) if partitions[t] != partitions[t - 1]}


@dataclass(frozen=True)
class IndependentConfig:
    n_blocks: int = 9
    min_block: int = 5
    mean_var: float = 4.0
    noise_var: float = 0.01


def _random_split(n: int, k: int, rng) -> Partition:
    """Random partition of n units into k groups of near-equal size."""
    perm = rng.permutation(n)
    raw = np.empty(n, dtype=np.int64)
    for j, chunk in enumerate(np.array_split(perm, k)):
        raw[chunk] = j
    return canonicalize(raw)


def _block_lengths(T: int, n_blocks: int, min_len: int, rng) -> np.ndarray:
    # stars and bars over the slack above the minimum length
    slack = T - n_blocks * min_len
    bars = np.sort(rng.choice(slack + n_blocks - 1, size=n_blocks - 1, replace=False))
    edges = np.concatenate([[-1], bars, [slack + n_blocks - 1]])
    return np.diff(edges) - 1 + min_len


def gen_independent(n: int = 20, T: int = 100, seed: int = 0, config: IndependentConfig = IndependentConfig()):
    """Piecewise-constant partitions cycling through two 3-cluster and one 2-cluster layout.

    Block lengths are a seeded random composition of T; every block has at
    least ``min(config.min_block, T // n_blocks)`` points. Cluster levels are
    drawn afresh at every time point.
    """
    if n < 6 or T < config.n_blocks:
        raise ValueError(f"need n >= 6 and T >= {config.n_blocks}, got n={n}, T={T}")
    rng = np.random.default_rng(seed)
    min_len = min(config.min_block, T // config.n_blocks)
    lengths = _block_lengths(T, config.n_blocks, min_len, rng)
    a = _random_split(n, 3, rng)
    b = a
    while b == a:
        b = _random_split(n, 3, rng)
    c = _random_split(n, 2, rng)
    layouts = [a, b, c]
    parts = []
    for j, length in enumerate(lengths):
        parts.extend([layouts[j % 3]] * int(length))
    Y = np.empty((n, T))
    for t, p in enumerate(parts):
        means = rng.normal(0.0, np.sqrt(config.mean_var), size=p.k)
        Y[:, t] = means[p.as_array()] + rng.normal(0.0, np.sqrt(config.noise_var), size=n)
    params = {"generator": "independent", "block_lengths": lengths.tolist(), **config.__dict__}
    scen = Scenario(n, T, tuple(parts), frozenset(changepoints_of(parts)), params, seed)
    return DataMatrix(Y), scen


def gen_ar1(
    n: int = 20,
    T: int = 30,
    lam: float = 0.5,
    seed: int = 0,
    equal_levels: tuple[float, float] = (-3.0, 3.0),
    unequal_levels: tuple[float, float] = (0.0, 4.0),
    unequal_share: float = 0.7,
    single_level: float = 0.0,
):
    """Autoregressive panel whose level pattern switches between one and two clusters.

    Two clusters appear at times divisible by 5 (equal sizes) or, failing
    that, by 9 (a ``unequal_share`` majority group); memberships are redrawn
    at every such time. ``Y[:, 0]`` is the first observed time; the recursion
    starts from zero.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    if n < 4 or T < 1:
        raise ValueError("need n >= 4 and T >= 1")
    if not 0.5 < unequal_share < 1.0:
        raise ValueError("unequal_share must lie in (0.5, 1)")
    rng = np.random.default_rng(seed)
    big = int(round(unequal_share * n))
    parts, levels = [], []
    for t in range(1, T + 1):
        if t % 5 == 0 or t % 9 == 0:
            raw = np.zeros(n, dtype=np.int64)
            perm = rng.permutation(n)
            if t % 5 == 0:
                raw[perm[n // 2 :]] = 1
                vals = equal_levels
            else:
                raw[perm[big:]] = 1
                vals = unequal_levels
            levels.append(np.asarray(vals)[raw])
            parts.append(canonicalize(raw))
        else:
            levels.append(np.full(n, single_level))
            parts.append(canonicalize(np.zeros(n, dtype=np.int64)))
    Y = np.empty((n, T))
    prev = np.zeros(n)
    for t in range(T):
        prev = lam * prev + levels[t] + rng.normal(size=n)
        Y[:, t] = prev
    params = {
        "generator": "ar1",
        "lambda": lam,
        "equal_levels": list(equal_levels),
        "unequal_levels": list(unequal_levels),
        "unequal_share": unequal_share,
        "single_level": single_level,
    }
    scen = Scenario(n, T, tuple(parts), frozenset(changepoints_of(parts)), params, seed)
    return DataMatrix(Y), scen


def preprocess(series, stride: int = 5, offset: int = 1, ddof: int = 1) -> DataMatrix:
    """Smooth, downsample, square-root and standardise each unit's series.

    ``series`` is (units, length). Steps: 2-point moving average, every
    ``stride``-th point from ``offset``, elementwise square root, per-unit
    standardisation with ``ddof`` in the variance.
    """
    try:
        x = np.asarray(series, dtype=np.float64)
    except ValueError:
        raise ValueError("all series must have the same length") from None
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("need a (units, length) array with length >= 2")
    if not np.all(np.isfinite(x)):
        i, t = np.argwhere(~np.isfinite(x))[0]
        raise ValueError(f"non-finite value at unit {i}, position {t}")
    ma = 0.5 * (x[:, :-1] + x[:, 1:])
    down = ma[:, offset::stride]
    if down.shape[1] < 2:
        raise ValueError("series too short to standardise after downsampling")
    neg = np.argwhere(down < 0)
    if neg.size:
        i, t = neg[0]
        raise ValueError(f"negative value {down[i, t]:.6g} at unit {i}, time {t} before square root")
    root = np.sqrt(down)
    sd = root.std(axis=1, ddof=ddof, keepdims=True)
    flat = np.flatnonzero(sd[:, 0] == 0)
    if flat.size:
        raise ValueError(f"unit {flat[0]} is constant after transformation and cannot be standardised")
    return DataMatrix((root - root.mean(axis=1, keepdims=True)) / sd)
