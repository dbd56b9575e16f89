"""Command-line interface.

Subcommands: simulate, fit, metrics, eri, twoview, preprocess.

Exit codes are 0 on success, 1 on runtime or I/O failure and 2 on usage or
validation errors. All randomness flows from ``--seed``; see the sampler
module for how sub-streams are derived.

Data files are wide CSV (rows are units, columns are times) with an optional
header row; ``--long`` reads ``unit,time,value`` triples instead. Lines that
start with ``#`` are comments. Every file written here starts with a format
line and a config echo.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .decide import changepoint_metrics, mean_ari, summarize
from .model import DataMatrix, InvGamma, ObsHyper
from .partition import GibbsParams, adjusted_rand_index, canonicalize, solve_theta
from .psm import PsmPrior, eri_closed_form, eri_monte_carlo, lagged_ari_matrix
from .sampler import SamplerConfig, default_threads, run_chain, run_two_view
from .synth import Scenario, gen_ar1, gen_independent, preprocess

FORMAT_VERSION = 1
logger = logging.getLogger("lldpm")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class RunConfig:
    theta: float | None = None
    expected_clusters: float | None = None
    sigma: float = 0.0
    eta_a: float = 0.1
    eta_b: float = 0.9
    tau2: float = 3.0 / 14.0
    sigma02: float = 3.0 / 14.0
    mu0: float = 0.0
    iters: int = 10_000
    burnin: int = 5_000
    thin: int = 1
    catalogue_size: int = 2000
    catalogue_burnin: int = 500
    g_samples: int = 20_000
    sir_candidates: int = 50
    sir_correction: bool = True
    copy_move: bool = True
    sweep_order: str = "ascending"
    block_size: int | None = None
    prephase_iters: int = 0
    tau2_shape: float = 15.0
    tau2_scale: float = 3.0
    sigma02_shape: float = 15.0
    sigma02_scale: float = 3.0
    zeta: float = 0.01
    nonmarginal: bool = True
    kappa: float = 1.0
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if not self.iters > self.burnin >= 0:
            raise UsageError(f"need iters > burnin >= 0, got iters={self.iters}, burnin={self.burnin}")
        if self.thin < 1:
            raise UsageError("thin must be at least 1")
        if not 0.0 < self.zeta < 1.0:
            raise UsageError(f"zeta must lie in (0, 1), got {self.zeta}")
        if self.theta is not None and self.expected_clusters is not None:
            raise UsageError("give either theta or expected_clusters, not both")

    def gibbs(self, n: int) -> GibbsParams:
        if self.expected_clusters is not None:
            return GibbsParams(solve_theta(n, self.expected_clusters, self.sigma), self.sigma)
        return GibbsParams(1.0 if self.theta is None else self.theta, self.sigma)

    def hyper(self) -> ObsHyper:
        return ObsHyper(self.tau2, self.sigma02, self.mu0)

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(
            iters=self.iters,
            burnin=self.burnin,
            thin=self.thin,
            eta_a=self.eta_a,
            eta_b=self.eta_b,
            catalogue_size=self.catalogue_size,
            catalogue_burnin=self.catalogue_burnin,
            g_samples=self.g_samples,
            sir_candidates=self.sir_candidates,
            sir_correction=self.sir_correction,
            copy_move=self.copy_move,
            sweep_order=self.sweep_order,
            block_size=self.block_size,
            prephase_iters=self.prephase_iters,
            tau2_prior=InvGamma(self.tau2_shape, self.tau2_scale),
            sigma02_prior=InvGamma(self.sigma02_shape, self.sigma02_scale),
            threads=self.threads or default_threads(),
        )

    def echo(self) -> dict:
        # threads never changes results, so it stays out of the echo
        d = dataclasses.asdict(self)
        d.pop("threads")
        return d


PRESETS = {
    # simulation study: Beta(0.1, 0.9) and both variances at the IG(15, 3) mean
    "simulation": {},
    # gesture data: unit base variance, kernel variance at the IG(2, 1) mean, two expected clusters
    "gesture": {"sigma02": 1.0, "tau2": 1.0, "tau2_shape": 2.0, "tau2_scale": 1.0, "expected_clusters": 2.0},
}

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw):
    if key not in _FIELD_TYPES:
        raise UsageError(f"unknown config key {key!r}")
    if raw is None:
        return None
    kind = _FIELD_TYPES[key]
    if isinstance(raw, str):
        s = raw.strip()
        if s.lower() in ("none", "null", "") and "None" in kind:
            return None
        if kind.startswith("bool"):
            if s.lower() in ("1", "true", "yes", "on"):
                return True
            if s.lower() in ("0", "false", "no", "off"):
                return False
            raise UsageError(f"{key}: expected a boolean, got {raw!r}")
        try:
            if kind.startswith("int"):
                return int(s)
            if kind.startswith("float"):
                return float(s)
        except ValueError:
            raise UsageError(f"{key}: cannot parse {raw!r} as {kind.split(' ')[0]}") from None
        return s
    return raw


def read_config_file(path) -> dict:
    """key = value lines, or the summary JSON of an earlier fit."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: invalid JSON ({exc})") from None
        doc = doc.get("config", doc)
        return {k: _convert(k, v) for k, v in doc.items() if k != "threads"}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = _convert(key.replace("-", "_"), value)
    return out


def resolve_config(args) -> RunConfig:
    """Defaults, then preset, then config file, then flags."""
    layers = [dict(PRESETS[args.preset])]
    if args.config:
        layers.append(read_config_file(args.config))
    layers.append({k: getattr(args, k) for k in _FIELD_TYPES if getattr(args, k, None) is not None})
    values = {}
    for layer in layers:
        # theta and expected_clusters are alternatives; a later layer setting one clears the other
        if layer.get("theta") is not None:
            values.pop("expected_clusters", None)
        if layer.get("expected_clusters") is not None:
            values.pop("theta", None)
        values.update(layer)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------- I/O


def _header_lines(kind: str, meta: dict) -> str:
    return f"# lldpm {kind} format {FORMAT_VERSION}\n# meta {json.dumps(meta, sort_keys=True)}\n"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, kind: str, meta: dict, header, rows):
    buf = io.StringIO()
    buf.write(_header_lines(kind, meta))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_json(path, doc: dict):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            yield lineno, [c.strip() for c in row]


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_wide(path) -> np.ndarray:
    rows = list(_csv_rows(path))
    # a header row has no numeric cells
    if rows and not any(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise UsageError(f"{path}: no data rows")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for r, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise UsageError(f"{path}: line {lineno} has {len(cells)} columns, expected {width}")
        for c, cell in enumerate(cells):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise UsageError(f"{path}: line {lineno}, column {c + 1}: non-numeric value {cell!r}") from None
    return out


def read_long(path) -> np.ndarray:
    rows = list(_csv_rows(path))
    if rows and not any(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    units, times, cells = {}, {}, {}
    for lineno, row in rows:
        if len(row) != 3:
            raise UsageError(f"{path}: line {lineno} has {len(row)} columns, expected unit,time,value")
        u, t, v = row
        try:
            val = float(v)
        except ValueError:
            raise UsageError(f"{path}: line {lineno}, column 3: non-numeric value {v!r}") from None
        units.setdefault(u, len(units))
        times.setdefault(t, len(times))
        if (u, t) in cells:
            raise UsageError(f"{path}: line {lineno}: duplicate entry for unit {u}, time {t}")
        cells[(u, t)] = val
    if not cells:
        raise UsageError(f"{path}: no data rows")

    def order(keys):
        return sorted(keys, key=float) if all(_is_number(k) for k in keys) else list(keys)

    ulist, tlist = order(units), order(times)
    out = np.empty((len(ulist), len(tlist)))
    for i, u in enumerate(ulist):
        for j, t in enumerate(tlist):
            if (u, t) not in cells:
                raise UsageError(f"{path}: missing value for unit {u}, time {t}")
            out[i, j] = cells[(u, t)]
    return out


def read_data(path, long: bool) -> np.ndarray:
    return read_long(path) if long else read_wide(path)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _outdir(path) -> Path:
    if path is None:
        raise UsageError("an output path is required (--out)")
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    out = _outdir(args.out)
    if args.generator == "independent":
        Y, scen = gen_independent(args.n or 20, args.T or 100, args.seed)
    else:
        Y, scen = gen_ar1(args.n or 20, args.T or 30, args.lam, args.seed)
    meta = {"version": __version__, "command": "simulate", **scen.to_dict()["params"], "seed": args.seed}
    meta.pop("block_lengths", None)
    write_csv(out / "data.csv", "data", meta, [f"t{t}" for t in range(1, Y.T + 1)], Y.values.tolist())
    doc = {"format": FORMAT_VERSION, "version": __version__, **scen.to_dict()}
    write_json(out / "truth.json", doc)
    print(f"wrote {out / 'data.csv'} and {out / 'truth.json'}")
    return 0


def cmd_fit(args) -> int:
    cfg = resolve_config(args)
    out = _outdir(args.out)
    Y = DataMatrix(read_data(args.data, args.long))
    if Y.T < 2:
        raise UsageError("fitting needs at least two time points")
    prior = cfg.gibbs(Y.n)
    meta = {"version": __version__, "seed": cfg.seed, "config": cfg.echo()}
    with open(out / "trace.csv", "w", encoding="utf-8", newline="") as trace:
        trace.write(_header_lines("trace", meta))
        res = run_chain(Y, prior, cfg.hyper(), cfg.sampler(), cfg.seed, trace=trace)
    summ = summarize(res, cfg.zeta, cfg.nonmarginal)

    write_csv(
        out / "ppc.csv", "ppc", meta, ["t", "ppc", "flagged"],
        [(j + 2, p, int(j + 2 in summ.flagged)) for j, p in enumerate(summ.ppc)],
    )  # fmt: skip
    write_csv(
        out / "partitions.csv", "partitions", meta, ["t", "unit", "cluster"],
        [(t + 1, i + 1, c) for t, p in enumerate(summ.point_partitions) for i, c in enumerate(p.labels)],
    )  # fmt: skip
    write_csv(
        out / "etas.csv", "etas", meta, ["t", "eta_mean", "eta_sd"],
        [(j + 2, m, s) for j, (m, s) in enumerate(zip(res.etas.mean(axis=0), res.etas.std(axis=0)))],
    )  # fmt: skip
    if args.similarity:
        sim = out / "similarity"
        sim.mkdir(exist_ok=True)
        for t, S in enumerate(summ.similarity):
            write_csv(sim / f"t{t + 1:04d}.csv", "similarity", meta, [f"u{i + 1}" for i in range(Y.n)], S.tolist())
    write_json(
        out / "summary.json",
        {
            "format": FORMAT_VERSION,
            "version": __version__,
            "seed": cfg.seed,
            "config": cfg.echo(),
            "data": {"path": str(args.data), "sha256": _sha256(args.data), "long": bool(args.long), "n": Y.n, "T": Y.T},
            "theta": prior.theta,
            "hyper_used": {"tau2": res.hyper.tau2, "sigma02": res.hyper.sigma02, "mu0": res.hyper.mu0},
            "threshold": summ.threshold,
            "level": summ.level,
            "flagged": sorted(summ.flagged),
            "retained_draws": res.n_draws,
            "reshuffle_underflows": res.sir_failures,
        },
    )
    # wall-clock time varies between runs, so it lives apart from the reproducible outputs
    write_json(out / "runtime.json", {"format": FORMAT_VERSION, "runtime_seconds": res.runtime})
    print(f"flagged {len(summ.flagged)} changepoints at threshold {summ.threshold:.4g}; outputs in {out}")
    return 0


def _read_truth(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise UsageError(f"{path}: truth file is empty")
    try:
        return Scenario.from_dict(json.loads(text))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: not a scenario file ({exc})") from None


def _read_fit(fit_dir) -> tuple[dict, np.ndarray, list]:
    d = Path(fit_dir)
    summary = json.loads((d / "summary.json").read_text(encoding="utf-8"))
    T = summary["data"]["T"]
    ppc = np.full(T - 1, np.nan)
    for _, (t, p, _f) in _skip_header(_csv_rows(d / "ppc.csv")):
        ppc[int(t) - 2] = float(p)
    labels = [[] for _ in range(T)]
    for _, (t, _u, c) in _skip_header(_csv_rows(d / "partitions.csv")):
        labels[int(t) - 1].append(int(c))
    return summary, ppc, [canonicalize(x) for x in labels]


def _skip_header(rows):
    rows = list(rows)
    return rows[1:]


def _fit_metrics(fit_dir, truth_path) -> dict:
    scen = _read_truth(truth_path)
    summary, ppc, points = _read_fit(fit_dir)
    T = summary["data"]["T"]
    if T != scen.T or summary["data"]["n"] != scen.n:
        raise UsageError(
            f"horizon mismatch: fit has n={summary['data']['n']}, T={T}; truth has n={scen.n}, T={scen.T}"
        )
    m = changepoint_metrics(summary["flagged"], scen.true_changepoints, T, ppc).as_dict()
    m["ari"] = mean_ari(points, scen.true_partitions)
    m["ari_by_time"] = [adjusted_rand_index(p, q) for p, q in zip(points, scen.true_partitions)]
    return m


_MEASURES = ("specificity", "accuracy", "recall", "precision", "f1", "auc", "ari")


def cmd_metrics(args) -> int:
    if len(args.fit) != len(args.truth):
        raise UsageError("give one --truth for every --fit")
    runs = [_fit_metrics(f, t) for f, t in zip(args.fit, args.truth)]
    meta = {"version": __version__, "command": "metrics", "fits": [str(f) for f in args.fit]}
    rows = []
    for key in _MEASURES:
        vals = np.array([r[key] for r in runs], dtype=float)
        sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        rows.append((key, float(vals.mean()), sd))
        print(f"{key:12s} {vals.mean():.2f} ({sd:.2f})")
    if args.out:
        out = _outdir(args.out)
        write_csv(out / "metrics.csv", "metrics", meta, ["measure", "mean", "sd"], rows)
        per_time = [(k + 1, t + 1, a) for k, r in enumerate(runs) for t, a in enumerate(r["ari_by_time"])]
        write_csv(out / "ari_by_time.csv", "ari", meta, ["replicate", "t", "ari"], per_time)
        write_json(out / "metrics.json", {"format": FORMAT_VERSION, "replicates": runs})
    return 0


def cmd_eri(args) -> int:
    g = GibbsParams(args.theta, args.sigma)
    closed = eri_closed_form(g, args.eta, args.lag)
    print(f"closed form ERI: {closed!r}")
    rng = np.random.default_rng(args.seed)
    if args.draws:
        est = eri_monte_carlo(args.n, args.lag + 1, PsmPrior(g, args.eta), 1, args.lag + 1, args.draws, rng)
        print(f"Monte Carlo ERI: {est.mean!r} (se {est.stderr!r})")
    if args.matrix:
        m = lagged_ari_matrix(args.n, args.T, PsmPrior(g, args.eta), args.matrix_draws, rng)
        meta = {"version": __version__, "seed": args.seed, "theta": args.theta, "sigma": args.sigma, "eta": args.eta, "n": args.n}
        write_csv(args.matrix, "lagged-ari", meta, [f"t{t}" for t in range(1, args.T + 1)], m.tolist())
        print(f"wrote {args.matrix}")
    return 0


def _read_strata(path, n: int) -> list[str]:
    labels = [row[0] for _, row in _csv_rows(path)]
    if len(labels) == n + 1:
        labels = labels[1:]
    if len(labels) != n:
        raise UsageError(f"{path}: {len(labels)} stratum labels for {n} units")
    return labels


def _vector(path, long: bool) -> np.ndarray:
    x = read_data(path, long)
    if x.shape[1] != 1 and x.shape[0] != 1:
        raise UsageError(f"{path}: a view must be a single column, got shape {x.shape}")
    return x.reshape(-1)


def cmd_twoview(args) -> int:
    cfg = resolve_config(args)
    out = _outdir(args.out)
    y1, y2 = _vector(args.view1, args.long), _vector(args.view2, args.long)
    if y1.size != y2.size:
        raise UsageError(f"dimension mismatch: view 1 has {y1.size} units, view 2 has {y2.size}")
    strata = _read_strata(args.strata, y1.size) if args.strata else ["all"] * y1.size
    names = list(dict.fromkeys(strata))
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(names))
    meta = {"version": __version__, "seed": cfg.seed, "config": cfg.echo()}
    rows, parts = [], []
    for name, ss in zip(names, seeds):
        idx = np.array([i for i, s in enumerate(strata) if s == name])
        if idx.size < 2:
            raise UsageError(f"stratum {name!r} has fewer than two units")
        res = run_two_view(y1[idx], y2[idx], cfg.gibbs(idx.size), cfg.hyper(), cfg.sampler(), ss)
        summ = summarize(res.chain, cfg.zeta, cfg.nonmarginal)
        rows.append((name, int(idx.size), res.eta_hat, res.eta_mean))
        for v, p in enumerate(summ.point_partitions):
            parts.extend((name, int(i) + 1, v + 1, c) for i, c in zip(idx, p.labels))
        print(f"{name}: eta_hat={res.eta_hat:.3f}")
    write_csv(out / "eta.csv", "twoview-eta", meta, ["stratum", "n", "eta_hat", "eta_mean"], rows)
    write_csv(out / "partitions.csv", "twoview-partitions", meta, ["stratum", "unit", "view", "cluster"], parts)
    write_json(out / "summary.json", {"format": FORMAT_VERSION, "version": __version__, "seed": cfg.seed, "config": cfg.echo()})
    return 0


def cmd_preprocess(args) -> int:
    x = read_data(args.input, args.long)
    Y = preprocess(x, stride=args.stride, offset=args.offset)
    meta = {"version": __version__, "command": "preprocess", "stride": args.stride, "offset": args.offset, "source": str(args.input)}
    write_csv(args.output, "data", meta, [f"t{t}" for t in range(1, Y.T + 1)], Y.values.tolist())
    print(f"wrote {Y.n} units x {Y.T} times to {args.output}")
    return 0


# ---------------------------------------------------------------- parser


def _bool(s: str) -> bool:
    return _convert("copy_move", s)


def _add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file, or a summary.json from an earlier fit")
    p.add_argument("--preset", choices=sorted(PRESETS), default="simulation")
    p.add_argument("--long", action="store_true", help="input is unit,time,value triples")
    g = p.add_argument_group("model")
    g.add_argument("--theta", type=float)
    g.add_argument("--expected-clusters", dest="expected_clusters", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--eta-a", dest="eta_a", type=float)
    g.add_argument("--eta-b", dest="eta_b", type=float)
    g.add_argument("--tau2", type=float)
    g.add_argument("--sigma02", type=float)
    g.add_argument("--mu0", type=float)
    s = p.add_argument_group("sampler")
    s.add_argument("--iters", type=int)
    s.add_argument("--burnin", type=int)
    s.add_argument("--thin", type=int)
    s.add_argument("--catalogue-size", dest="catalogue_size", type=int)
    s.add_argument("--catalogue-burnin", dest="catalogue_burnin", type=int)
    s.add_argument("--g-samples", dest="g_samples", type=int)
    s.add_argument("--sir-candidates", dest="sir_candidates", type=int)
    s.add_argument("--sir-correction", dest="sir_correction", type=_bool)
    s.add_argument("--copy-move", dest="copy_move", type=_bool)
    s.add_argument("--sweep-order", dest="sweep_order", choices=["ascending", "random"])
    s.add_argument("--block-size", dest="block_size", type=int)
    s.add_argument("--prephase-iters", dest="prephase_iters", type=int)
    s.add_argument("--threads", type=int, help="worker threads (default: LLDPM_THREADS or 1)")
    d = p.add_argument_group("decision")
    d.add_argument("--zeta", type=float)
    d.add_argument("--nonmarginal", type=_bool)
    d.add_argument("--kappa", type=float)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lldpm", description="Dynamic partition model: simulate, fit and evaluate.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    p.add_argument("generator", choices=["independent", "ar1"])
    p.add_argument("--n", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="run the sampler and the changepoint decision")
    p.add_argument("data")
    p.add_argument("--out", help="output directory")
    p.add_argument("--similarity", action="store_true", help="also write per-time similarity matrices")
    _add_model_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("metrics", help="score fits against simulated truth")
    p.add_argument("--fit", action="append", required=True, help="fit output directory (repeatable)")
    p.add_argument("--truth", action="append", required=True, help="truth.json (one per --fit)")
    p.add_argument("--out", help="directory for metrics.csv and per-time ARI")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("eri", help="expected Rand index and lagged ARI matrix")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--lag", type=int, default=1)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--T", type=int, default=10)
    p.add_argument("--draws", type=int, default=0, help="Monte Carlo draws for the ERI check")
    p.add_argument("--matrix", help="write the lagged ARI matrix to this CSV")
    p.add_argument("--matrix-draws", dest="matrix_draws", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eri)

    p = sub.add_parser("twoview", help="two views of the same units")
    p.add_argument("--view1", required=True)
    p.add_argument("--view2", required=True)
    p.add_argument("--strata", help="one stratum label per unit")
    p.add_argument("--out", help="output directory")
    _add_model_flags(p)
    p.set_defaults(func=cmd_twoview)

    p = sub.add_parser("preprocess", help="smooth, downsample, square-root and standardise series")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--offset", type=int, default=1)
    p.add_argument("--long", action="store_true")
    p.set_defaults(func=cmd_preprocess)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"lldpm {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"lldpm {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
