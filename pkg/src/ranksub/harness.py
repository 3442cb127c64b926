"""Declarative, seeded Monte Carlo experiments with CSV output.

An :class:`ExperimentConfig` names an experiment kind, a grid of effect
sizes, the methods to compare and the Monte Carlo budget.  Every replicate
draws all of its randomness from streams derived from
``(seed, kind, effect index, replicate index)``, so results are
byte-identical no matter how many worker processes run the replicates.
"""

from __future__ import annotations

import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dist import std_normal_cdf, std_normal_quantile
from .engine import AGGREGATORS, MEAN, adaptive_test, aggregate_test, full_data_statistics
from .gaussloc import GaussLocationModel, gauss_nonreplication, gauss_power
from .merging import MERGE_RULES
from .dml import dml_interval, gen_plm_data
from .stats import (
    SplitMeanConfig,
    dip_hunt_pvalue,
    gen_trial_data,
    ipw_pvalue,
    make_dip_hunt_statistic,
    make_split_mean_statistic,
    make_verma_statistic,
    split_mean_statistic,
    verma_pvalue,
)
from .streams import derive_int_seed, derive_rng

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "EXPERIMENT_KINDS",
    "gen_mean_test_data",
    "gen_ball_mixture",
    "gen_t_mixture",
    "run_experiment",
    "replication_probability",
    "write_csv",
    "summarize",
]

CSV_SCHEMA = "ranksub-csv v1"
CSV_COLUMNS = (
    "experiment",
    "method",
    "effect",
    "replicate",
    "reject",
    "p_value",
    "estimate",
    "ci_lower",
    "ci_upper",
    "seed",
)

EXPERIMENT_KINDS = (
    "gauss-location",
    "mean-test",
    "unimodal",
    "verma",
    "verma-scale",
    "dml-table",
    "merge-compare",
    "replication",
)

_DEFAULT_METHODS = {
    "gauss-location": ("power:single", "power:agg", "power:conservative",
                       "nonrep:single", "nonrep:agg"),
    "mean-test": ("single", "agg-mean", "agg-max", "adaptive"),
    "unimodal": ("single", "agg-mean", "agg-max", "adaptive"),
    "verma": ("single", "agg-mean", "ipw"),
    "verma-scale": ("single", "agg-mean"),
    "dml-table": ("rank-ci", "plugin-ci", "rho-diag"),
    "merge-compare": ("single", "M.arith", "M.geom", "M.Bonf", "M.Bonf-geom", "agg-mean"),
    "replication": ("single", "agg-mean"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 300
    p: int = 3
    L: int = 50
    J: int = 20
    alpha: float = 0.05
    reps: int = 400
    seed: int = 0
    grid: tuple[float, ...] = (0.0,)
    methods: tuple[str, ...] = ()
    threads: int = 1
    out: str | None = None
    # statistic-specific knobs
    rho: float = 0.3
    split_fraction: float = 0.5
    calibration_reps: int = 199
    n_perm: int = 99
    theta0: float = 1.0
    mixture: str = "ball"
    propensity: str = "true"
    m: int | None = None  # subsample size override; None = floor(n / log n)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.experiment!r}")
        if self.reps < 1:
            raise ValueError("reps must be positive")
        if len(self.grid) == 0:
            raise ValueError("effect grid must be nonempty")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.methods:
            object.__setattr__(self, "methods", _DEFAULT_METHODS[self.experiment])

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(mapping) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**mapping)


@dataclass(frozen=True)
class RunRecord:
    experiment: str
    method: str
    effect: float
    replicate: int
    reject: bool | None = None
    p_value: float | None = None
    estimate: float | None = None
    ci_lower: float | None = None
    ci_upper: float | None = None
    seed: int = 0
    wall_time: float = 0.0  # not written to CSV: it is not reproducible


# ---------------------------------------------------------------------------
# data generators


def _principal_eigvec(sigma: np.ndarray) -> np.ndarray:
    """Leading eigenvector by power iteration to 1e-12."""
    p = sigma.shape[0]
    v = np.ones(p) / math.sqrt(p)
    for _ in range(10_000):
        w = sigma @ v
        w /= np.linalg.norm(w)
        if float(np.max(np.abs(w - v))) < 1e-12:
            return w
        v = w
    return v


def _ar_sigma(p: int) -> np.ndarray:
    return np.array([[2.0 ** -abs(i - j) for j in range(p)] for i in range(p)])


def gen_mean_test_data(n: int, p: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    """N(mu, Sigma) draws, mu = tau n^{-1/2} v1 along the principal eigenvector."""
    if p < 1:
        raise ValueError("p must be positive")
    sigma = _ar_sigma(p)
    v1 = _principal_eigvec(sigma)
    mu = tau / math.sqrt(n) * v1
    chol = np.linalg.cholesky(sigma)
    return mu + rng.standard_normal((n, p)) @ chol.T


def gen_ball_mixture(n: int, p: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    """Even mixture of two unit balls with centres 2 tau / sqrt(2+p) apart."""
    if p < 1:
        raise ValueError("p must be positive")
    directions = rng.standard_normal((n, p))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = rng.random(n) ** (1.0 / p)
    points = directions * radii[:, None]
    shift = np.zeros(p)
    shift[0] = 2.0 * tau / math.sqrt(2.0 + p)
    points[rng.random(n) < 0.5] += shift
    return points


def gen_t_mixture(n: int, p: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    """Even mixture of two multivariate t4's, centres tau sqrt(p) v2 apart."""
    if p < 1:
        raise ValueError("p must be positive")
    sigma = _ar_sigma(p)
    if p == 1:
        v2 = np.ones(1)
    else:
        v1 = _principal_eigvec(sigma)
        lam1 = float(v1 @ sigma @ v1)
        v2 = _principal_eigvec(sigma - lam1 * np.outer(v1, v1))
    chol = np.linalg.cholesky(sigma)
    gauss = rng.standard_normal((n, p)) @ chol.T
    chi2 = rng.chisquare(4, n)
    points = gauss * np.sqrt(4.0 / chi2)[:, None]
    points[rng.random(n) < 0.5] += tau * math.sqrt(p) * v2
    return points


# ---------------------------------------------------------------------------
# per-replicate method runners (module-level so process pools can pickle tasks)


def _record(cfg, method, effect, rep, t0, **kw) -> RunRecord:
    return RunRecord(
        experiment=cfg.experiment,
        method=method,
        effect=effect,
        replicate=rep,
        seed=cfg.seed,
        wall_time=time.perf_counter() - t0,
        **kw,
    )


def _gauss_location_records(cfg: ExperimentConfig, ei: int, rep: int) -> list[RunRecord]:
    mu = cfg.grid[ei]
    t0 = time.perf_counter()
    agg = GaussLocationModel(mu=mu, rho=cfg.rho, L=cfg.L, alpha=cfg.alpha)
    single = GaussLocationModel(mu=mu, rho=cfg.rho, L=1, alpha=cfg.alpha)
    sd = math.sqrt(1.0 / cfg.L + cfg.rho * (cfg.L - 1) / cfg.L)
    z_alpha = std_normal_quantile(1.0 - cfg.alpha)
    values = {
        "power:single": gauss_power(single),
        "power:agg": gauss_power(agg),
        "power:conservative": float(std_normal_cdf((mu - 2.0 * z_alpha) / sd)),
        "nonrep:single": gauss_nonreplication(single),
        "nonrep:agg": gauss_nonreplication(agg),
    }
    return [
        _record(cfg, method, mu, rep, t0, estimate=values[method])
        for method in cfg.methods
    ]


def _engine_statistic(cfg: ExperimentConfig):
    if cfg.experiment in ("mean-test", "replication"):
        return make_split_mean_statistic(cfg.split_fraction)
    if cfg.experiment == "unimodal":
        return make_dip_hunt_statistic(cfg.split_fraction, cfg.calibration_reps)
    if cfg.experiment in ("verma", "merge-compare"):
        return make_verma_statistic("cov", cfg.propensity, cfg.n_perm)
    if cfg.experiment == "verma-scale":
        return make_verma_statistic("mmd", cfg.propensity, cfg.n_perm)
    raise ValueError(f"no engine statistic for {cfg.experiment!r}")


def _simulate_data(cfg: ExperimentConfig, effect: float, rng: np.random.Generator):
    if cfg.experiment in ("mean-test", "replication"):
        return gen_mean_test_data(cfg.n, cfg.p, effect, rng)
    if cfg.experiment == "unimodal":
        gen = gen_ball_mixture if cfg.mixture == "ball" else gen_t_mixture
        return gen(cfg.n, cfg.p, effect, rng)
    if cfg.experiment in ("verma", "merge-compare"):
        return gen_trial_data(cfg.n, effect, "location", rng)
    if cfg.experiment == "verma-scale":
        return gen_trial_data(cfg.n, effect, "scale", rng)
    raise ValueError(f"no data generator for {cfg.experiment!r}")


def _run_single_split(cfg, data, rng) -> tuple[bool, float, float]:
    """(reject, p, statistic) for one application of the randomised test."""
    if cfg.experiment in ("mean-test", "replication"):
        t = split_mean_statistic(data, SplitMeanConfig(cfg.split_fraction), rng)
        p = 1.0 - float(std_normal_cdf(t))
        return t > std_normal_quantile(1.0 - cfg.alpha), p, t
    if cfg.experiment == "unimodal":
        p = dip_hunt_pvalue(data, cfg.split_fraction, cfg.calibration_reps, rng)
        return p <= cfg.alpha, p, 1.0 - p
    kind = "mmd" if cfg.experiment == "verma-scale" else "cov"
    p = verma_pvalue(data, kind, cfg.propensity, cfg.n_perm, rng)
    return p <= cfg.alpha, p, 1.0 - p


def _mc_records(cfg: ExperimentConfig, ei: int, rep: int) -> list[RunRecord]:
    effect = cfg.grid[ei]
    data = _simulate_data(cfg, effect, derive_rng(cfg.seed, cfg.experiment, ei, rep, "data"))
    statistic = _engine_statistic(cfg)
    records = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        test_seed = derive_int_seed(cfg.seed, cfg.experiment, ei, rep, "test", method)
        if method == "single" or method.startswith("single-"):
            rng = derive_rng(cfg.seed, cfg.experiment, ei, rep, "test", method)
            reject, p, stat = _run_single_split(cfg, data, rng)
            records.append(_record(cfg, method, effect, rep, t0,
                                   reject=reject, p_value=p, estimate=stat))
        elif method == "ipw":
            p = ipw_pvalue(data, cfg.propensity)
            records.append(_record(cfg, method, effect, rep, t0,
                                   reject=p <= cfg.alpha, p_value=p))
        elif method == "adaptive":
            report = adaptive_test(data, statistic, (AGGREGATORS["mean"], AGGREGATORS["max"]),
                                   L=cfg.L, alpha=cfg.alpha, seed=test_seed, J=cfg.J, m=cfg.m)
            records.append(_record(cfg, method, effect, rep, t0, reject=report.reject,
                                   p_value=report.p_value, estimate=report.statistic))
        elif method.startswith("agg"):
            agg_name = method.rsplit("-", 1)[-1]
            if agg_name not in AGGREGATORS:
                raise ValueError(f"unknown aggregator in method {method!r}")
            report = aggregate_test(data, statistic, AGGREGATORS[agg_name],
                                    L=cfg.L, alpha=cfg.alpha, seed=test_seed, J=cfg.J, m=cfg.m)
            records.append(_record(cfg, method, effect, rep, t0, reject=report.reject,
                                   p_value=report.p_value, estimate=report.statistic))
        else:
            raise ValueError(f"unknown method {method!r} for {cfg.experiment!r}")
    return records


def _merge_compare_records(cfg: ExperimentConfig, ei: int, rep: int) -> list[RunRecord]:
    effect = cfg.grid[ei]
    data = _simulate_data(cfg, effect, derive_rng(cfg.seed, cfg.experiment, ei, rep, "data"))
    statistic = _engine_statistic(cfg)
    test_seed = derive_int_seed(cfg.seed, cfg.experiment, ei, rep, "test", "agg-mean")
    # the merge rules consume exactly the p-values behind the engine's
    # full-data statistics, so all methods see the same randomisation
    t_full = full_data_statistics(data, statistic, cfg.L, test_seed)
    p_vec = 1.0 - t_full

    records = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        if method == "single":
            p = float(p_vec[0])
            records.append(_record(cfg, method, effect, rep, t0,
                                   reject=p <= cfg.alpha, p_value=p))
        elif method in MERGE_RULES:
            p = MERGE_RULES[method](p_vec)
            records.append(_record(cfg, method, effect, rep, t0,
                                   reject=p <= cfg.alpha, p_value=p))
        elif method == "agg-mean":
            report = aggregate_test(data, statistic, MEAN, L=cfg.L, alpha=cfg.alpha,
                                    seed=test_seed, J=cfg.J, m=cfg.m)
            records.append(_record(cfg, method, effect, rep, t0, reject=report.reject,
                                   p_value=report.p_value, estimate=report.statistic))
        else:
            raise ValueError(f"unknown method {method!r} for merge-compare")
    return records


def _dml_records(cfg: ExperimentConfig, ei: int, rep: int) -> list[RunRecord]:
    n = int(cfg.grid[ei])
    data = gen_plm_data(n, cfg.theta0, derive_rng(cfg.seed, cfg.experiment, ei, rep, "data"))
    t0 = time.perf_counter()
    result = dml_interval(
        data,
        L=cfg.L,
        alpha=cfg.alpha,
        seed=derive_int_seed(cfg.seed, cfg.experiment, ei, rep, "test"),
        J=cfg.J,
    )
    records = []
    for method in cfg.methods:
        if method == "rank-ci":
            lo, hi = result.ci_lower, result.ci_upper
            records.append(_record(cfg, method, n, rep, t0,
                                   reject=not lo <= cfg.theta0 <= hi,
                                   estimate=result.theta_dml, ci_lower=lo, ci_upper=hi))
        elif method == "plugin-ci":
            lo, hi = result.plugin_lower, result.plugin_upper
            records.append(_record(cfg, method, n, rep, t0,
                                   reject=not lo <= cfg.theta0 <= hi,
                                   estimate=result.theta_dml, ci_lower=lo, ci_upper=hi))
        elif method == "rho-diag":
            records.append(_record(cfg, method, n, rep, t0,
                                   estimate=result.fold_correlation_diag * (cfg.L - 1)))
        else:
            raise ValueError(f"unknown method {method!r} for dml-table")
    return records


def _replication_records(cfg: ExperimentConfig, ei: int, rep: int) -> list[RunRecord]:
    effect = cfg.grid[ei]
    data = _simulate_data(cfg, effect, derive_rng(cfg.seed, cfg.experiment, ei, rep, "data"))
    records = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        decisions = []
        for run in (0, 1):
            if method == "single":
                rng = derive_rng(cfg.seed, cfg.experiment, ei, rep, "run", run, method)
                reject, _, _ = _run_single_split(cfg, data, rng)
            elif method == "agg-mean":
                seed_run = derive_int_seed(cfg.seed, cfg.experiment, ei, rep, "run", run, method)
                report = aggregate_test(
                    data, make_split_mean_statistic(cfg.split_fraction), MEAN,
                    L=cfg.L, alpha=cfg.alpha, seed=seed_run, J=cfg.J, m=cfg.m,
                )
                reject = report.reject
            else:
                raise ValueError(f"unknown method {method!r} for replication")
            decisions.append(bool(reject))
        # reject column holds the disagreement indicator for this experiment
        records.append(_record(cfg, method, effect, rep, t0,
                               reject=decisions[0] != decisions[1]))
    return records


_TASK_RUNNERS = {
    "gauss-location": _gauss_location_records,
    "mean-test": _mc_records,
    "unimodal": _mc_records,
    "verma": _mc_records,
    "verma-scale": _mc_records,
    "dml-table": _dml_records,
    "merge-compare": _merge_compare_records,
    "replication": _replication_records,
}


def _run_task(args: tuple[ExperimentConfig, int, int]) -> list[RunRecord]:
    cfg, ei, rep = args
    return _TASK_RUNNERS[cfg.experiment](cfg, ei, rep)


# ---------------------------------------------------------------------------
# driving, CSV and summaries


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def write_csv(records: list[RunRecord], cfg: ExperimentConfig, path: str) -> None:
    lines = [f"# {CSV_SCHEMA}"]
    cfg_desc = (
        f"# experiment={cfg.experiment} n={cfg.n} p={cfg.p} L={cfg.L} J={cfg.J}"
        f" alpha={cfg.alpha:.10g} reps={cfg.reps} seed={cfg.seed}"
        f" grid={','.join(f'{g:.10g}' for g in cfg.grid)}"
        f" methods={','.join(cfg.methods)}"
    )
    lines.append(cfg_desc)
    lines.append(",".join(CSV_COLUMNS))
    for r in records:
        lines.append(",".join(_fmt(getattr(r, col)) for col in CSV_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def summarize(records: list[RunRecord], cfg: ExperimentConfig) -> str:
    """Per (method, effect) summary; rates are plain column means of the records."""
    lines = [f"{'method':<18} {'effect':>10} {'reps':>6} {'rate':>8} {'mean_est':>12} {'sec/rep':>8}"]
    for method in cfg.methods:
        for effect in cfg.grid:
            group = [r for r in records if r.method == method and r.effect == effect]
            if not group:
                continue
            rejects = [r.reject for r in group if r.reject is not None]
            rate = sum(rejects) / len(rejects) if rejects else float("nan")
            ests = [r.estimate for r in group if r.estimate is not None]
            mean_est = sum(ests) / len(ests) if ests else float("nan")
            mean_t = sum(r.wall_time for r in group) / len(group)
            lines.append(
                f"{method:<18} {effect:>10.4g} {len(group):>6d} {rate:>8.4f}"
                f" {mean_est:>12.5g} {mean_t:>8.3f}"
            )
    return "\n".join(lines)


def run_experiment(cfg: ExperimentConfig, quiet: bool = False) -> list[RunRecord]:
    """Run every (effect, replicate) task, print a summary, optionally write CSV."""
    reps = 1 if cfg.experiment == "gauss-location" else cfg.reps
    tasks = [(cfg, ei, rep) for ei in range(len(cfg.grid)) for rep in range(reps)]
    if cfg.threads > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (cfg.threads * 8))
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            per_task = list(pool.map(_run_task, tasks, chunksize=chunk))
    else:
        per_task = [_run_task(t) for t in tasks]
    records = [r for batch in per_task for r in batch]
    if cfg.out:
        write_csv(records, cfg, cfg.out)
    if not quiet:
        print(summarize(records, cfg))
        if cfg.out:
            print(f"wrote {len(records)} records to {cfg.out}", file=sys.stderr)
    return records


def replication_probability(cfg: ExperimentConfig, quiet: bool = False):
    """Disagreement fraction of two independent runs, per method and effect.

    Returns ``{(method, effect): (fraction, half_width)}`` where the half
    width is the 95% binomial interval around the fraction.
    """
    if cfg.reps < 50:
        raise ValueError("replication estimation needs at least 50 replicates")
    cfg = replace(cfg, experiment="replication")
    records = run_experiment(cfg, quiet=True)
    out = {}
    for method in cfg.methods:
        for effect in cfg.grid:
            flags = [r.reject for r in records
                     if r.method == method and r.effect == effect]
            frac = sum(flags) / len(flags)
            half = 1.96 * math.sqrt(frac * (1.0 - frac) / len(flags))
            out[(method, effect)] = (frac, half)
            if not quiet:
                print(f"non-replication {method:<10} effect={effect:<8.4g} "
                      f"{frac:.4f} +/- {half:.4f}")
    return out


def default_threads() -> int:
    env = os.environ.get("RANKSUB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ValueError("RANKSUB_THREADS must be an integer") from exc
    return 1
