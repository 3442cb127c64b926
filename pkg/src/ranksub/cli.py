"""Command-line interface for running the Monte Carlo experiments.

Subcommands: ``run`` (any experiment kind), ``replication`` (non-replication
probabilities), ``merge-compare`` (conservative merging benchmark) and
``dml-ci`` (confidence intervals on one simulated dataset).  Options may
come from a flat ``key = value`` config file, with command-line flags
taking precedence.  Exit code 2 signals a configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .dml import dml_interval, gen_plm_data
from .harness import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    default_threads,
    replication_probability,
    run_experiment,
)
from .streams import derive_rng

__all__ = ["main", "parse_config_file"]

_INT_KEYS = {"n", "p", "L", "J", "reps", "seed", "threads", "calibration_reps", "n_perm"}
_FLOAT_KEYS = {"alpha", "rho", "split_fraction", "theta0"}


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; grid/methods are comma lists."""
    out: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key in _FLOAT_KEYS:
                out[key] = float(value)
            elif key == "grid":
                out[key] = tuple(float(v) for v in value.split(","))
            elif key == "methods":
                out[key] = tuple(v.strip() for v in value.split(","))
            else:
                out[key] = value
    return out


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--experiment", choices=EXPERIMENT_KINDS)
    parser.add_argument("--n", type=int)
    parser.add_argument("--p", type=int)
    parser.add_argument("--L", type=int)
    parser.add_argument("--J", type=int)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--reps", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out", help="CSV output path")
    parser.add_argument("--grid", help="comma-separated effect sizes")
    parser.add_argument("--methods", help="comma-separated method names")
    parser.add_argument("--mixture", choices=("ball", "t"))
    parser.add_argument("--propensity", choices=("true", "fitted"))
    parser.add_argument("--theta0", type=float)
    parser.add_argument("--rho", type=float)


def _build_config(args: argparse.Namespace, forced_kind: str | None = None) -> ExperimentConfig:
    mapping: dict = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    for key in ("experiment", "n", "p", "L", "J", "alpha", "reps", "seed",
                "threads", "out", "mixture", "propensity", "theta0", "rho"):
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    if args.grid is not None:
        mapping["grid"] = tuple(float(v) for v in args.grid.split(","))
    if args.methods is not None:
        mapping["methods"] = tuple(v.strip() for v in args.methods.split(","))
    if forced_kind is not None:
        mapping["experiment"] = forced_kind
    if "experiment" not in mapping:
        raise ValueError("an experiment kind is required (flag --experiment or config)")
    mapping.setdefault("threads", default_threads())
    return ExperimentConfig.from_mapping(mapping)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="ranksub",
                                     description="seeded Monte Carlo experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("run", "replication", "merge-compare"):
        p = sub.add_parser(name)
        _add_common(p)

    p_dml = sub.add_parser("dml-ci", help="confidence intervals on one simulated dataset")
    p_dml.add_argument("--n", type=int, default=500)
    p_dml.add_argument("--L", type=int, default=2)
    p_dml.add_argument("--J", type=int, default=50)
    p_dml.add_argument("--alpha", type=float, default=0.05)
    p_dml.add_argument("--seed", type=int, default=0)
    p_dml.add_argument("--theta0", type=float, default=1.0)

    args = parser.parse_args(argv)
    try:
        if args.command == "dml-ci":
            data = gen_plm_data(args.n, args.theta0, derive_rng(args.seed, "dml-ci-data"))
            result = dml_interval(data, L=args.L, alpha=args.alpha,
                                  seed=args.seed, J=args.J)
            print(f"theta_dml      {result.theta_dml: .6f}")
            print(f"sigma_plugin   {result.sigma_plugin: .6f}")
            print(f"sigma_ls       {result.sigma_ls: .6f}")
            print(f"rank CI        [{result.ci_lower: .6f}, {result.ci_upper: .6f}]")
            print(f"plug-in CI     [{result.plugin_lower: .6f}, {result.plugin_upper: .6f}]")
            print(f"rho(L-1) diag  {result.fold_correlation_diag * (args.L - 1): .4f}")
            return 0
        if args.command == "replication":
            cfg = _build_config(args, forced_kind="replication")
            replication_probability(cfg)
            return 0
        forced = "merge-compare" if args.command == "merge-compare" else None
        cfg = _build_config(args, forced_kind=forced)
        run_experiment(cfg)
        return 0
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
