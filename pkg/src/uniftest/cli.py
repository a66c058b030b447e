"""Command-line interface.

Single runs print a one-line JSON verdict to stdout; experiments write
their artifacts (trials.csv, report.json, plot.svg) into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .adaptive import AbcConfig, abc_schedule
from .batch import BatchConfig
from .coincidence import l1_to_uniform
from .distributions import (
    DiscreteDistribution,
    LipschitzDensity,
    l1_continuous_to_uniform,
    load_fixture,
    lower_bound_spec,
    make_lower_bound_density,
    make_perturbed,
    save_fixture,
)
from .errors import InfeasibleScheduleError, UniftestError
from .harness import (
    AuditSpec,
    ExperimentSpec,
    GridSearchSpec,
    audit_error_caps,
    grid_search,
    preset,
    run_experiment,
    spec_from_toml,
)
from .runners import (
    DensitySource,
    PmfSource,
    UniformReals,
    UniformSymbols,
    run_abc_trial,
    run_batch_trial,
    run_sct_trial,
)
from .sequential import SctConfig, sct_plans, sct_validate_regime

_REDUCED_ABC_C0 = 16.0
_REDUCED_ABC_MAX_EPOCHS = 200
_FEASIBLE_SAMPLE_BUDGET = 10**7


def _discrete_source(text: str, m: int):
    if text == "uniform":
        return UniformSymbols(m)
    if text == "pointmass":
        pmf = np.zeros(m)
        pmf[0] = 1.0
        dist = DiscreteDistribution(pmf)
        return PmfSource(dist, "pointmass", l1_to_uniform(dist))
    if text.startswith("perturbed:"):
        gamma = float(text.split(":", 1)[1])
        return PmfSource(make_perturbed(m, gamma), f"perturbed:{gamma:g}", gamma)
    if text.endswith(".json"):
        obj = load_fixture(text)
        if not isinstance(obj, DiscreteDistribution):
            raise UniftestError(f"fixture {text} is not a pmf")
        return PmfSource(obj, Path(text).name, l1_to_uniform(obj))
    raise UniftestError(f"unknown discrete source {text!r}")


def _continuous_source(text: str):
    if text == "uniform":
        return UniformReals()
    if text.endswith(".json"):
        obj = load_fixture(text)
        if not isinstance(obj, LipschitzDensity):
            raise UniftestError(f"fixture {text} is not a density")
        return DensitySource(obj, Path(text).name, l1_continuous_to_uniform(obj))
    raise UniftestError(f"unknown continuous source {text!r}")


def _print_verdict(verdict) -> None:
    print(
        json.dumps(
            {
                "decision": verdict.decision,
                "samples_used": verdict.samples_used,
                "exit_epoch": verdict.exit_epoch,
            }
        )
    )


def _cmd_sct_run(args) -> int:
    config = SctConfig(
        m=args.m,
        epsilon=args.epsilon,
        delta=args.delta,
        threshold_multiplier=args.threshold_multiplier,
        kappa_multiplier=args.kappa_multiplier,
        max_epochs_override=args.max_epochs,
    )
    for warning in sct_validate_regime(config):
        print(f"warning: {warning}", file=sys.stderr)
    source = _discrete_source(args.source, args.m)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    _print_verdict(run_sct_trial(sct_plans(config), source, rng))
    return 0


def _cmd_abc_run(args) -> int:
    c0 = args.c0
    max_epochs = args.max_epochs
    if args.reduced:
        c0 = c0 if c0 is not None else _REDUCED_ABC_C0
        max_epochs = max_epochs if max_epochs is not None else _REDUCED_ABC_MAX_EPOCHS
    config = AbcConfig(
        epsilon=args.epsilon,
        delta=args.delta,
        lipschitz_bound=args.lipschitz_bound,
        c0=c0,
        threshold_multiplier=args.threshold_multiplier,
        kappa_multiplier=args.kappa_multiplier,
        max_epochs_override=max_epochs,
    )
    if not args.reduced:
        if config.kappa > 100_000:
            raise InfeasibleScheduleError(
                f"schedule has {config.kappa} epochs; rerun with --reduced"
            )
        n_kappa = abc_schedule(config, config.kappa).n_k
        if n_kappa > _FEASIBLE_SAMPLE_BUDGET:
            raise InfeasibleScheduleError(
                f"schedule needs {n_kappa:.3g} samples at these constants; "
                "rerun with --reduced to use a reduced-constant schedule"
            )
    from .adaptive import abc_plans

    source = _continuous_source(args.source)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    _print_verdict(run_abc_trial(abc_plans(config), source, rng))
    return 0


def _cmd_batch_run(args) -> int:
    config = BatchConfig(args.m, args.epsilon, args.cn, args.ct)
    source = _discrete_source(args.source, args.m)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    _print_verdict(run_batch_trial(config, source, rng))
    return 0


def _cmd_experiment(args) -> int:
    if args.config:
        spec = spec_from_toml(args.config)
        if args.seed is not None:
            spec.master_seed = args.seed
        if args.trials is not None:
            spec.trials = args.trials
        if args.reduced:
            spec.reduced = True
        if args.threads is not None:
            spec.threads = args.threads
    else:
        spec = preset(
            args.preset,
            seed=args.seed if args.seed is not None else 0,
            trials=args.trials,
            reduced=args.reduced,
            threads=args.threads,
        )
    out = Path(args.out)
    if isinstance(spec, AuditSpec):
        report = audit_error_caps(spec, out_dir=out)
        print(json.dumps({"out": str(out), "cells": report["cells"]}, sort_keys=True))
        return 0
    report = run_experiment(spec, out_dir=out)
    summary = {
        "out": str(out),
        "winners": {a: g["winner"] for a, g in report.grid_search.items()},
        "cells": [
            {k: c[k] for k in ("algorithm", "gamma", "accuracy", "mean_samples")}
            for c in report.cells
        ],
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _cmd_gridsearch(args) -> int:
    spec = GridSearchSpec(
        algorithm=args.algorithm,
        epsilon=args.epsilon,
        delta=args.delta,
        trials=args.trials,
        accuracy_floor=args.floor,
        master_seed=args.seed,
        m=args.m,
        h1_gamma=args.h1_gamma,
        multiplier_grid=_floats(args.grid) if args.grid else [2.0, 3.0, 4.0, 5.0, 7.0],
        cn_grid=_floats(args.cn_grid) if args.cn_grid else [1.0, 2.0, 4.0],
        ct_grid=_floats(args.ct_grid) if args.ct_grid else [0.05, 0.1, 0.2],
        max_epochs=args.max_epochs,
        lipschitz_bound=args.lipschitz_bound,
        eta=args.eta,
        h1_distance=args.h1_distance,
        c0=args.c0,
        threads=args.threads,
    )
    result = grid_search(spec)
    payload = {
        "algorithm": result.algorithm,
        "feasible": result.feasible,
        "winner": result.winner,
        "table": [asdict(p) for p in result.table],
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_fixtures_lower_bound(args) -> int:
    bits = None
    rng = None
    if args.bits:
        bits = [int(b) for b in args.bits.split(",")]
    else:
        rng = np.random.Generator(np.random.PCG64(args.seed))
    spec = lower_bound_spec(args.lipschitz_bound, args.epsilon, args.eta, bits=bits, rng=rng)
    density = make_lower_bound_density(spec)
    save_fixture(density, args.out)
    print(
        json.dumps(
            {
                "out": str(args.out),
                "delta_width": spec.delta_width,
                "bits": spec.bits.tolist(),
                "distance": spec.distance,
                "achieved_epsilon": spec.achieved_epsilon,
            },
            sort_keys=True,
        )
    )
    return 0


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uniftest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sct = sub.add_parser("sct", help="sequential coincidence test")
    sct_sub = p_sct.add_subparsers(dest="subcommand", required=True)
    p = sct_sub.add_parser("run", help="run one test on a seeded source")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--source", required=True, help="uniform | perturbed:G | pointmass | fixture.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold-multiplier", type=float, default=7.0)
    p.add_argument("--kappa-multiplier", type=float, default=112.0)
    p.add_argument("--max-epochs", type=int, default=None)
    p.set_defaults(func=_cmd_sct_run)

    p_abc = sub.add_parser("abc", help="adaptive binning coincidence test")
    abc_sub = p_abc.add_subparsers(dest="subcommand", required=True)
    p = abc_sub.add_parser("run", help="run one test on a seeded source")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--L", dest="lipschitz_bound", type=float, required=True)
    p.add_argument("--c0", type=float, default=None)
    p.add_argument("--source", required=True, help="uniform | fixture.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold-multiplier", type=float, default=9.0)
    p.add_argument("--kappa-multiplier", type=float, default=576.0)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--reduced", action="store_true")
    p.set_defaults(func=_cmd_abc_run)

    p_batch = sub.add_parser("batch", help="fixed-sample-size coincidence test")
    batch_sub = p_batch.add_subparsers(dest="subcommand", required=True)
    p = batch_sub.add_parser("run", help="run one test on a seeded source")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--cn", type=float, required=True)
    p.add_argument("--ct", type=float, required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_batch_run)

    p = sub.add_parser("experiment", help="run a preset or TOML-configured experiment")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=["figure1", "smoke", "audit"])
    group.add_argument("--config", help="TOML experiment file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--reduced", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("gridsearch", help="tune threshold constants by Monte Carlo")
    p.add_argument("--algorithm", choices=["sct", "batch", "abc"], required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--h1-gamma", type=float, default=None)
    p.add_argument("--grid", help="comma-separated threshold multipliers")
    p.add_argument("--cn-grid", help="comma-separated batch sample multipliers")
    p.add_argument("--ct-grid", help="comma-separated batch threshold multipliers")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--floor", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--L", dest="lipschitz_bound", type=float, default=8.0)
    p.add_argument("--eta", type=float, default=0.25)
    p.add_argument("--h1-distance", type=float, default=0.5)
    p.add_argument("--c0", type=float, default=16.0)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=_cmd_gridsearch)

    p_fix = sub.add_parser("fixtures", help="generate distribution fixtures")
    fix_sub = p_fix.add_subparsers(dest="subcommand", required=True)
    p = fix_sub.add_parser("make-lower-bound", help="triangle-wave family member")
    p.add_argument("--L", dest="lipschitz_bound", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--bits", help="comma-separated +/-1 values; random if omitted")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fixtures_lower_bound)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UniftestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
