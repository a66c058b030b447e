"""Monte Carlo harness: seeded experiments, grid search, error-cap audits.

Seed derivation
---------------
Every trial's generator is seeded as
``derive_seed(master_seed, stream, index)``: two rounds of the splitmix64
finalizer, folding in first the stream id and then the trial index (each
offset by one and scaled by the golden-ratio increment).  The mapping is
part of the output contract and is pinned by a regression test, so reports
are reproducible across releases.  Stream ids namespace the independent
sample streams of one experiment:

====================  ====
sct calibration H0      11
sct calibration H1      12
batch calibration H0    21
batch calibration H1    22
abc calibration H0      31
abc calibration H1      32
sct evaluation cell i   100 + i
batch evaluation cell i 200 + i
abc uniform cell        300
abc distance cell i     301 + i
====================  ====

Grid search uses common random numbers: each calibration trial produces one
full-schedule deficit trace, and every grid point is evaluated on it by
rescaling the threshold (``tau_k = multiplier * threshold_unit``), which
reproduces bit-for-bit the verdict a fresh run at that multiplier would
reach on the same seed.

Trial-level parallelism is process-based; results are assembled in task
order, so serial and parallel runs emit identical reports.  The
``UNIFTEST_THREADS`` environment variable caps worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from .adaptive import AbcConfig, abc_plans
from .batch import BatchConfig
from .coincidence import l1_to_uniform
from .distributions import DiscreteDistribution, make_perturbed
from .errors import InfeasibleScheduleError, UniftestError
from .runners import (
    LowerBoundSource,
    PmfSource,
    UniformReals,
    UniformSymbols,
    abc_deficit_trace,
    batch_prefix_deficits,
    run_abc_trial,
    run_batch_trial,
    run_sct_trial,
    sct_deficit_trace,
)
from .sequential import SctConfig, Verdict, compute_m0, sct_plans

__all__ = [
    "AbcSweepSpec",
    "AuditSpec",
    "ExperimentReport",
    "ExperimentSpec",
    "GridPointStats",
    "GridSearchResult",
    "GridSearchSpec",
    "TRIALS_CSV_HEADER",
    "TrialRecord",
    "aggregate_cells",
    "audit_error_caps",
    "derive_seed",
    "grid_search",
    "preset",
    "read_trials_csv",
    "resolve_threads",
    "run_experiment",
    "spec_from_toml",
    "wilson_interval",
    "write_trials_csv",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
# paper-faithful adaptive schedules beyond this many samples are refused
# unless the caller explicitly asks for a reduced run
_FEASIBLE_SAMPLE_BUDGET = 10**7


def _splitmix64(x: int) -> int:
    x &= _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


def derive_seed(master_seed: int, stream: int, index: int) -> int:
    """Deterministic per-trial seed; see the module docstring for the contract."""
    x = _splitmix64(master_seed + _GOLDEN * (stream + 1))
    return _splitmix64(x + _GOLDEN * (index + 1))


def rng_from(master_seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, stream, index)))


def resolve_threads(requested: int | None) -> int:
    """Worker count: explicit request capped by ``UNIFTEST_THREADS`` (default 1)."""
    env = os.environ.get("UNIFTEST_THREADS")
    cap = int(env) if env else None
    n = requested if requested is not None else (cap if cap is not None else 1)
    if cap is not None:
        n = min(n, cap)
    return max(1, n)


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        return (0.0, 1.0)
    phat = successes / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (phat + z2 / (2.0 * total)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / total + z2 / (4.0 * total * total)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


# ---------------------------------------------------------------------------
# Trial records and CSV round trip
# ---------------------------------------------------------------------------

TRIALS_CSV_HEADER = [
    "phase",
    "algorithm",
    "grid_point",
    "source",
    "truth",
    "gamma",
    "trial_index",
    "trial_seed",
    "decision",
    "samples_used",
    "exit_epoch",
]


@dataclass
class TrialRecord:
    """One test run inside an experiment.

    ``wall_time`` is in-memory diagnostics only: it is excluded from the CSV
    and JSON outputs so identical seeds produce byte-identical files.
    """

    phase: str  # "calibration" | "evaluation" | "audit"
    algorithm: str
    grid_point: str
    source: str
    truth: str
    gamma: float | None
    trial_index: int
    trial_seed: int
    decision: str
    samples_used: int
    exit_epoch: int | None
    wall_time: float = 0.0


def _record_row(r: TrialRecord) -> list[str]:
    return [
        r.phase,
        r.algorithm,
        r.grid_point,
        r.source,
        r.truth,
        "" if r.gamma is None else repr(float(r.gamma)),
        str(r.trial_index),
        str(r.trial_seed),
        r.decision,
        str(r.samples_used),
        "" if r.exit_epoch is None else str(r.exit_epoch),
    ]


def write_trials_csv(records: Sequence[TrialRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIALS_CSV_HEADER)
        for r in records:
            writer.writerow(_record_row(r))


def read_trials_csv(path) -> list[TrialRecord]:
    out: list[TrialRecord] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TRIALS_CSV_HEADER:
            raise ValueError(f"unexpected trials.csv header: {reader.fieldnames}")
        for row in reader:
            out.append(
                TrialRecord(
                    phase=row["phase"],
                    algorithm=row["algorithm"],
                    grid_point=row["grid_point"],
                    source=row["source"],
                    truth=row["truth"],
                    gamma=float(row["gamma"]) if row["gamma"] else None,
                    trial_index=int(row["trial_index"]),
                    trial_seed=int(row["trial_seed"]),
                    decision=row["decision"],
                    samples_used=int(row["samples_used"]),
                    exit_epoch=int(row["exit_epoch"]) if row["exit_epoch"] else None,
                )
            )
    return out


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


@dataclass
class AbcSweepSpec:
    """Adaptive-binning section of an experiment.

    Evaluation runs one uniform cell plus one cell per entry of
    ``distances`` (continuous l1 distances of the triangle-wave family).
    """

    lipschitz_bound: float = 8.0
    eta: float = 0.25
    distances: list[float] = field(default_factory=lambda: [0.5])
    calibration_distance: float = 0.5
    c0: float | None = 16.0
    max_epochs: int | None = 200
    multiplier_grid: list[float] = field(default_factory=lambda: [2.0, 2.5, 3.0, 4.0, 5.0])


@dataclass
class ExperimentSpec:
    """Full description of one reproducible experiment."""

    name: str
    algorithms: list[str]
    m: int
    epsilon: float
    delta: float
    gammas: list[float]
    trials: int
    master_seed: int = 0
    accuracy_floor: float = 0.8
    calibration_trials: int = 200
    calibration_gamma: float = 0.4
    sct_multiplier_grid: list[float] = field(
        default_factory=lambda: [2.0, 2.25, 2.5, 2.75, 3.0, 3.5, 4.0]
    )
    sct_max_epochs: int | None = None
    batch_cn_grid: list[float] = field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 6.0, 8.0])
    batch_ct_grid: list[float] = field(
        default_factory=lambda: [0.02, 0.04, 0.06, 0.09, 0.13, 0.2, 0.3]
    )
    abc: AbcSweepSpec | None = None
    reduced: bool = False
    threads: int | None = None

    def __post_init__(self) -> None:
        bad = [a for a in self.algorithms if a not in ("sct", "batch", "abc")]
        if bad:
            raise ValueError(f"unknown algorithms {bad}")
        if "abc" in self.algorithms and self.abc is None:
            self.abc = AbcSweepSpec()
        if self.trials < 1 or self.calibration_trials < 1:
            raise ValueError("trial counts must be positive")


@dataclass
class AuditSpec:
    """Error-cap audit at the theoretical threshold constants."""

    m: int = 400_000
    epsilon: float = 0.3
    delta: float = 0.2
    trials: int = 1000
    master_seed: int = 0
    miss_gamma: float = 0.4
    threshold_multiplier: float = 7.0
    threads: int | None = None


# ---------------------------------------------------------------------------
# Trial tasks (picklable units of work for the process pool)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _BatchTraceCfg:
    m: int
    sizes: tuple[int, ...]


@dataclass(frozen=True)
class _Task:
    algorithm: str  # sct | abc | batch | batch-trace
    mode: str  # run | trace
    config: object
    source: object
    master_seed: int
    stream: int
    index: int


@lru_cache(maxsize=32)
def _plans_cached(config):
    if isinstance(config, SctConfig):
        return sct_plans(config)
    if isinstance(config, AbcConfig):
        return abc_plans(config)
    raise TypeError(type(config).__name__)


def _trial_worker(task: _Task):
    rng = rng_from(task.master_seed, task.stream, task.index)
    start = time.perf_counter()
    if task.algorithm == "sct":
        plans = _plans_cached(task.config)
        if task.mode == "trace":
            payload = sct_deficit_trace(plans, task.source, rng)
        else:
            payload = run_sct_trial(plans, task.source, rng)
    elif task.algorithm == "abc":
        plans = _plans_cached(task.config)
        if task.mode == "trace":
            payload = abc_deficit_trace(plans, task.source, rng)
        else:
            payload = run_abc_trial(plans, task.source, rng)
    elif task.algorithm == "batch":
        payload = run_batch_trial(task.config, task.source, rng)
    elif task.algorithm == "batch-trace":
        cfg: _BatchTraceCfg = task.config
        payload = batch_prefix_deficits(cfg.m, list(cfg.sizes), task.source, rng)
    else:
        raise ValueError(f"unknown task algorithm {task.algorithm!r}")
    return payload, time.perf_counter() - start


def _execute(tasks: Sequence[_Task], threads: int, chunksize: int = 1):
    if threads <= 1 or len(tasks) <= 1:
        return [_trial_worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_trial_worker, tasks, chunksize=chunksize))


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


@dataclass
class GridPointStats:
    label: str
    params: dict
    h0_accuracy: float
    h1_accuracy: float
    mean_samples_h1: float
    feasible: bool


@dataclass
class GridSearchResult:
    algorithm: str
    feasible: bool
    winner: dict | None
    table: list[GridPointStats]
    records: list[TrialRecord]

    def require_winner(self) -> dict:
        if not self.feasible or self.winner is None:
            raise UniftestError(
                f"infeasible grid for {self.algorithm}: no point met the accuracy floor"
            )
        return self.winner


@dataclass
class GridSearchSpec:
    """Inputs of a standalone grid search over threshold constants.

    ``algorithm`` selects which fields apply: sct/batch need ``m`` and an
    ``h1_gamma`` calibration alternative; abc needs the triangle-wave family
    parameters.  Calibration always uses one uniform (H0) source and one
    alternative (H1) source, ``trials`` trials each.
    """

    algorithm: str
    epsilon: float
    delta: float
    trials: int = 200
    accuracy_floor: float = 0.8
    master_seed: int = 0
    m: int | None = None
    h1_gamma: float | None = None
    multiplier_grid: list[float] = field(default_factory=lambda: [2.0, 3.0, 4.0, 5.0, 7.0])
    cn_grid: list[float] = field(default_factory=lambda: [1.0, 2.0, 4.0])
    ct_grid: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2])
    max_epochs: int | None = None
    lipschitz_bound: float = 8.0
    eta: float = 0.25
    h1_distance: float = 0.5
    c0: float | None = 16.0
    threads: int | None = None


def _first_exceed(traces: np.ndarray, thresholds: np.ndarray):
    """Row-wise first epoch index where the deficit strictly exceeds the threshold."""
    exceed = traces > thresholds
    hit = exceed.any(axis=1)
    first = np.argmax(exceed, axis=1)
    return hit, first


def grid_search(spec: GridSearchSpec) -> GridSearchResult:
    """Tune threshold constants by Monte Carlo, exactly one trace per trial.

    Returns the point minimizing mean samples on the H1 calibration source
    subject to empirical accuracy >= floor on both sources; ties break
    toward the smaller constant (lexicographic for batch pairs).  An
    infeasible grid is reported explicitly, never silently replaced.
    """
    threads = resolve_threads(spec.threads)
    if spec.algorithm == "sct":
        if spec.m is None or spec.h1_gamma is None:
            raise ValueError("sct grid search needs m and h1_gamma")
        config = SctConfig(
            spec.m, spec.epsilon, spec.delta, max_epochs_override=spec.max_epochs
        )
        h0 = UniformSymbols(spec.m)
        h1 = PmfSource(
            make_perturbed(spec.m, spec.h1_gamma),
            f"perturbed:{spec.h1_gamma:g}",
            spec.h1_gamma,
        )
        return _deficit_grid(
            "sct", config, spec.multiplier_grid, h0, h1, spec.trials,
            spec.accuracy_floor, spec.master_seed, (11, 12), threads,
        )
    if spec.algorithm == "abc":
        config = AbcConfig(
            spec.epsilon,
            spec.delta,
            spec.lipschitz_bound,
            c0=spec.c0,
            max_epochs_override=spec.max_epochs,
        )
        h0 = UniformReals()
        h1 = LowerBoundSource(
            spec.lipschitz_bound, spec.h1_distance / (1.0 + spec.eta), spec.eta
        )
        return _deficit_grid(
            "abc", config, spec.multiplier_grid, h0, h1, spec.trials,
            spec.accuracy_floor, spec.master_seed, (31, 32), threads,
        )
    if spec.algorithm == "batch":
        if spec.m is None or spec.h1_gamma is None:
            raise ValueError("batch grid search needs m and h1_gamma")
        h0 = UniformSymbols(spec.m)
        h1 = PmfSource(
            make_perturbed(spec.m, spec.h1_gamma),
            f"perturbed:{spec.h1_gamma:g}",
            spec.h1_gamma,
        )
        return _batch_grid(
            spec.m, spec.epsilon, spec.cn_grid, spec.ct_grid, h0, h1, spec.trials,
            spec.accuracy_floor, spec.master_seed, (21, 22), threads,
        )
    raise ValueError(f"unknown algorithm {spec.algorithm!r}")


def _deficit_grid(
    algorithm, config, grid, h0_source, h1_source, trials, floor,
    master_seed, streams, threads,
) -> GridSearchResult:
    plans = _plans_cached(config)
    units = np.array([p.threshold_unit for p in plans])
    n_ks = np.array([p.n_k for p in plans], dtype=np.int64)
    sources = {"H0": (h0_source, streams[0]), "H1": (h1_source, streams[1])}
    traces: dict[str, np.ndarray] = {}
    seeds: dict[str, list[int]] = {}
    for truth, (src, stream) in sources.items():
        tasks = [
            _Task(algorithm, "trace", config, src, master_seed, stream, i)
            for i in range(trials)
        ]
        results = _execute(tasks, threads)
        traces[truth] = np.vstack([r[0] for r in results])
        seeds[truth] = [derive_seed(master_seed, stream, i) for i in range(trials)]

    table: list[GridPointStats] = []
    records: list[TrialRecord] = []
    grid = sorted(set(float(c) for c in grid))
    for c in grid:
        thresholds = c * units
        stats = {}
        for truth, (src, _) in sources.items():
            hit, first = _first_exceed(traces[truth], thresholds)
            samples = np.where(hit, n_ks[first], n_ks[-1])
            stats[truth] = (hit, samples)
            for i in range(trials):
                records.append(
                    TrialRecord(
                        phase="calibration",
                        algorithm=algorithm,
                        grid_point=f"c={c:g}",
                        source=src.descriptor,
                        truth=truth,
                        gamma=src.gamma,
                        trial_index=i,
                        trial_seed=seeds[truth][i],
                        decision="H1" if hit[i] else "H0",
                        samples_used=int(samples[i]),
                        exit_epoch=int(plans[first[i]].k) if hit[i] else None,
                    )
                )
        h0_hit = stats["H0"][0]
        h1_hit, h1_samples = stats["H1"]
        h0_acc = 1.0 - float(h0_hit.mean())
        h1_acc = float(h1_hit.mean())
        table.append(
            GridPointStats(
                label=f"c={c:g}",
                params={"threshold_multiplier": c},
                h0_accuracy=h0_acc,
                h1_accuracy=h1_acc,
                mean_samples_h1=float(h1_samples.mean()),
                feasible=h0_acc >= floor and h1_acc >= floor,
            )
        )
    return _pick_winner(algorithm, table, records)


def _batch_grid(
    m, epsilon, cn_grid, ct_grid, h0_source, h1_source, trials, floor,
    master_seed, streams, threads,
) -> GridSearchResult:
    cn_grid = sorted(set(float(c) for c in cn_grid))
    ct_grid = sorted(set(float(c) for c in ct_grid))
    cfgs = {cn: BatchConfig(m, epsilon, cn, ct_grid[0]) for cn in cn_grid}
    sizes = sorted(set(cfg.sample_size for cfg in cfgs.values()))
    size_pos = {n: j for j, n in enumerate(sizes)}
    trace_cfg = _BatchTraceCfg(m, tuple(sizes))
    sources = {"H0": (h0_source, streams[0]), "H1": (h1_source, streams[1])}
    deficits: dict[str, np.ndarray] = {}
    seeds: dict[str, list[int]] = {}
    for truth, (src, stream) in sources.items():
        tasks = [
            _Task("batch-trace", "trace", trace_cfg, src, master_seed, stream, i)
            for i in range(trials)
        ]
        results = _execute(tasks, threads)
        deficits[truth] = np.vstack([r[0] for r in results])
        seeds[truth] = [derive_seed(master_seed, stream, i) for i in range(trials)]

    table: list[GridPointStats] = []
    records: list[TrialRecord] = []
    for cn in cn_grid:
        n = cfgs[cn].sample_size
        col = size_pos[n]
        for ct in ct_grid:
            threshold = BatchConfig(m, epsilon, cn, ct).threshold
            accs = {}
            for truth, (src, _) in sources.items():
                hit = deficits[truth][:, col] > threshold
                accs[truth] = hit
                for i in range(trials):
                    records.append(
                        TrialRecord(
                            phase="calibration",
                            algorithm="batch",
                            grid_point=f"cn={cn:g},ct={ct:g}",
                            source=src.descriptor,
                            truth=truth,
                            gamma=src.gamma,
                            trial_index=i,
                            trial_seed=seeds[truth][i],
                            decision="H1" if hit[i] else "H0",
                            samples_used=n,
                            exit_epoch=1 if hit[i] else None,
                        )
                    )
            h0_acc = 1.0 - float(accs["H0"].mean())
            h1_acc = float(accs["H1"].mean())
            table.append(
                GridPointStats(
                    label=f"cn={cn:g},ct={ct:g}",
                    params={"sample_multiplier": cn, "threshold_multiplier": ct},
                    h0_accuracy=h0_acc,
                    h1_accuracy=h1_acc,
                    mean_samples_h1=float(n),
                    feasible=h0_acc >= floor and h1_acc >= floor,
                )
            )
    return _pick_winner("batch", table, records)


def _pick_winner(algorithm: str, table: list[GridPointStats], records) -> GridSearchResult:
    feasible = [p for p in table if p.feasible]
    if not feasible:
        return GridSearchResult(algorithm, False, None, table, records)
    # min mean samples; ties toward smaller constants (params are built in
    # lexicographic key order)
    best = min(
        feasible,
        key=lambda p: (p.mean_samples_h1, tuple(p.params[k] for k in sorted(p.params))),
    )
    return GridSearchResult(algorithm, True, dict(best.params), table, records)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    schema_version: int
    name: str
    master_seed: int
    config: dict
    grid_search: dict
    cells: list[dict]
    records: list[TrialRecord]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "master_seed": self.master_seed,
            "config": self.config,
            "grid_search": self.grid_search,
            "cells": self.cells,
        }


def aggregate_cells(records: Sequence[TrialRecord]) -> list[dict]:
    """Per-cell summaries of evaluation records; the report's source of truth.

    Re-running this over a parsed trials.csv reproduces the report's cell
    section exactly.
    """
    keys = []
    groups: dict[tuple, list[TrialRecord]] = {}
    for r in records:
        if r.phase != "evaluation":
            continue
        key = (r.algorithm, r.source, r.truth, r.gamma)
        if key not in groups:
            groups[key] = []
            keys.append(key)
        groups[key].append(r)
    cells = []
    for key in keys:
        rows = groups[key]
        samples = np.array([r.samples_used for r in rows], dtype=np.float64)
        correct = sum(1 for r in rows if r.decision == r.truth)
        exits = [r.exit_epoch for r in rows if r.exit_epoch is not None]
        hist: dict[int, int] = {}
        for e in exits:
            hist[e] = hist.get(e, 0) + 1
        cells.append(
            {
                "algorithm": key[0],
                "source": key[1],
                "truth": key[2],
                "gamma": key[3],
                "trials": len(rows),
                "correct": correct,
                "accuracy": correct / len(rows),
                "mean_samples": float(samples.mean()),
                "stddev_samples": float(samples.std(ddof=1)) if len(rows) > 1 else 0.0,
                "exit_epoch_histogram": [[k, hist[k]] for k in sorted(hist)],
                "no_exit_count": len(rows) - len(exits),
            }
        )
    return cells


def _eval_cell(algorithm, config, source, truth, gamma, label, master_seed, stream,
               trials, threads, chunksize=1) -> list[TrialRecord]:
    tasks = [
        _Task(algorithm, "run", config, source, master_seed, stream, i)
        for i in range(trials)
    ]
    results = _execute(tasks, threads, chunksize=chunksize)
    records = []
    for i, (verdict, wall) in enumerate(results):
        records.append(
            TrialRecord(
                phase="evaluation",
                algorithm=algorithm,
                grid_point=label,
                source=source.descriptor,
                truth=truth,
                gamma=gamma,
                trial_index=i,
                trial_seed=derive_seed(master_seed, stream, i),
                decision=verdict.decision,
                samples_used=verdict.samples_used,
                exit_epoch=verdict.exit_epoch,
                wall_time=wall,
            )
        )
    return records


def _spec_snapshot(spec: ExperimentSpec) -> dict:
    snap = asdict(spec)
    snap.pop("threads")  # execution detail, not part of the experiment identity
    return snap


def _check_abc_feasible(spec: ExperimentSpec) -> AbcConfig:
    ab = spec.abc
    config = AbcConfig(
        spec.epsilon,
        spec.delta,
        ab.lipschitz_bound,
        c0=ab.c0,
        max_epochs_override=ab.max_epochs,
    )
    if not spec.reduced:
        last_n = None
        if config.kappa <= 100_000:
            from .adaptive import abc_schedule

            last_n = abc_schedule(config, config.kappa).n_k
        if last_n is None or last_n > _FEASIBLE_SAMPLE_BUDGET:
            shown = f"{last_n:.3g}" if last_n is not None else f"> budget ({config.kappa} epochs)"
            raise InfeasibleScheduleError(
                f"adaptive schedule needs n_kappa = {shown} samples per trial "
                f"(kappa={config.kappa}, c0={config.effective_c0:g}); "
                "rerun with reduced=True (--reduced) to accept a reduced-constant run"
            )
    return config


def run_experiment(spec: ExperimentSpec, out_dir=None) -> ExperimentReport:
    """Run calibration grid searches and the evaluation sweep; emit artifacts.

    With ``out_dir`` set, writes ``trials.csv``, ``report.json`` and, when
    the evaluation contains an alternative sweep, ``plot.svg``.  Identical
    spec and master seed give byte-identical files.
    """
    threads = resolve_threads(spec.threads)
    records: list[TrialRecord] = []
    grid_summaries: dict[str, dict] = {}
    abc_config = _check_abc_feasible(spec) if "abc" in spec.algorithms else None

    winners: dict[str, dict] = {}
    for algorithm in spec.algorithms:
        if algorithm == "sct":
            gs = grid_search(
                GridSearchSpec(
                    algorithm="sct",
                    epsilon=spec.epsilon,
                    delta=spec.delta,
                    trials=spec.calibration_trials,
                    accuracy_floor=spec.accuracy_floor,
                    master_seed=spec.master_seed,
                    m=spec.m,
                    h1_gamma=spec.calibration_gamma,
                    multiplier_grid=spec.sct_multiplier_grid,
                    max_epochs=spec.sct_max_epochs,
                    threads=threads,
                )
            )
        elif algorithm == "batch":
            gs = grid_search(
                GridSearchSpec(
                    algorithm="batch",
                    epsilon=spec.epsilon,
                    delta=spec.delta,
                    trials=spec.calibration_trials,
                    accuracy_floor=spec.accuracy_floor,
                    master_seed=spec.master_seed,
                    m=spec.m,
                    h1_gamma=spec.calibration_gamma,
                    cn_grid=spec.batch_cn_grid,
                    ct_grid=spec.batch_ct_grid,
                    threads=threads,
                )
            )
        else:
            ab = spec.abc
            gs = grid_search(
                GridSearchSpec(
                    algorithm="abc",
                    epsilon=spec.epsilon,
                    delta=spec.delta,
                    trials=spec.calibration_trials,
                    accuracy_floor=spec.accuracy_floor,
                    master_seed=spec.master_seed,
                    multiplier_grid=ab.multiplier_grid,
                    max_epochs=ab.max_epochs,
                    lipschitz_bound=ab.lipschitz_bound,
                    eta=ab.eta,
                    h1_distance=ab.calibration_distance,
                    c0=ab.c0,
                    threads=threads,
                )
            )
        winners[algorithm] = gs.require_winner()
        records.extend(gs.records)
        grid_summaries[algorithm] = {
            "feasible": gs.feasible,
            "winner": gs.winner,
            "table": [asdict(p) for p in gs.table],
        }

    for algorithm in spec.algorithms:
        win = winners[algorithm]
        if algorithm == "sct":
            config = SctConfig(
                spec.m,
                spec.epsilon,
                spec.delta,
                threshold_multiplier=win["threshold_multiplier"],
                max_epochs_override=spec.sct_max_epochs,
            )
            for i, gamma in enumerate(spec.gammas):
                source = PmfSource(
                    make_perturbed(spec.m, gamma), f"perturbed:{gamma:g}", gamma
                )
                records.extend(
                    _eval_cell(
                        "sct", config, source, "H1", gamma, "winner",
                        spec.master_seed, 100 + i, spec.trials, threads,
                        chunksize=max(1, spec.trials // (threads * 8) or 1),
                    )
                )
        elif algorithm == "batch":
            config = BatchConfig(
                spec.m,
                spec.epsilon,
                win["sample_multiplier"],
                win["threshold_multiplier"],
            )
            for i, gamma in enumerate(spec.gammas):
                source = PmfSource(
                    make_perturbed(spec.m, gamma), f"perturbed:{gamma:g}", gamma
                )
                records.extend(
                    _eval_cell(
                        "batch", config, source, "H1", gamma, "winner",
                        spec.master_seed, 200 + i, spec.trials, threads,
                        chunksize=max(1, spec.trials // (threads * 8) or 1),
                    )
                )
        else:
            ab = spec.abc
            config = AbcConfig(
                spec.epsilon,
                spec.delta,
                ab.lipschitz_bound,
                c0=ab.c0,
                threshold_multiplier=win["threshold_multiplier"],
                max_epochs_override=ab.max_epochs,
            )
            records.extend(
                _eval_cell(
                    "abc", config, UniformReals(), "H0", None, "winner",
                    spec.master_seed, 300, spec.trials, threads,
                )
            )
            for i, dist in enumerate(ab.distances):
                source = LowerBoundSource(
                    ab.lipschitz_bound, dist / (1.0 + ab.eta), ab.eta
                )
                records.extend(
                    _eval_cell(
                        "abc", config, source, "H1", source.gamma, "winner",
                        spec.master_seed, 301 + i, spec.trials, threads,
                    )
                )

    report = ExperimentReport(
        schema_version=1,
        name=spec.name,
        master_seed=spec.master_seed,
        config=_spec_snapshot(spec),
        grid_search=grid_summaries,
        cells=aggregate_cells(records),
        records=records,
    )
    if out_dir is not None:
        _write_experiment(report, out_dir)
    return report


def _write_experiment(report: ExperimentReport, out_dir) -> None:
    from .plotting import emit_plot

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_trials_csv(report.records, out / "trials.csv")
    (out / "report.json").write_text(
        json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"
    )
    if any(c["truth"] == "H1" and c["gamma"] is not None for c in report.cells):
        emit_plot(report, out / "plot.svg")


# ---------------------------------------------------------------------------
# Error-cap audit
# ---------------------------------------------------------------------------


def audit_error_caps(spec: AuditSpec, out_dir=None) -> dict:
    """Estimate false-alarm and miss rates at the theoretical constants.

    Uses Wilson 95% intervals and flags a cell whose interval lower bound
    exceeds ``delta``.  Requires ``m >= m0(epsilon, delta)``.
    """
    m0 = compute_m0(spec.epsilon, spec.delta)
    if spec.m < m0:
        raise ValueError(f"audit needs m >= m0 = {m0}, got m = {spec.m}")
    threads = resolve_threads(spec.threads)
    config = SctConfig(
        spec.m, spec.epsilon, spec.delta, threshold_multiplier=spec.threshold_multiplier
    )
    records: list[TrialRecord] = []
    cells = {}
    sources = [
        ("H0", UniformSymbols(spec.m), 11),
        (
            "H1",
            PmfSource(
                make_perturbed(spec.m, spec.miss_gamma),
                f"perturbed:{spec.miss_gamma:g}",
                spec.miss_gamma,
            ),
            12,
        ),
    ]
    for truth, source, stream in sources:
        tasks = [
            _Task("sct", "run", config, source, spec.master_seed, stream, i)
            for i in range(spec.trials)
        ]
        results = _execute(tasks, threads, chunksize=max(1, spec.trials // (threads * 8) or 1))
        wrong = 0
        for i, (verdict, wall) in enumerate(results):
            wrong += verdict.decision != truth
            records.append(
                TrialRecord(
                    phase="audit",
                    algorithm="sct",
                    grid_point=f"c={spec.threshold_multiplier:g}",
                    source=source.descriptor,
                    truth=truth,
                    gamma=source.gamma,
                    trial_index=i,
                    trial_seed=derive_seed(spec.master_seed, stream, i),
                    decision=verdict.decision,
                    samples_used=verdict.samples_used,
                    exit_epoch=verdict.exit_epoch,
                    wall_time=wall,
                )
            )
        lo, hi = wilson_interval(wrong, spec.trials)
        cells["false_alarm" if truth == "H0" else "miss"] = {
            "source": source.descriptor,
            "trials": spec.trials,
            "errors": wrong,
            "rate": wrong / spec.trials,
            "wilson_low": lo,
            "wilson_high": hi,
            "flagged": lo > spec.delta,
        }
    report = {
        "schema_version": 1,
        "kind": "audit",
        "config": asdict(spec),
        "m0": m0,
        "cells": cells,
    }
    report["config"].pop("threads")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trials_csv(records, out / "trials.csv")
        (out / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return report


# ---------------------------------------------------------------------------
# Presets and TOML configs
# ---------------------------------------------------------------------------


def preset(name: str, *, seed: int = 0, trials: int | None = None,
           reduced: bool = False, threads: int | None = None):
    """Named experiment configurations.

    ``figure1``: the paper-scale sweep (m=20000, epsilon=0.3, seven
    alternatives, 1000 trials each).  ``smoke``: a fast small-support
    variant.  ``audit``: error-cap audit at theoretical constants.
    """
    if name == "figure1":
        return ExperimentSpec(
            name="figure1",
            algorithms=["sct", "batch"],
            m=20000,
            epsilon=0.3,
            delta=0.2,
            gammas=[0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6],
            trials=trials or 1000,
            master_seed=seed,
            calibration_trials=300,
            calibration_gamma=0.4,
            reduced=reduced,
            threads=threads,
        )
    if name == "smoke":
        return ExperimentSpec(
            name="smoke",
            algorithms=["sct", "batch"],
            m=3000,
            epsilon=0.3,
            delta=0.2,
            gammas=[0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6],
            trials=trials or 100,
            master_seed=seed,
            calibration_trials=120,
            calibration_gamma=0.6,
            sct_max_epochs=300,
            reduced=reduced,
            threads=threads,
        )
    if name == "audit":
        return AuditSpec(trials=trials or 1000, master_seed=seed, threads=threads)
    raise ValueError(f"unknown preset {name!r}; choose figure1, smoke, or audit")


def spec_from_toml(path) -> ExperimentSpec:
    """Load an :class:`ExperimentSpec` from the documented TOML schema."""
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib

    data = tomllib.loads(Path(path).read_text())
    grids = data.pop("grids", {})
    abc_data = data.pop("abc", None)
    kwargs = dict(
        name=data["name"],
        algorithms=list(data["algorithms"]),
        m=int(data.get("m", 0) or 1),
        epsilon=float(data["epsilon"]),
        delta=float(data["delta"]),
        gammas=[float(g) for g in data.get("gammas", [])],
        trials=int(data["trials"]),
        master_seed=int(data.get("master_seed", 0)),
        accuracy_floor=float(data.get("accuracy_floor", 0.8)),
        calibration_trials=int(data.get("calibration_trials", 200)),
        calibration_gamma=float(data.get("calibration_gamma", 0.4)),
        reduced=bool(data.get("reduced", False)),
    )
    if "sct_max_epochs" in data and data["sct_max_epochs"]:
        kwargs["sct_max_epochs"] = int(data["sct_max_epochs"])
    if "threads" in data and data["threads"]:
        kwargs["threads"] = int(data["threads"])
    if "sct_multiplier" in grids:
        kwargs["sct_multiplier_grid"] = [float(x) for x in grids["sct_multiplier"]]
    if "batch_cn" in grids:
        kwargs["batch_cn_grid"] = [float(x) for x in grids["batch_cn"]]
    if "batch_ct" in grids:
        kwargs["batch_ct_grid"] = [float(x) for x in grids["batch_ct"]]
    if abc_data:
        kwargs["abc"] = AbcSweepSpec(
            lipschitz_bound=float(abc_data.get("lipschitz_bound", 8.0)),
            eta=float(abc_data.get("eta", 0.25)),
            distances=[float(d) for d in abc_data.get("distances", [0.5])],
            calibration_distance=float(abc_data.get("calibration_distance", 0.5)),
            c0=float(abc_data["c0"]) if abc_data.get("c0") else None,
            max_epochs=int(abc_data["max_epochs"]) if abc_data.get("max_epochs") else None,
            multiplier_grid=[float(x) for x in abc_data.get("multiplier_grid", [2.0, 3.0, 4.0])],
        )
    return ExperimentSpec(**kwargs)
