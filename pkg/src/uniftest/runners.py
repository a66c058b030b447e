"""Vectorized single-trial runners and the sample sources that feed them.

The streaming engines in :mod:`uniftest.sequential` and
:mod:`uniftest.adaptive` are the reference implementations; the Monte Carlo
harness needs thousands of trials, some consuming 10^8 samples, so this
module provides chunked runners that draw one epoch of samples at a time and
update the singleton count with array operations.  They follow the exact
same schedule, draw order, binning, and strict decision rule as the
engines, and the test suite asserts verdict-for-verdict equality.

Sources draw from a caller-owned ``numpy`` generator, so a trial is fully
determined by its seed.  A source that needs per-trial randomness of its own
(the adversarial triangle-wave family draws a fresh bit vector each trial)
consumes it from the same generator in ``for_trial`` before any samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .batch import BatchConfig
from .coincidence import expected_k1_uniform
from .distributions import (
    DiscreteDistribution,
    LipschitzDensity,
    lower_bound_spec,
    make_lower_bound_density,
)
from .sequential import EpochPlan, Verdict

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a default dependency
    _HAVE_NUMBA = False

__all__ = [
    "DensitySource",
    "LowerBoundSource",
    "PmfSource",
    "UniformReals",
    "UniformSymbols",
    "abc_deficit_trace",
    "batch_prefix_deficits",
    "run_abc_trial",
    "run_batch_trial",
    "run_sct_trial",
    "sct_deficit_trace",
    "verdict_from_trace",
]


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


class _Source:
    """Common no-op trial hook; stateless sources are reused as-is."""

    def for_trial(self, rng: np.random.Generator):
        return self


@dataclass(frozen=True)
class UniformSymbols(_Source):
    """Uniform draws on ``{0, ..., m-1}``."""

    m: int

    descriptor = "uniform"
    truth = "H0"
    gamma = 0.0
    kind = "discrete"

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.integers(0, self.m, size=size, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class PmfSource(_Source):
    """Inverse-cdf draws from an arbitrary pmf."""

    dist: DiscreteDistribution
    descriptor: str
    gamma: float

    truth = "H1"
    kind = "discrete"

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        idx = np.searchsorted(self.dist.cdf, u, side="right")
        return np.minimum(idx, self.dist.m - 1).astype(np.int64)


@dataclass(frozen=True)
class UniformReals(_Source):
    """Uniform draws on ``[0, 1)``."""

    descriptor = "uniform"
    truth = "H0"
    gamma = 0.0
    kind = "continuous"

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size)


@dataclass(frozen=True, eq=False)
class DensitySource(_Source):
    """Inverse-cdf draws from a piecewise-linear density."""

    density: LipschitzDensity
    descriptor: str
    gamma: float

    truth = "H1"
    kind = "continuous"

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.density.quantile(rng.random(size))


@dataclass(frozen=True)
class LowerBoundSource(_Source):
    """Triangle-wave family at a fixed distance; fresh bits every trial.

    ``for_trial`` draws the ``+/-1`` bit vector from the trial generator
    (before any samples), so a trial seed pins both the family member and
    its sample stream.
    """

    lipschitz_bound: float
    epsilon: float
    eta: float

    truth = "H1"
    kind = "continuous"

    @property
    def descriptor(self) -> str:
        return f"lower-bound:L={self.lipschitz_bound:g},eps={self.epsilon:g},eta={self.eta:g}"

    @property
    def gamma(self) -> float:
        # the realized distance is bit-vector independent
        spec = lower_bound_spec(
            self.lipschitz_bound, self.epsilon, self.eta, bits=None, rng=np.random.default_rng(0)
        )
        return spec.distance

    def for_trial(self, rng: np.random.Generator) -> DensitySource:
        spec = lower_bound_spec(self.lipschitz_bound, self.epsilon, self.eta, rng=rng)
        return DensitySource(make_lower_bound_density(spec), self.descriptor, spec.distance)


# ---------------------------------------------------------------------------
# Discrete trials: dense counts, chunked per epoch
# ---------------------------------------------------------------------------


class _DenseK1:
    """Dense-array twin of ``CoincidenceState`` for chunked ingestion."""

    __slots__ = ("counts", "k1", "total")

    def __init__(self, m: int):
        self.counts = np.zeros(m, dtype=np.int64)
        self.k1 = 0
        self.total = 0

    def add_chunk(self, chunk: np.ndarray) -> None:
        uniq, cnt = np.unique(chunk, return_counts=True)
        old = self.counts[uniq]
        new = old + cnt
        self.counts[uniq] = new
        self.k1 += int(np.count_nonzero(new == 1)) - int(np.count_nonzero(old == 1))
        self.total += int(chunk.size)


def _sct_loop(plans, source, rng, stop_early: bool, collect: bool):
    m = plans[0].m_k
    sampler = source.for_trial(rng)
    acc = _DenseK1(m)
    deficits = np.empty(len(plans)) if collect else None
    for i, plan in enumerate(plans):
        acc.add_chunk(sampler.draw(rng, plan.n_k - acc.total))
        z = expected_k1_uniform(plan.n_k, m) - acc.k1
        if collect:
            deficits[i] = z
        if stop_early and z > plan.tau_k:
            return Verdict("H1", plan.n_k, plan.k), deficits
    last = plans[-1]
    return Verdict("H0", last.n_k, None), deficits


def run_sct_trial(plans: Sequence[EpochPlan], source, rng) -> Verdict:
    """One sequential-test trial with early exit; equals the streaming engine."""
    verdict, _ = _sct_loop(plans, source, rng, stop_early=True, collect=False)
    return verdict


def sct_deficit_trace(plans: Sequence[EpochPlan], source, rng) -> np.ndarray:
    """Per-epoch deficits ``Z_k`` over the whole schedule (no early exit).

    One trace evaluates every threshold multiplier exactly, because
    ``tau_k = multiplier * threshold_unit``; see :func:`verdict_from_trace`.
    """
    _, deficits = _sct_loop(plans, source, rng, stop_early=False, collect=True)
    return deficits


def verdict_from_trace(
    plans: Sequence[EpochPlan], deficits: np.ndarray, multiplier: float
) -> Verdict:
    """Replay a deficit trace under a different threshold multiplier.

    Produces the verdict the engine would have reached at that multiplier,
    bit-for-bit: thresholds are formed as ``multiplier * threshold_unit``
    exactly as the schedule does.
    """
    for plan, z in zip(plans, deficits):
        if z > multiplier * plan.threshold_unit:
            return Verdict("H1", plan.n_k, plan.k)
    return Verdict("H0", plans[-1].n_k, None)


# ---------------------------------------------------------------------------
# Continuous trials: sorted retention, merge + singleton count per epoch
# ---------------------------------------------------------------------------
#
# The retained samples are kept sorted.  Each epoch merges the sorted new
# chunk and counts, over the merged array, the adjacent equal-bin pairs P
# and the elements whose both neighbors share their bin I; then
# K1 = n - 2 P + I (a run of L >= 2 equal bins contributes L - 1 pairs and
# L - 2 interior elements, cancelling all L of its samples).


def _abc_merge_count_numpy(buf: np.ndarray, n_old: int, chunk: np.ndarray, m_k: int) -> int:
    n = n_old + chunk.size
    if n_old:
        idx = np.searchsorted(buf[:n_old], chunk)
        buf[:n] = np.insert(buf[:n_old], idx, chunk)
    else:
        buf[:n] = chunk
    if n == 0:
        return 0
    top = float(m_k - 1)
    b = np.floor(buf[:n] * float(m_k))
    if b[-1] > top:  # only x == 1.0 can land one past the last bin
        b[b > top] = top
    eq = b[1:] == b[:-1]
    pairs = int(np.count_nonzero(eq))
    interior = int(np.count_nonzero(eq[1:] & eq[:-1]))
    return n - 2 * pairs + interior


if _HAVE_NUMBA:

    @njit(cache=True)
    def _abc_merge_count_numba(buf, n_old, chunk, m_k):  # pragma: no cover - jit
        c = chunk.size
        n = n_old + c
        if n == 0:
            return 0
        # backward in-place merge of the sorted chunk into buf[:n_old]
        i = n_old - 1
        j = c - 1
        pos = n - 1
        while j >= 0:
            if i >= 0 and buf[i] > chunk[j]:
                buf[pos] = buf[i]
                i -= 1
            else:
                buf[pos] = chunk[j]
                j -= 1
            pos -= 1
        mkf = float(m_k)
        top = m_k - 1
        b_prev = int(math.floor(buf[0] * mkf))
        if b_prev > top:
            b_prev = top
        pairs = 0
        interior = 0
        prev_eq = False
        for t in range(1, n):
            b = int(math.floor(buf[t] * mkf))
            if b > top:
                b = top
            eq = b == b_prev
            if eq:
                pairs += 1
                if prev_eq:
                    interior += 1
            prev_eq = eq
            b_prev = b
        return n - 2 * pairs + interior


def _abc_kernel(use_numba: bool | None = None):
    if use_numba is None:
        use_numba = _HAVE_NUMBA
    if use_numba and not _HAVE_NUMBA:
        raise RuntimeError("numba requested but not installed")
    return _abc_merge_count_numba if use_numba else _abc_merge_count_numpy


def _abc_loop(plans, source, rng, stop_early, collect, use_numba):
    kernel = _abc_kernel(use_numba)
    sampler = source.for_trial(rng)
    buf = np.empty(plans[-1].n_k, dtype=np.float64)
    size = 0
    deficits = np.empty(len(plans)) if collect else None
    for i, plan in enumerate(plans):
        chunk = np.sort(sampler.draw(rng, plan.n_k - size))
        k1 = kernel(buf, size, chunk, plan.m_k)
        size = plan.n_k
        z = expected_k1_uniform(size, plan.m_k) - k1
        if collect:
            deficits[i] = z
        if stop_early and z > plan.tau_k:
            return Verdict("H1", size, plan.k), deficits
    return Verdict("H0", plans[-1].n_k, None), deficits


def run_abc_trial(
    plans: Sequence[EpochPlan], source, rng, use_numba: bool | None = None
) -> Verdict:
    """One adaptive-binning trial with early exit; equals the streaming engine."""
    verdict, _ = _abc_loop(plans, source, rng, True, False, use_numba)
    return verdict


def abc_deficit_trace(
    plans: Sequence[EpochPlan], source, rng, use_numba: bool | None = None
) -> np.ndarray:
    """Per-epoch deficits over the whole adaptive schedule (no early exit)."""
    _, deficits = _abc_loop(plans, source, rng, False, True, use_numba)
    return deficits


# ---------------------------------------------------------------------------
# Batch trials
# ---------------------------------------------------------------------------


def batch_prefix_deficits(m: int, sample_sizes: Sequence[int], source, rng) -> np.ndarray:
    """Deficit ``c_u(n) - K1`` at each prefix length in ``sample_sizes``.

    Evaluates a whole grid of batch sample counts on one shared stream
    (common random numbers); ``sample_sizes`` must be increasing.
    """
    sizes = list(sample_sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sample_sizes must be strictly increasing")
    sampler = source.for_trial(rng)
    acc = _DenseK1(m)
    out = np.empty(len(sizes))
    for i, n in enumerate(sizes):
        acc.add_chunk(sampler.draw(rng, n - acc.total))
        out[i] = expected_k1_uniform(n, m) - acc.k1
    return out


def run_batch_trial(config: BatchConfig, source, rng) -> Verdict:
    """One fixed-sample-size trial; equals :func:`uniftest.batch.batch_test`."""
    n = config.sample_size
    deficit = batch_prefix_deficits(config.m, [n], source, rng)[0]
    if deficit > config.threshold:
        return Verdict("H1", n, 1)
    return Verdict("H0", n, None)
