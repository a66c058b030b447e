"""Sequential coincidence test for discrete uniformity.

The test proceeds in epochs.  Epoch ``k`` extends the cumulative sample set
to ``n_k = ceil(k * sqrt(m * log(k + 2/delta)))`` draws and compares the
singleton deficit ``Z_k = c_u(n_k) - K1`` against the threshold
``tau_k = multiplier * n_k * sqrt(log(k + 2/delta) / m)``.  A strict
exceedance exits with the non-uniform verdict; surviving all
``kappa = ceil(112 / epsilon^2)`` epochs yields the uniform verdict.  The
deficit scales with the squared distance of the true distribution from
uniform, so distant alternatives exit in early epochs: sample usage adapts
to the realized distance rather than the worst-case separation.

Natural logarithms throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .coincidence import CoincidenceState, expected_k1_uniform
from .errors import StreamExhaustedError, TestTerminatedError

__all__ = [
    "EpochPlan",
    "SctConfig",
    "SctTest",
    "Verdict",
    "compute_m0",
    "sct_plans",
    "sct_run",
    "sct_schedule",
    "sct_validate_regime",
]


@dataclass(frozen=True)
class Verdict:
    """Outcome of one test run.

    ``samples_used`` is the total number of draws consumed; ``exit_epoch``
    is set exactly when the verdict is H1 (early exit), and is ``None`` when
    the schedule ran to completion.
    """

    decision: str  # "H0" | "H1"
    samples_used: int
    exit_epoch: int | None

    def __post_init__(self) -> None:
        if self.decision not in ("H0", "H1"):
            raise ValueError(f"decision must be 'H0' or 'H1', got {self.decision!r}")
        if (self.decision == "H1") != (self.exit_epoch is not None):
            raise ValueError("exit_epoch must be present exactly for H1 verdicts")
        if self.samples_used < 0:
            raise ValueError("samples_used must be nonnegative")


@dataclass(frozen=True)
class EpochPlan:
    """One epoch's schedule entry.

    ``n_k`` is the cumulative sample target, not a per-epoch batch size.
    ``threshold_unit`` is ``n_k * sqrt(log(k + 2/delta) / m_k)``; the
    decision threshold is always ``tau_k = multiplier * threshold_unit`` so
    sweeping the multiplier rescales thresholds exactly.
    """

    k: int
    n_k: int
    tau_k: float
    m_k: int
    threshold_unit: float


@dataclass(frozen=True)
class SctConfig:
    """Inputs of the sequential test over a fixed support of size ``m``.

    ``threshold_multiplier`` and ``kappa_multiplier`` default to the
    analysis constants 7 and 112; both are configurable because practical
    runs tune the threshold constant by grid search.
    ``max_epochs_override`` replaces the epsilon-derived epoch budget when
    set.
    """

    m: int
    epsilon: float
    delta: float
    threshold_multiplier: float = 7.0
    kappa_multiplier: float = 112.0
    max_epochs_override: int | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"support size must be >= 1, got {self.m}")
        if not 0.0 < self.epsilon < 2.0:
            raise ValueError(f"epsilon must lie in (0, 2), got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.threshold_multiplier <= 0.0 or self.kappa_multiplier <= 0.0:
            raise ValueError("multipliers must be positive")
        if self.max_epochs_override is not None and self.max_epochs_override < 1:
            raise ValueError("max_epochs_override must be a positive integer")

    @property
    def kappa(self) -> int:
        """Epoch budget: ``ceil(kappa_multiplier / epsilon^2)`` unless overridden."""
        if self.max_epochs_override is not None:
            return self.max_epochs_override
        return math.ceil(self.kappa_multiplier / self.epsilon**2)


def log_term(k: int, delta: float) -> float:
    return math.log(k + 2.0 / delta)


def sct_schedule(config: SctConfig, k: int) -> EpochPlan:
    """Schedule entry for epoch ``k``: sample target and decision threshold."""
    if not 1 <= k <= config.kappa:
        raise ValueError(f"epoch {k} outside [1, {config.kappa}]")
    lt = log_term(k, config.delta)
    n_k = math.ceil(k * math.sqrt(config.m * lt))
    unit = n_k * math.sqrt(lt / config.m)
    return EpochPlan(
        k=k,
        n_k=n_k,
        tau_k=config.threshold_multiplier * unit,
        m_k=config.m,
        threshold_unit=unit,
    )


def sct_plans(config: SctConfig) -> list[EpochPlan]:
    """Full schedule, epochs 1 through kappa."""
    return [sct_schedule(config, k) for k in range(1, config.kappa + 1)]


@lru_cache(maxsize=None)
def compute_m0(epsilon: float, delta: float) -> int:
    """Smallest support size ``l`` with ``1123 l^(1/4) exp(-0.25 sqrt(l)) <= delta epsilon^2``.

    Below this size the error-cap analysis gives no guarantee.  The left
    side decays to zero, so the minimum always exists; found by doubling
    then bisection (the left side is decreasing past l = 4, and the bound
    always lies in that region).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    target = delta * epsilon * epsilon

    def ok(l: int) -> bool:
        return 1123.0 * l**0.25 * math.exp(-0.25 * math.sqrt(l)) <= target

    hi = 8
    while not ok(hi):
        hi *= 2
    lo = hi // 2  # ok(lo) is False, ok(hi) is True
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def sct_validate_regime(config: SctConfig) -> list[str]:
    """Warnings for configurations outside the analyzed regime.

    Checks the minimum-support requirement, the sparse-sampling ratio
    ``n_kappa / m <= epsilon^2 / 1536``, and the separation floor
    ``epsilon >= m^(-1/8)``.  Violations degrade only the theoretical error
    caps; empirical runs are still meaningful, so this never blocks.
    """
    warnings: list[str] = []
    m0 = compute_m0(config.epsilon, config.delta)
    if config.m < m0:
        warnings.append(
            f"m={config.m} is below m0={m0} for epsilon={config.epsilon}, "
            f"delta={config.delta}; the error-cap guarantee does not apply"
        )
    n_kappa = sct_schedule(config, config.kappa).n_k
    ratio = n_kappa / config.m
    bound = config.epsilon**2 / 1536.0
    if ratio > bound:
        warnings.append(
            f"n_kappa/m = {ratio:.4g} exceeds the sparse-regime bound "
            f"epsilon^2/1536 = {bound:.4g}"
        )
    if config.epsilon < config.m ** (-0.125):
        warnings.append(
            f"epsilon={config.epsilon} is below m^(-1/8) = {config.m ** (-0.125):.4g}"
        )
    return warnings


class SctTest:
    """Streaming driver: feed samples, get a verdict at an epoch boundary.

    Samples accumulate across epochs; nothing is discarded.  The epoch
    comparison is strict (a deficit exactly equal to the threshold
    continues).  ``plans`` may be injected to run a custom schedule.
    """

    def __init__(self, config: SctConfig, plans: Sequence[EpochPlan] | None = None):
        self.config = config
        self._plans = list(plans) if plans is not None else sct_plans(config)
        if not self._plans:
            raise ValueError("schedule must contain at least one epoch")
        self.state = CoincidenceState(config.m)
        self._epoch_idx = 0
        self.verdict: Verdict | None = None

    @property
    def epoch(self) -> int:
        return self._plans[self._epoch_idx].k

    @property
    def current_plan(self) -> EpochPlan:
        return self._plans[self._epoch_idx]

    @property
    def is_terminated(self) -> bool:
        return self.verdict is not None

    def step(self, symbol: int) -> Verdict | None:
        """Insert one sample; returns the verdict if this closed the last epoch."""
        self._require_active()
        self.state.insert(symbol)
        if self.state.total == self.current_plan.n_k:
            return self._close_epoch()
        return None

    def feed(self, symbols) -> Verdict | None:
        """Bulk ingestion.  Stops at a verdict; later samples stay unconsumed."""
        self._require_active()
        arr = np.asarray(symbols)
        pos = 0
        while pos < arr.size and self.verdict is None:
            take = min(self.current_plan.n_k - self.state.total, arr.size - pos)
            self.state.insert_many(arr[pos : pos + take])
            pos += take
            if self.state.total == self.current_plan.n_k:
                self._close_epoch()
        return self.verdict

    def _require_active(self) -> None:
        if self.verdict is not None:
            raise TestTerminatedError("test already terminated; verdict available")

    def _close_epoch(self) -> Verdict | None:
        plan = self.current_plan
        z = expected_k1_uniform(plan.n_k, self.config.m) - self.state.k1
        if z > plan.tau_k:
            self.verdict = Verdict("H1", plan.n_k, plan.k)
        elif self._epoch_idx == len(self._plans) - 1:
            self.verdict = Verdict("H0", plan.n_k, None)
        else:
            self._epoch_idx += 1
            return None
        return self.verdict


def sct_run(config: SctConfig, stream: Iterable[int]) -> Verdict:
    """Drive a test over ``stream`` to termination.

    Deterministic given the stream.  Raises :class:`StreamExhaustedError`
    (carrying partial progress) if the stream ends before a verdict.
    """
    test = SctTest(config)
    it: Iterator[int] = iter(stream)
    for symbol in it:
        verdict = test.step(symbol)
        if verdict is not None:
            return verdict
    raise StreamExhaustedError(
        f"stream exhausted after {test.state.total} samples in epoch {test.epoch}",
        samples_seen=test.state.total,
        epoch=test.epoch,
    )
