"""Adaptive binning coincidence test for Lipschitz-continuous uniformity.

Same epoch skeleton as the discrete sequential test, with one addition: the
unit interval is rebinned more finely every epoch.  Epoch ``k`` uses
``m_k = ceil(c0 k^4 log(k + 2/delta))`` bins and a cumulative sample target
``n_k = ceil(sqrt(c0) k^3 log(k + 2/delta))``, preserving the sparse
``n ~ sqrt(m log)`` relation per epoch.  The singleton count is recomputed
from scratch over all retained raw samples at every boundary, because bin
edges move between epochs; coarse counts cannot be merged.

Theoretical constants (``c0 >= max(28212, m0, 2L)``, threshold multiplier 9,
epoch budget ``576 / epsilon^2``) produce schedules far beyond desk scale,
so ``c0``, the multipliers, and the epoch budget are all configurable;
reduced-constant runs are the practical mode and the defaults remain
available for schedule-level property checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .coincidence import bin_indices, expected_k1_uniform
from .errors import InfeasibleScheduleError, StreamExhaustedError, TestTerminatedError
from .sequential import EpochPlan, Verdict, compute_m0, log_term

__all__ = [
    "AbcConfig",
    "AbcTest",
    "abc_plans",
    "abc_predict_exit_epoch",
    "abc_run",
    "abc_schedule",
]

_DEFAULT_C0_FLOOR = 28212.0
_MAX_PLANNED_EPOCHS = 2_000_000


@dataclass(frozen=True)
class AbcConfig:
    """Inputs of the adaptive binning test.

    ``c0`` controls the binning resolution ramp; ``None`` selects the
    theoretical floor ``max(28212, m0(epsilon, delta), 2 L)``.  Reduced runs
    pass a small ``c0`` (e.g. 16) together with ``max_epochs_override``.
    """

    epsilon: float
    delta: float
    lipschitz_bound: float
    c0: float | None = None
    threshold_multiplier: float = 9.0
    kappa_multiplier: float = 576.0
    max_epochs_override: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 2.0:
            raise ValueError(f"epsilon must lie in (0, 2), got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.lipschitz_bound <= 0.0:
            raise ValueError("Lipschitz bound must be positive")
        if self.threshold_multiplier <= 0.0 or self.kappa_multiplier <= 0.0:
            raise ValueError("multipliers must be positive")
        if self.c0 is not None and self.c0 <= 0.0:
            raise ValueError("c0 must be positive")
        if self.max_epochs_override is not None and self.max_epochs_override < 1:
            raise ValueError("max_epochs_override must be a positive integer")

    @property
    def c0_floor(self) -> float:
        """Theoretical lower bound for ``c0`` at these inputs."""
        return max(
            _DEFAULT_C0_FLOOR,
            float(compute_m0(self.epsilon, self.delta)),
            2.0 * self.lipschitz_bound,
        )

    @property
    def effective_c0(self) -> float:
        return self.c0 if self.c0 is not None else self.c0_floor

    @property
    def kappa(self) -> int:
        if self.max_epochs_override is not None:
            return self.max_epochs_override
        return math.ceil(self.kappa_multiplier / self.epsilon**2)

    @property
    def is_paper_faithful(self) -> bool:
        """True when the schedule still carries the full theoretical constants."""
        return (
            self.effective_c0 >= self.c0_floor
            and self.threshold_multiplier >= 9.0
            and self.kappa_multiplier >= 576.0
            and self.max_epochs_override is None
        )


def abc_schedule(config: AbcConfig, k: int) -> EpochPlan:
    """Schedule entry for epoch ``k``: bin count, sample target, threshold."""
    if not 1 <= k <= config.kappa:
        raise ValueError(f"epoch {k} outside [1, {config.kappa}]")
    c0 = config.effective_c0
    lt = log_term(k, config.delta)
    m_k = math.ceil(c0 * k**4 * lt)
    n_k = math.ceil(math.sqrt(c0) * k**3 * lt)
    unit = n_k * math.sqrt(lt / m_k)
    return EpochPlan(
        k=k,
        n_k=n_k,
        tau_k=config.threshold_multiplier * unit,
        m_k=m_k,
        threshold_unit=unit,
    )


def abc_plans(config: AbcConfig) -> list[EpochPlan]:
    """Full schedule, epochs 1 through kappa."""
    if config.kappa > _MAX_PLANNED_EPOCHS:
        raise InfeasibleScheduleError(
            f"schedule has {config.kappa} epochs; cap it with max_epochs_override"
        )
    return [abc_schedule(config, k) for k in range(1, config.kappa + 1)]


class AbcTest:
    """Streaming driver over real-valued samples in ``[0, 1]``.

    Raw samples are retained for the whole run: each boundary rebins the
    entire set at the current resolution and recounts singletons from
    scratch.  Comparison is strict, as in the discrete test.
    """

    def __init__(self, config: AbcConfig, plans: Sequence[EpochPlan] | None = None):
        self.config = config
        self._plans = list(plans) if plans is not None else abc_plans(config)
        if not self._plans:
            raise ValueError("schedule must contain at least one epoch")
        self._raw = np.empty(min(self._plans[-1].n_k, 4096), dtype=np.float64)
        self._size = 0
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

    @property
    def samples_seen(self) -> int:
        return self._size

    @property
    def raw_samples(self) -> np.ndarray:
        """Read-only view of every sample retained so far."""
        view = self._raw[: self._size]
        view.flags.writeable = False
        return view

    def step(self, sample: float) -> Verdict | None:
        self._require_active()
        x = float(sample)
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"sample {x!r} outside [0, 1]")
        self._append(np.array([x]))
        if self._size == self.current_plan.n_k:
            return self._close_epoch()
        return None

    def feed(self, samples) -> Verdict | None:
        """Bulk ingestion.  Stops at a verdict; later samples stay unconsumed."""
        self._require_active()
        arr = np.asarray(samples, dtype=np.float64)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("samples outside [0, 1]")
        pos = 0
        while pos < arr.size and self.verdict is None:
            take = min(self.current_plan.n_k - self._size, arr.size - pos)
            self._append(arr[pos : pos + take])
            pos += take
            if self._size == self.current_plan.n_k:
                self._close_epoch()
        return self.verdict

    def k1_at_current_resolution(self) -> int:
        """Singleton count of the retained set under the current epoch's bins."""
        bins = bin_indices(self._raw[: self._size], self.current_plan.m_k)
        _, counts = np.unique(bins, return_counts=True)
        return int(np.count_nonzero(counts == 1))

    def _append(self, chunk: np.ndarray) -> None:
        need = self._size + chunk.size
        if need > self._raw.size:
            grown = np.empty(max(need, 2 * self._raw.size), dtype=np.float64)
            grown[: self._size] = self._raw[: self._size]
            self._raw = grown
        self._raw[self._size : need] = chunk
        self._size = need

    def _require_active(self) -> None:
        if self.verdict is not None:
            raise TestTerminatedError("test already terminated; verdict available")

    def _close_epoch(self) -> Verdict | None:
        plan = self.current_plan
        z = expected_k1_uniform(plan.n_k, plan.m_k) - self.k1_at_current_resolution()
        if z > plan.tau_k:
            self.verdict = Verdict("H1", plan.n_k, plan.k)
        elif self._epoch_idx == len(self._plans) - 1:
            self.verdict = Verdict("H0", plan.n_k, None)
        else:
            self._epoch_idx += 1
            return None
        return self.verdict


def abc_run(config: AbcConfig, stream: Iterable[float]) -> Verdict:
    """Drive a test over ``stream`` to termination; error out on truncation."""
    test = AbcTest(config)
    for sample in stream:
        verdict = test.step(sample)
        if verdict is not None:
            return verdict
    raise StreamExhaustedError(
        f"stream exhausted after {test.samples_seen} samples in epoch {test.epoch}",
        samples_seen=test.samples_seen,
        epoch=test.epoch,
    )


def abc_predict_exit_epoch(gamma: float, config: AbcConfig) -> int:
    """Predicted exit epoch for an alternative at continuous distance ``gamma``.

    Uses the conservative discretized-distance surrogate
    ``gamma - L / m_k`` and returns the smallest ``k`` with
    ``k >= 144 / (gamma - L / m_k)^2``, clamped into ``[1, kappa]``.
    Whenever ``m_k >= 2 L / gamma`` at the candidate epoch, the prediction
    is at most ``ceil(576 / gamma^2)``.
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if gamma >= 2.0:
        raise ValueError(f"gamma must be below 2, got {gamma}")
    kappa = config.kappa
    for k in range(1, kappa + 1):
        m_k = abc_schedule(config, k).m_k
        surrogate = gamma - config.lipschitz_bound / m_k
        if surrogate > 0.0 and k >= 144.0 / surrogate**2:
            return k
    return kappa
