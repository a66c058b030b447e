"""Fixed-sample-size coincidence test, the non-adaptive baseline.

Draws ``n = ceil(C_n sqrt(m) / epsilon^2)`` samples up front and makes a
single comparison of the singleton deficit ``D = c_u(n) - K1`` against
``C_t * n * epsilon^2``.  Both constants are tuned by grid search; the
sample count is a pure function of ``(m, epsilon, C_n)`` and never depends
on the data, which is exactly what the sequential tests improve on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .coincidence import CoincidenceState, expected_k1_uniform
from .errors import StreamExhaustedError
from .sequential import Verdict

__all__ = ["BatchConfig", "batch_test"]


@dataclass(frozen=True)
class BatchConfig:
    m: int
    epsilon: float
    sample_multiplier: float
    threshold_multiplier: float

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"support size must be >= 1, got {self.m}")
        if not 0.0 < self.epsilon < 2.0:
            raise ValueError(f"epsilon must lie in (0, 2), got {self.epsilon}")
        if self.sample_multiplier <= 0.0 or self.threshold_multiplier <= 0.0:
            raise ValueError("multipliers must be positive")

    @property
    def sample_size(self) -> int:
        return math.ceil(self.sample_multiplier * math.sqrt(self.m) / self.epsilon**2)

    @property
    def threshold(self) -> float:
        return self.threshold_multiplier * (self.sample_size * self.epsilon**2)


def batch_test(config: BatchConfig, stream: Iterable[int]) -> Verdict:
    """Consume exactly ``sample_size`` draws and decide in one shot."""
    n = config.sample_size
    state = CoincidenceState(config.m)
    for symbol in stream:
        state.insert(symbol)
        if state.total == n:
            break
    if state.total < n:
        raise StreamExhaustedError(
            f"stream exhausted after {state.total} of {n} samples",
            samples_seen=state.total,
            epoch=1,
        )
    deficit = expected_k1_uniform(n, config.m) - state.k1
    if deficit > config.threshold:
        return Verdict("H1", n, 1)
    return Verdict("H0", n, None)
