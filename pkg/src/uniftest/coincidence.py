"""Singleton-count (coincidence) statistic and uniform binning primitives.

Every test in this package works off the same quantity: the number of
support symbols that appear exactly once in a sample set, written ``K1``
throughout.  A sample set drawn from a non-uniform distribution collides
with itself more often than a uniform one, so its ``K1`` falls below the
uniform expectation.  This module owns that statistic: streaming
maintenance, batch recounts, exact expectations, and the bin-index
convention used to map real-valued samples in ``[0, 1]`` onto a finite
support.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "CoincidenceState",
    "bin_indices",
    "bin_of",
    "expected_k1",
    "expected_k1_uniform",
    "k1_of",
    "l1_to_uniform",
]

# floor(x * m) in float64 is only trustworthy while the product is exactly
# representable; beyond 2**52 bins adjacent samples could alias.
_MAX_BINNABLE = 2**52


def expected_k1_uniform(n: int, m: int) -> float:
    """Exact expected singleton count of ``n`` i.i.d. uniform draws on ``m`` symbols.

    Closed form ``n * (1 - 1/m)**(n - 1)``.  The power is evaluated in log
    space so large ``n`` does not underflow.
    """
    if m < 1:
        raise ValueError(f"support size must be >= 1, got {m}")
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    if n <= 1:
        return float(n)
    if m == 1:
        return 0.0
    return float(n) * math.exp((n - 1) * math.log1p(-1.0 / m))


def expected_k1(p, n: int) -> float:
    """Exact expected singleton count of ``n`` i.i.d. draws from pmf ``p``.

    Computes ``sum_j n * p_j * (1 - p_j)**(n - 1)``.  Agrees with
    :func:`expected_k1_uniform` when ``p`` is uniform.  ``p`` may be a pmf
    array or any object with a ``pmf`` attribute.
    """
    pmf = np.asarray(getattr(p, "pmf", p), dtype=np.float64)
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    if n == 0:
        return 0.0
    if n == 1:
        return float(pmf.sum())
    with np.errstate(divide="ignore"):
        log_keep = np.log1p(-pmf)  # -inf where p_j == 1; exp maps it back to 0
    return float(np.sum(n * pmf * np.exp((n - 1) * log_keep)))


def k1_of(samples: Iterable[int], m: int) -> int:
    """Singleton count of a finished sample set, by full histogram scan."""
    if m < 1:
        raise ValueError(f"support size must be >= 1, got {m}")
    counts = Counter()
    for s in samples:
        s = int(s)
        if not 0 <= s < m:
            raise ValueError(f"symbol {s} outside support [0, {m})")
        counts[s] += 1
    return sum(1 for c in counts.values() if c == 1)


def bin_of(x: float, m: int) -> int:
    """Bin index of ``x`` under ``m`` equal-width bins on ``[0, 1]``.

    Bins are half-open ``[i/m, (i+1)/m)``; ``x == 1`` is clamped into the
    last bin so no mass is lost at the right edge.
    """
    if m < 1:
        raise ValueError(f"bin count must be >= 1, got {m}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"sample {x!r} outside [0, 1]")
    return min(int(x * m), m - 1)


def bin_indices(x: np.ndarray, m: int) -> np.ndarray:
    """Vectorized :func:`bin_of` over an array of samples in ``[0, 1]``."""
    if m < 1:
        raise ValueError(f"bin count must be >= 1, got {m}")
    if m > _MAX_BINNABLE:
        raise ValueError(f"bin count {m} exceeds float64 binning resolution")
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("samples outside [0, 1]")
    idx = np.floor(arr * float(m)).astype(np.int64)
    return np.minimum(idx, m - 1)


def l1_to_uniform(p) -> float:
    """l1 distance ``sum_j |p_j - 1/m|`` from pmf ``p`` to the uniform pmf."""
    pmf = np.asarray(getattr(p, "pmf", p), dtype=np.float64)
    return float(np.abs(pmf - 1.0 / pmf.size).sum())


@dataclass
class CoincidenceState:
    """Streaming occurrence counts with an incrementally maintained ``K1``.

    Counts are kept sparse (dict keyed by symbol): the tests operate in the
    sparse regime where the number of distinct symbols seen is far below the
    support size.  Single-writer value; not safe for concurrent mutation.
    """

    support_size: int
    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0
    k1: int = 0

    def __post_init__(self) -> None:
        if self.support_size < 1:
            raise ValueError(f"support size must be >= 1, got {self.support_size}")

    def insert(self, symbol: int) -> None:
        """Add one occurrence; K1 gains a singleton or loses a fresh pair."""
        symbol = int(symbol)
        if not 0 <= symbol < self.support_size:
            raise ValueError(f"symbol {symbol} outside support [0, {self.support_size})")
        new = self.counts.get(symbol, 0) + 1
        self.counts[symbol] = new
        self.total += 1
        if new == 1:
            self.k1 += 1
        elif new == 2:
            self.k1 -= 1

    def insert_many(self, symbols) -> None:
        """Bulk insert; equivalent to repeated :meth:`insert` over ``symbols``."""
        arr = np.asarray(symbols)
        if arr.size == 0:
            return
        if arr.min() < 0 or arr.max() >= self.support_size:
            raise ValueError(f"symbol outside support [0, {self.support_size})")
        uniq, cnt = np.unique(arr, return_counts=True)
        counts = self.counts
        k1 = self.k1
        for s, c in zip(uniq.tolist(), cnt.tolist()):
            old = counts.get(s, 0)
            new = old + c
            counts[s] = new
            # singleton status before/after is all that matters for K1
            k1 += (new == 1) - (old == 1)
        self.k1 = k1
        self.total += int(arr.size)

    def recount(self) -> int:
        """K1 by full scan of the stored counts; cross-checks the increments."""
        return sum(1 for c in self.counts.values() if c == 1)

    @classmethod
    def from_samples(cls, samples, m: int) -> "CoincidenceState":
        state = cls(m)
        state.insert_many(np.asarray(list(samples), dtype=np.int64))
        return state
