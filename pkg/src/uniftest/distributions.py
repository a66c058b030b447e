"""Distribution families used by the uniformity tests.

Discrete side: validated pmfs with cached cdfs, the uniform pmf, and the
gamma-perturbed family whose odd/even symbols carry mass ``(1 +/- gamma)/m``.
Continuous side: piecewise-linear densities on ``[0, 1]`` with a verified
Lipschitz bound, exact discretization, exact l1 distance to uniform, and the
triangle-wave family of adversarial alternatives indexed by a vector of
``+/-1`` bits.

All constructions are pure and the resulting objects are immutable; they can
be shared freely across trials.  Sampling takes an explicit numpy
``Generator`` so replay is caller-controlled.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coincidence import l1_to_uniform

__all__ = [
    "DiscreteDistribution",
    "LipschitzDensity",
    "LowerBoundFamilySpec",
    "discretize",
    "from_fixture",
    "l1_continuous_to_uniform",
    "load_fixture",
    "lower_bound_spec",
    "make_lower_bound_density",
    "make_perturbed",
    "make_uniform",
    "sample_density",
    "sample_discrete",
    "save_fixture",
    "to_fixture",
]

_PMF_TOL = 1e-12
_INTEGRAL_TOL = 1e-10
_SLOPE_TOL = 1e-12


class DiscreteDistribution:
    """A pmf over ``m`` symbols with a cached cdf.

    Validates that the pmf is nonnegative and sums to one within 1e-12 and
    that the cached cdf is nondecreasing and ends at one within 1e-12.
    """

    __slots__ = ("pmf", "cdf")

    def __init__(self, pmf):
        arr = np.asarray(pmf, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("pmf must be a nonempty 1-d array")
        if arr.min() < 0.0:
            raise ValueError("pmf entries must be nonnegative")
        if abs(arr.sum() - 1.0) > _PMF_TOL:
            raise ValueError(f"pmf sums to {arr.sum()!r}, not 1 within {_PMF_TOL}")
        cdf = np.cumsum(arr)
        if np.any(np.diff(cdf) < -_PMF_TOL) or abs(cdf[-1] - 1.0) > _PMF_TOL:
            raise ValueError("cdf must be nondecreasing and end at 1")
        arr.flags.writeable = False
        cdf.flags.writeable = False
        self.pmf = arr
        self.cdf = cdf

    @property
    def m(self) -> int:
        return int(self.pmf.size)

    def __repr__(self) -> str:
        return f"DiscreteDistribution(m={self.m})"


def make_uniform(m: int) -> DiscreteDistribution:
    """Uniform pmf ``1/m`` on every symbol."""
    if m < 1:
        raise ValueError(f"support size must be >= 1, got {m}")
    return DiscreteDistribution(np.full(m, 1.0 / m))


def make_perturbed(m: int, gamma: float) -> DiscreteDistribution:
    """Perturbed family: alternating masses ``(1 + gamma)/m`` and ``(1 - gamma)/m``.

    The boosted symbols are the even internal indices (positions 1, 3, 5, ...
    in 1-based counting).  Its l1 distance to uniform is exactly ``gamma``.
    """
    if m < 1 or m % 2 != 0:
        raise ValueError(f"support size must be a positive even integer, got {m}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    pmf = np.empty(m)
    pmf[0::2] = (1.0 + gamma) / m
    pmf[1::2] = (1.0 - gamma) / m
    return DiscreteDistribution(pmf)


def sample_discrete(p: DiscreteDistribution, rng: np.random.Generator, size: int | None = None):
    """Draw symbols from ``p`` by inverse-cdf binary search.

    With ``size=None`` returns a single int, consuming one uniform variate;
    an integer ``size`` returns an int64 array drawn from the same stream.
    """
    u = rng.random() if size is None else rng.random(size)
    idx = np.minimum(np.searchsorted(p.cdf, u, side="right"), p.m - 1)
    return int(idx) if size is None else idx.astype(np.int64)


class LipschitzDensity:
    """Piecewise-linear probability density on ``[0, 1]``.

    The density interpolates ``values`` at ``breakpoints`` (strictly
    increasing, spanning exactly ``[0, 1]``).  Construction verifies the
    declared Lipschitz bound against every segment slope, nonnegativity, and
    that the exact (trapezoidal) integral is one.
    """

    __slots__ = ("breakpoints", "values", "lipschitz_bound", "_cum", "_slopes")

    def __init__(self, breakpoints, values, lipschitz_bound: float):
        bp = np.asarray(breakpoints, dtype=np.float64)
        vals = np.asarray(values, dtype=np.float64)
        if bp.ndim != 1 or bp.size < 2 or bp.shape != vals.shape:
            raise ValueError("need matching 1-d breakpoints/values with >= 2 points")
        if bp[0] != 0.0 or bp[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        widths = np.diff(bp)
        if np.any(widths <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.min() < 0.0:
            raise ValueError("density values must be nonnegative")
        if lipschitz_bound <= 0.0:
            raise ValueError("Lipschitz bound must be positive")
        slopes = np.diff(vals) / widths
        worst = float(np.abs(slopes).max())
        if worst > lipschitz_bound + _SLOPE_TOL:
            raise ValueError(
                f"segment slope {worst} exceeds Lipschitz bound {lipschitz_bound}"
            )
        masses = 0.5 * (vals[1:] + vals[:-1]) * widths
        total = float(masses.sum())
        if abs(total - 1.0) > _INTEGRAL_TOL:
            raise ValueError(f"density integrates to {total!r}, not 1")
        bp.flags.writeable = False
        vals.flags.writeable = False
        self.breakpoints = bp
        self.values = vals
        self.lipschitz_bound = float(lipschitz_bound)
        self._slopes = slopes
        cum = np.concatenate(([0.0], np.cumsum(masses)))
        self._cum = cum

    def pdf(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def cdf(self, x):
        """Exact cdf; quadratic within each linear segment."""
        arr = np.asarray(x, dtype=np.float64)
        idx = np.clip(
            np.searchsorted(self.breakpoints, arr, side="right") - 1,
            0,
            self.breakpoints.size - 2,
        )
        t = arr - self.breakpoints[idx]
        out = self._cum[idx] + self.values[idx] * t + 0.5 * self._slopes[idx] * t * t
        out = np.clip(out, 0.0, 1.0)
        return out if arr.shape else float(out)

    def quantile(self, u):
        """Inverse cdf.  Solves the per-segment quadratic for the exact quantile."""
        arr = np.asarray(u, dtype=np.float64)
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("quantile levels must lie in [0, 1]")
        nseg = self.breakpoints.size - 1
        idx = np.clip(np.searchsorted(self._cum, arr, side="right") - 1, 0, nseg - 1)
        rem = arr - self._cum[idx]
        f0 = self.values[idx]
        s = self._slopes[idx]
        # rationalized root of (s/2) t^2 + f0 t = rem; stable as s -> 0 and
        # exact linear solution when the segment is flat
        disc = np.sqrt(np.maximum(f0 * f0 + 2.0 * s * rem, 0.0))
        denom = f0 + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom > 0.0, 2.0 * rem / denom, 0.0)
        width = self.breakpoints[idx + 1] - self.breakpoints[idx]
        t = np.clip(t, 0.0, width)
        out = self.breakpoints[idx] + t
        return out if arr.shape else float(out)

    def __repr__(self) -> str:
        return (
            f"LipschitzDensity(segments={self.breakpoints.size - 1}, "
            f"L={self.lipschitz_bound:g})"
        )


def sample_density(f: LipschitzDensity, rng: np.random.Generator, size: int | None = None):
    """Inverse-cdf sampling from a piecewise-linear density; replayable by seed."""
    u = rng.random() if size is None else rng.random(size)
    return f.quantile(u)


def discretize(f: LipschitzDensity, m: int) -> DiscreteDistribution:
    """pmf whose entry ``i`` is the exact integral of ``f`` over bin ``i`` of ``m``.

    Bin edges and density breakpoints are merged so every elementary interval
    is linear, making the trapezoid rule exact.
    """
    if m < 1:
        raise ValueError(f"bin count must be >= 1, got {m}")
    edges = np.union1d(f.breakpoints, np.arange(m + 1) / m)
    vals = f.pdf(edges)
    masses = 0.5 * (vals[1:] + vals[:-1]) * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    idx = np.minimum((mids * m).astype(np.int64), m - 1)
    pmf = np.zeros(m)
    np.add.at(pmf, idx, masses)
    return DiscreteDistribution(pmf / pmf.sum())


def l1_continuous_to_uniform(f: LipschitzDensity) -> float:
    """Exact ``integral |f(x) - 1| dx`` by root-splitting each linear segment."""
    d0 = f.values[:-1] - 1.0
    d1 = f.values[1:] - 1.0
    w = np.diff(f.breakpoints)
    crossing = d0 * d1 < 0.0
    # same-sign segments: plain trapezoid of |d|; crossing segments split at
    # the root into two triangles
    plain = 0.5 * (np.abs(d0) + np.abs(d1)) * w
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(crossing, w * d0 / (d0 - d1), 0.0)
    split = 0.5 * (np.abs(d0) * t + np.abs(d1) * (w - t))
    return float(np.where(crossing, split, plain).sum())


@dataclass
class LowerBoundFamilySpec:
    """Parameters of one member of the adversarial triangle-wave family.

    ``delta_width`` is the width of one triangle bump; the unit interval
    holds ``1/delta_width`` bumps arranged in up/down pairs, with the
    orientation of pair ``i`` given by ``bits[i]``.  Every member is
    ``lipschitz_bound``-Lipschitz, integrates to one, and sits at l1 distance
    ``lipschitz_bound * delta_width / 4`` from the uniform density.
    """

    lipschitz_bound: float
    epsilon: float
    eta: float
    delta_width: float
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=np.int64)
        if bits.ndim != 1 or bits.size == 0 or not np.all(np.abs(bits) == 1):
            raise ValueError("bits must be a nonempty vector of +/-1")
        M = round(1.0 / self.delta_width)
        if M % 2 != 0 or bits.size != M // 2:
            raise ValueError(
                f"bits length {bits.size} does not match {M} bumps (need M/2)"
            )
        if self.lipschitz_bound * self.delta_width / 2.0 > 1.0 + 1e-12:
            raise ValueError("density would go negative: L * delta / 2 > 1")
        bits.flags.writeable = False
        self.bits = bits

    @property
    def num_bumps(self) -> int:
        return 2 * self.bits.size

    @property
    def distance(self) -> float:
        """Exact l1 distance of every family member to the uniform density."""
        return self.lipschitz_bound * self.delta_width / 4.0

    @property
    def achieved_epsilon(self) -> float:
        """Separation actually realized after rounding: ``distance / (1 + eta)``."""
        return self.distance / (1.0 + self.eta)


def lower_bound_spec(
    lipschitz_bound: float,
    epsilon: float,
    eta: float,
    bits=None,
    rng: np.random.Generator | None = None,
) -> LowerBoundFamilySpec:
    """Build a family spec with bump width ``4 (1 + eta) epsilon / L``.

    The bump count ``M = 1/delta`` must be an even integer, so the nominal
    ``M`` is rounded down to the nearest even integer and ``delta``
    recomputed.  Rounding down widens the bumps, which can only increase the
    realized distance, so ``achieved_epsilon >= epsilon`` always holds and is
    exposed for reporting.  ``bits`` may be given explicitly (length ``M/2``)
    or drawn uniformly from ``rng``.
    """
    if lipschitz_bound <= 0.0:
        raise ValueError("Lipschitz bound must be positive")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    delta_nominal = 4.0 * (1.0 + eta) * epsilon / lipschitz_bound
    if lipschitz_bound * delta_nominal / 2.0 > 1.0:
        raise ValueError(
            "density would go negative: need 2 (1 + eta) epsilon <= 1"
        )
    M = int(math.floor(1.0 / delta_nominal))
    M -= M % 2
    if M < 2:
        raise ValueError(
            f"bump width {delta_nominal:g} leaves no room for an up/down pair"
        )
    delta = 1.0 / M
    if lipschitz_bound * delta / 2.0 > 1.0 + 1e-12:
        raise ValueError("density would go negative after rounding the bump count")
    if bits is None:
        if rng is None:
            raise ValueError("provide bits or an rng to draw them")
        bits = rng.integers(0, 2, size=M // 2) * 2 - 1
    spec = LowerBoundFamilySpec(
        lipschitz_bound=float(lipschitz_bound),
        epsilon=float(epsilon),
        eta=float(eta),
        delta_width=delta,
        bits=np.asarray(bits, dtype=np.int64),
    )
    # rounding direction guarantees the family stays at least epsilon away
    assert spec.achieved_epsilon >= epsilon - 1e-15
    return spec


def make_lower_bound_density(spec: LowerBoundFamilySpec) -> LipschitzDensity:
    """Materialize a family member as a piecewise-linear density.

    Pair ``i`` of bumps covers ``[2 i delta, 2 (i + 1) delta]``: an up (or
    down, per ``bits[i]``) triangle followed by its mirror image.  Peak
    offsets are computed from the realized grid spacing so every slope stays
    within the declared Lipschitz bound to machine precision.
    """
    M = spec.num_bumps
    L = spec.lipschitz_bound
    grid = np.arange(2 * M + 1) / (2 * M)
    values = np.ones(2 * M + 1)
    signs = np.repeat(spec.bits, 2) * np.tile([1, -1], spec.bits.size)
    peak_idx = 1 + 2 * np.arange(M)
    half_widths = grid[peak_idx] - grid[peak_idx - 1]
    values[peak_idx] = 1.0 + signs * L * half_widths
    if values.min() < 0.0:
        raise ValueError("density would go negative: L * delta / 2 > 1")
    return LipschitzDensity(grid, values, L)


# ---------------------------------------------------------------------------
# JSON fixtures
#
# Schema: {"kind": "pmf", "pmf": [...]} for discrete distributions and
# {"kind": "density", "breakpoints": [...], "values": [...], "L": float} for
# piecewise-linear densities.
# ---------------------------------------------------------------------------


def to_fixture(obj) -> dict:
    """Serializable dict for a :class:`DiscreteDistribution` or :class:`LipschitzDensity`."""
    if isinstance(obj, DiscreteDistribution):
        return {"kind": "pmf", "pmf": obj.pmf.tolist()}
    if isinstance(obj, LipschitzDensity):
        return {
            "kind": "density",
            "breakpoints": obj.breakpoints.tolist(),
            "values": obj.values.tolist(),
            "L": obj.lipschitz_bound,
        }
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_fixture(data: dict):
    kind = data.get("kind")
    if kind == "pmf":
        return DiscreteDistribution(data["pmf"])
    if kind == "density":
        return LipschitzDensity(data["breakpoints"], data["values"], data["L"])
    raise ValueError(f"unknown fixture kind {kind!r}")


def save_fixture(obj, path) -> None:
    Path(path).write_text(json.dumps(to_fixture(obj), sort_keys=True, indent=2) + "\n")


def load_fixture(path):
    return from_fixture(json.loads(Path(path).read_text()))


def gamma_of(obj) -> float:
    """l1 distance to uniform for either distribution kind."""
    if isinstance(obj, DiscreteDistribution):
        return l1_to_uniform(obj)
    if isinstance(obj, LipschitzDensity):
        return l1_continuous_to_uniform(obj)
    raise TypeError(f"cannot measure {type(obj).__name__}")
