"""One-dimensional probability measures as Gaussian/atomic mixtures.

A measure is a finite weighted mixture of components, each either a
Gaussian (stddev > 0) or a point mass (stddev == 0, an "atom").  Atoms are
exact: they carry their full weight at a single point, which is what makes
almost-sure constraint checks against open/closed interval boundaries
well defined.  Finite-stddev Gaussians centered at the same points are
available as display approximants (see :meth:`Measure1D.dirac_approx`).

All values are immutable after construction and every operation is pure,
so concurrent use needs no coordination.  Sampling takes an explicit seed
per call (counter-based generator), so there is no shared RNG state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "MAX_COMPONENTS",
    "MixtureComponent",
    "Measure1D",
    "MixtureSizeError",
    "SampleBatch",
    "std_normal_cdf",
    "std_normal_quantile",
]

# Hard cap on mixture size after convolution.  Exceeding it raises instead
# of pruning: dropping components would silently corrupt almost-sure checks.
MAX_COMPONENTS = 64

_WEIGHT_SUM_TOL = 1e-12
# Bisection runs tighter than the documented 1e-10 guarantee so that
# cdf(quantile(p)) stays within 1e-9 of p even for stddevs down to 1e-2.
_QUANTILE_XTOL = 1e-12


class MixtureSizeError(ValueError):
    """An operation would exceed the mixture component cap."""


def std_normal_cdf(x: float) -> float:
    """Standard normal cdf, absolute error below 1e-14."""
    return float(ndtr(x))


def std_normal_quantile(p: float) -> float:
    """Standard normal quantile, absolute error below 1e-9 on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must lie in (0, 1), got {p}")
    return float(ndtri(p))


@dataclass(frozen=True)
class MixtureComponent:
    """A weighted Gaussian (stddev > 0) or point mass (stddev == 0)."""

    weight: float
    mean: float
    stddev: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.weight) and self.weight > 0.0):
            raise ValueError(f"component weight must be positive, got {self.weight}")
        if self.weight > 1.0 + _WEIGHT_SUM_TOL:
            raise ValueError(f"component weight must be at most 1, got {self.weight}")
        if not math.isfinite(self.mean):
            raise ValueError(f"component mean must be finite, got {self.mean}")
        if not (math.isfinite(self.stddev) and self.stddev >= 0.0):
            raise ValueError(f"component stddev must be >= 0, got {self.stddev}")

    @property
    def is_atom(self) -> bool:
        return self.stddev == 0.0


@dataclass(frozen=True)
class SampleBatch:
    """Draws from a measure, reproducible from (measure, seed, count)."""

    values: np.ndarray
    seed: int
    count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (self.count,):
            raise ValueError(
                f"sample batch holds {self.values.shape[0]} values, expected {self.count}"
            )


@dataclass(frozen=True)
class Measure1D:
    """Finite mixture of Gaussian and atomic components summing to mass one.

    The cdf is right-continuous and nondecreasing with limits 0 and 1.
    Construction validates component weights sum to 1 within 1e-12.
    """

    components: tuple[MixtureComponent, ...]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("measure needs at least one component")
        total = math.fsum(c.weight for c in comps)
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"component weights sum to {total!r}, expected 1")

    # ---------- constructors ----------

    @classmethod
    def gaussian(cls, mean: float, stddev: float) -> "Measure1D":
        return cls((MixtureComponent(1.0, float(mean), float(stddev)),))

    @classmethod
    def atom(cls, point: float) -> "Measure1D":
        return cls.dirac_approx(point, 0.0)

    @classmethod
    def dirac_approx(cls, point: float, stddev: float) -> "Measure1D":
        """Point mass at ``point`` when stddev == 0, else its normal approximant.

        The zero-stddev form is the exact limit used by the constraint
        checks; positive stddevs exist for figure reproduction only.
        """
        return cls((MixtureComponent(1.0, float(point), float(stddev)),))

    @classmethod
    def mixture(cls, parts: Iterable[tuple[float, float, float]]) -> "Measure1D":
        """Build from (weight, mean, stddev) triples."""
        return cls(tuple(MixtureComponent(w, m, s) for w, m, s in parts))

    # ---------- queries ----------

    def cdf(self, x):
        """P(X <= x); right-continuous, accepts scalars or arrays."""
        arr = np.asarray(x, dtype=float)
        out = np.zeros_like(arr)
        for c in self.components:
            if c.is_atom:
                out += c.weight * (arr >= c.mean)
            else:
                out += c.weight * ndtr((arr - c.mean) / c.stddev)
        if np.ndim(x) == 0:
            return float(out)
        return out

    def point_mass(self, x) -> float:
        """P(X == x): the total weight of atoms exactly at x."""
        arr = np.asarray(x, dtype=float)
        out = np.zeros_like(arr)
        for c in self.components:
            if c.is_atom:
                out += c.weight * (arr == c.mean)
        if np.ndim(x) == 0:
            return float(out)
        return out

    def quantile(self, p: float) -> float:
        """inf{x : cdf(x) >= p}, located by bisection.

        Guaranteed within 1e-10 of the true quantile and cdf(result) >= p.
        """
        if not 0.0 < p < 1.0:
            raise ValueError(f"quantile argument must lie in (0, 1), got {p}")
        lo, hi = self.support_window(tail=10.0)
        lo -= 1.0
        hi += 1.0
        width = max(hi - lo, 1.0)
        while self.cdf(lo) >= p:
            lo -= width
            width *= 2.0
        while self.cdf(hi) < p:
            hi += width
            width *= 2.0
        # Invariant: cdf(lo) < p <= cdf(hi).
        while hi - lo > _QUANTILE_XTOL:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.cdf(mid) >= p:
                hi = mid
            else:
                lo = mid
        return hi

    def mean(self) -> float:
        return math.fsum(c.weight * c.mean for c in self.components)

    def support_window(self, tail: float = 8.0) -> tuple[float, float]:
        """Interval carrying all but Gaussian tail mass beyond ``tail`` sigmas."""
        lo = min(c.mean - tail * c.stddev for c in self.components)
        hi = max(c.mean + tail * c.stddev for c in self.components)
        return lo, hi

    def atom_points(self) -> tuple[float, ...]:
        return tuple(c.mean for c in self.components if c.is_atom)

    @property
    def is_atomic(self) -> bool:
        """True when every component is a point mass."""
        return all(c.is_atom for c in self.components)

    # ---------- transforms ----------

    def pushforward_affine(self, a: float, b: float) -> "Measure1D":
        """Distribution of a*X + b; maps (w, m, s) to (w, a*m + b, |a|*s)."""
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError("affine coefficients must be finite")
        return Measure1D(
            tuple(
                MixtureComponent(c.weight, a * c.mean + b, abs(a) * c.stddev)
                for c in self.components
            )
        )

    def convolve(self, noise: "Measure1D") -> "Measure1D":
        """Distribution of X + W for independent W; the pairwise product mixture."""
        n_out = len(self.components) * len(noise.components)
        if n_out > MAX_COMPONENTS:
            raise MixtureSizeError(
                f"convolution would produce {n_out} components, cap is {MAX_COMPONENTS}"
            )
        comps = []
        for c in self.components:
            for d in noise.components:
                comps.append(
                    MixtureComponent(
                        c.weight * d.weight,
                        c.mean + d.mean,
                        math.hypot(c.stddev, d.stddev),
                    )
                )
        return Measure1D(tuple(comps))

    # ---------- sampling ----------

    def sample(self, count: int, seed: int) -> SampleBatch:
        """``count`` i.i.d. draws, deterministic per seed.

        Component selection then a Gaussian draw per sample; atoms return
        their mean exactly.  The generator is counter-based (Philox), keyed
        by the seed, so independent calls never share state.
        """
        if count < 1:
            raise ValueError(f"sample count must be >= 1, got {count}")
        if seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {seed}")
        rng = np.random.Generator(np.random.Philox(key=seed))
        weights = np.array([c.weight for c in self.components])
        means = np.array([c.mean for c in self.components])
        stddevs = np.array([c.stddev for c in self.components])
        idx = rng.choice(len(weights), size=count, p=weights / weights.sum())
        z = rng.standard_normal(count)
        values = means[idx] + stddevs[idx] * z
        return SampleBatch(values=values, seed=seed, count=count)


def values_of(batch: SampleBatch | Sequence[float] | np.ndarray) -> np.ndarray:
    """Accept a SampleBatch or a bare array of draws."""
    if isinstance(batch, SampleBatch):
        return batch.values
    return np.asarray(batch, dtype=float)
