"""Target/avoid regions on the real line and their set-measures.

Regions are finite unions of disjoint intervals with explicit per-endpoint
open/closed flags.  Endpoint openness matters: a point mass sitting exactly
on the boundary of an open interval carries zero mass into it, which is the
behavior almost-sure feasibility checks rely on.

Random regions are finitely supported: a weighted list of region branches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .measures import Measure1D

__all__ = [
    "Interval",
    "RegionSet",
    "RandomSetSpec",
    "mass_in_region",
    "random_set_mass",
]

_WEIGHT_SUM_TOL = 1e-12

_INF = float("inf")


@dataclass(frozen=True)
class Interval:
    """One interval with open/closed endpoint flags; infinite ends are open."""

    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise ValueError(f"interval endpoints out of order: [{self.lo}, {self.hi}]")
        if math.isinf(self.lo) and self.lo_closed:
            raise ValueError("infinite lower endpoint must be open")
        if math.isinf(self.hi) and self.hi_closed:
            raise ValueError("infinite upper endpoint must be open")
        if self.lo == self.hi and not (self.lo_closed and self.hi_closed):
            raise ValueError("degenerate interval must be closed on both ends")

    # ---------- constructors ----------

    @classmethod
    def open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, False, False)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, True, True)

    @classmethod
    def at_most(cls, hi: float) -> "Interval":
        """(-inf, hi]"""
        return cls(-_INF, hi, False, True)

    @classmethod
    def at_least(cls, lo: float) -> "Interval":
        """[lo, inf)"""
        return cls(lo, _INF, True, False)

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x, True, True)

    def contains(self, x: float) -> bool:
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below


@dataclass(frozen=True)
class RegionSet:
    """Finite union of disjoint intervals, kept sorted and merged."""

    intervals: tuple[Interval, ...]

    def __post_init__(self) -> None:
        ivs = tuple(self.intervals)
        for a, b in zip(ivs, ivs[1:]):
            if b.lo < a.hi or (b.lo == a.hi and (a.hi_closed or b.lo_closed)):
                raise ValueError(
                    "region intervals must be sorted, disjoint, and non-touching; "
                    "use RegionSet.from_intervals to canonicalize"
                )
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def empty(cls) -> "RegionSet":
        return cls(())

    @classmethod
    def full_line(cls) -> "RegionSet":
        return cls((Interval.open(-_INF, _INF),))

    @classmethod
    def of(cls, *intervals: Interval) -> "RegionSet":
        return cls.from_intervals(intervals)

    @classmethod
    def from_intervals(cls, intervals: Iterable[Interval]) -> "RegionSet":
        """Union of the given intervals in canonical form.

        Overlapping intervals merge; touching endpoints merge when at least
        one side is closed (a shared open endpoint leaves a hole).
        """
        ivs = sorted(intervals, key=lambda iv: (iv.lo, not iv.lo_closed, iv.hi))
        merged: list[Interval] = []
        for iv in ivs:
            if not merged:
                merged.append(iv)
                continue
            cur = merged[-1]
            touches = iv.lo == cur.hi and (cur.hi_closed or iv.lo_closed)
            if iv.lo < cur.hi or touches:
                hi, hi_closed = cur.hi, cur.hi_closed
                if iv.hi > hi:
                    hi, hi_closed = iv.hi, iv.hi_closed
                elif iv.hi == hi:
                    hi_closed = hi_closed or iv.hi_closed
                merged[-1] = Interval(cur.lo, hi, cur.lo_closed, hi_closed)
            else:
                merged.append(iv)
        return cls(tuple(merged))

    def complement(self) -> "RegionSet":
        """Set complement over the real line with endpoint openness toggled."""
        out: list[Interval] = []
        gap_lo, gap_lo_closed = -_INF, False
        for iv in self.intervals:
            if gap_lo < iv.lo:
                out.append(Interval(gap_lo, iv.lo, gap_lo_closed, not iv.lo_closed))
            elif gap_lo == iv.lo and gap_lo_closed and not iv.lo_closed:
                out.append(Interval.point(gap_lo))
            gap_lo, gap_lo_closed = iv.hi, not iv.hi_closed
        if gap_lo < _INF:
            out.append(Interval(gap_lo, _INF, gap_lo_closed, False))
        return RegionSet(tuple(out))

    def contains(self, x: float) -> bool:
        return any(iv.contains(x) for iv in self.intervals)

    def contains_array(self, x: np.ndarray) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        out = np.zeros(arr.shape, dtype=bool)
        for iv in self.intervals:
            above = (arr > iv.lo) | (iv.lo_closed & (arr == iv.lo))
            below = (arr < iv.hi) | (iv.hi_closed & (arr == iv.hi))
            out |= above & below
        return out

    def finite_endpoints(self) -> tuple[float, ...]:
        pts = []
        for iv in self.intervals:
            if math.isfinite(iv.lo):
                pts.append(iv.lo)
            if math.isfinite(iv.hi):
                pts.append(iv.hi)
        return tuple(pts)

    @property
    def is_empty(self) -> bool:
        return not self.intervals


@dataclass(frozen=True)
class RandomSetSpec:
    """Finitely supported random region: weighted branches summing to one."""

    branches: tuple[tuple[float, RegionSet], ...]

    def __post_init__(self) -> None:
        branches = tuple((float(w), r) for w, r in self.branches)
        object.__setattr__(self, "branches", branches)
        if not branches:
            raise ValueError("random set needs at least one branch")
        for w, _ in branches:
            if not (math.isfinite(w) and w > 0.0):
                raise ValueError(f"branch weight must be positive, got {w}")
        total = math.fsum(w for w, _ in branches)
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"branch weights sum to {total!r}, expected 1")

    @classmethod
    def sure(cls, region: RegionSet) -> "RandomSetSpec":
        """A deterministic region as a one-branch random set."""
        return cls(((1.0, region),))

    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.branches])

    def regions(self) -> tuple[RegionSet, ...]:
        return tuple(r for _, r in self.branches)

    def finite_endpoints(self) -> tuple[float, ...]:
        pts: list[float] = []
        for _, r in self.branches:
            pts.extend(r.finite_endpoints())
        return tuple(pts)


def _interval_mass(m: Measure1D, iv: Interval) -> float:
    """Probability the measure assigns to one interval, boundary-exact."""
    hi_cdf = m.cdf(iv.hi) if math.isfinite(iv.hi) else 1.0  # hi is +inf
    lo_cdf = m.cdf(iv.lo) if math.isfinite(iv.lo) else 0.0  # lo is -inf
    p = hi_cdf - lo_cdf  # P(lo < X <= hi)
    if iv.lo_closed:
        p += m.point_mass(iv.lo)
    if not iv.hi_closed and math.isfinite(iv.hi):
        p -= m.point_mass(iv.hi)
    return p


def mass_in_region(m: Measure1D, region: RegionSet) -> float:
    """Probability mass the measure places in the region, in [0, 1].

    Atom mass on a boundary point counts exactly when the relevant endpoint
    is closed.
    """
    total = math.fsum(_interval_mass(m, iv) for iv in region.intervals)
    return min(1.0, max(0.0, total))


def random_set_mass(m: Measure1D, spec: RandomSetSpec) -> float:
    """Branch-weighted mass: sum of weight * mass_in_region over branches."""
    total = math.fsum(w * mass_in_region(m, r) for w, r in spec.branches)
    return min(1.0, max(0.0, total))
