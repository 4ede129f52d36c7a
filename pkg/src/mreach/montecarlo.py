"""Trajectory simulation, reach-avoid estimation, and trace validation.

Randomness is counter-based: every draw comes from a Philox generator
keyed by (seed, stream, step), so the value seen by trajectory i at step k
is a pure function of (seed, i, k) and parallel or reordered execution
cannot change results.  Reductions use numpy's pairwise summation, making
them insensitive to accumulation order at the 1e-15 level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .measures import Measure1D
from .propagation import AffinePolicy, PropagationTrace, SystemModel
from .regions import RandomSetSpec

__all__ = [
    "SimulationReport",
    "simulate",
    "estimate_reach_avoid",
    "ks_distance",
    "dkw_bound",
    "validate_trace",
]

_MASK56 = (1 << 56) - 1
_STREAM_INIT = 1
_STREAM_NOISE = 2
_STREAM_BRANCH_A = 3
_STREAM_BRANCH_B = 4

_MIN_VALIDATION_N = 10_000


def _philox_key(seed: int, stream: int, index: int = 0) -> int:
    """128-bit Philox key packing (seed | stream | index)."""
    if not 0 <= seed < (1 << 64):
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return (seed << 64) | (stream << 56) | (index & _MASK56)


@dataclass(frozen=True)
class SimulationReport:
    """Reach-avoid estimate and per-step cdf agreement for one run."""

    n: int
    reach_avoid_estimate: Optional[float]
    ks_per_step: tuple[float, ...]
    seed: int
    dkw_bound: Optional[float] = None
    ks_ok: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "reach_avoid_estimate": self.reach_avoid_estimate,
            "ks_per_step": list(self.ks_per_step),
            "dkw_bound": self.dkw_bound,
            "ks_ok": self.ks_ok,
        }


def simulate(
    init: Measure1D,
    policy: AffinePolicy,
    sys: SystemModel,
    n: int,
    seed: int,
) -> np.ndarray:
    """n closed-loop trajectories as an (n, horizon + 1) array.

    x[:, 0] draws from the initial measure; each step applies
    x_next = x + dt * (gain * x + feedforward) + w with w drawn from that
    step's noise measure.  Deterministic per seed.
    """
    if len(policy) != sys.horizon:
        raise ValueError(
            f"policy has {len(policy)} steps, expected horizon {sys.horizon}"
        )
    if n < 1:
        raise ValueError(f"trajectory count must be >= 1, got {n}")
    x = np.empty((n, sys.horizon + 1))
    x[:, 0] = init.sample(n, _philox_key(seed, _STREAM_INIT)).values
    for k, step in enumerate(policy.steps):
        w = sys.noise_per_step[k].sample(n, _philox_key(seed, _STREAM_NOISE, k)).values
        x[:, k + 1] = x[:, k] + sys.dt * (step.gain * x[:, k] + step.feedforward) + w
    return x


def _draw_branches(spec: RandomSetSpec, u: np.ndarray) -> np.ndarray:
    """Branch index per trajectory from shared uniforms (comonotone)."""
    cum = np.cumsum(spec.weights())
    cum[-1] = 1.0
    return np.searchsorted(cum, u, side="right")


def estimate_reach_avoid(
    trajectories: np.ndarray,
    avoid: RandomSetSpec,
    target: RandomSetSpec,
    seed: int,
    couple_random_sets: bool = True,
) -> float:
    """Fraction of trajectories in the target at the end and never in the
    avoid region before it, with random-set branches drawn per trajectory.

    With couple_random_sets (the default) one uniform per trajectory drives
    both the target and the avoid branch, realizing the same underlying
    set-valued draw; otherwise the two draws are independent.
    """
    x = np.asarray(trajectories, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("trajectories must be an (n, horizon + 1) array")
    n, cols = x.shape
    u_target = np.random.Generator(
        np.random.Philox(key=_philox_key(seed, _STREAM_BRANCH_A))
    ).random(n)
    if couple_random_sets:
        u_avoid = u_target
    else:
        u_avoid = np.random.Generator(
            np.random.Philox(key=_philox_key(seed, _STREAM_BRANCH_B))
        ).random(n)
    target_idx = _draw_branches(target, u_target)
    avoid_idx = _draw_branches(avoid, u_avoid)

    hit_target = np.zeros(n, dtype=bool)
    for j, region in enumerate(target.regions()):
        mask = target_idx == j
        if mask.any():
            hit_target[mask] = region.contains_array(x[mask, -1])
    hit_avoid = np.zeros(n, dtype=bool)
    for j, region in enumerate(avoid.regions()):
        mask = avoid_idx == j
        if mask.any():
            inside = region.contains_array(x[mask, : cols - 1])
            hit_avoid[mask] = inside.any(axis=1)
    return float(np.mean(hit_target & ~hit_avoid))


def ks_distance(samples: np.ndarray, measure: Measure1D) -> float:
    """sup_x |empirical cdf - cdf(measure)|, exact for mixed distributions.

    The lower-side comparison uses the left limit of the analytic cdf, so
    atoms shared by the samples and the measure do not inflate the
    statistic; an atom-only match gives exactly zero.
    """
    xs = np.sort(np.asarray(samples, dtype=float))
    n = xs.shape[0]
    right = measure.cdf(xs)
    left = right - measure.point_mass(xs)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - right)
    d_minus = np.max(left - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


def dkw_bound(n: int, alpha: float) -> float:
    """Two-sided empirical-cdf confidence radius at level 1 - alpha."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def validate_trace(
    trace: PropagationTrace,
    sys: SystemModel,
    policy: AffinePolicy,
    n: int,
    seed: int,
    alpha: float = 0.05,
) -> SimulationReport:
    """Compare analytic step measures against simulation by KS distance.

    Simulates from the trace's initial measure under the given policy and
    flags failure when any step's KS distance exceeds the DKW radius.
    The reach-avoid estimate is not computed here (no sets are given).
    """
    if n < _MIN_VALIDATION_N:
        raise ValueError(f"validation needs n >= {_MIN_VALIDATION_N}, got {n}")
    x = simulate(trace.measures[0], policy, sys, n, seed)
    ks = tuple(ks_distance(x[:, k], m) for k, m in enumerate(trace.measures))
    bound = dkw_bound(n, alpha)
    return SimulationReport(
        n=n,
        reach_avoid_estimate=None,
        ks_per_step=ks,
        seed=seed,
        dkw_bound=bound,
        ks_ok=all(d <= bound for d in ks),
    )
