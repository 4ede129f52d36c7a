"""Closed-loop measure propagation, constraint checking, and certificates.

The plant is the discrete single integrator with additive per-step noise,
closed with an affine state feedback u = gain * x + feedforward.  One step
maps a state measure through the affine pushforward x -> (1 + dt*gain)*x +
dt*feedforward and convolves with that step's noise measure.  The variance
therefore propagates with the squared factor (1 + dt*gain)**2, the form
implied by the linear map.

Verification walks the horizon forward, checking the tube constraint at
every pre-terminal step and the target constraint on the terminal measure.
The first violated constraint, in time order, is reported as a
:class:`Certificate`; the trace is completed regardless so that exports
and statistical validation always see the full horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .measures import Measure1D
from .regions import Interval, RandomSetSpec, RegionSet, mass_in_region
from .transport import avoid_residual, target_deficit

__all__ = [
    "SystemModel",
    "AffinePolicyStep",
    "AffinePolicy",
    "PropagationTrace",
    "Certificate",
    "CertificateKind",
    "propagate_step",
    "check_input_bound",
    "verify_policy",
    "DEFAULT_TOL",
]

# Default threshold for almost-sure checks on atomic measures; finite-sigma
# studies need looser values, so every checking entry point takes tol.
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class SystemModel:
    """Horizon, step size, per-step noise measures, and hard input bounds."""

    dt: float
    horizon: int
    noise_per_step: tuple[Measure1D, ...]
    input_min: float
    input_max: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        noise = tuple(self.noise_per_step)
        object.__setattr__(self, "noise_per_step", noise)
        if len(noise) != self.horizon:
            raise ValueError(
                f"noise_per_step has {len(noise)} entries, expected horizon {self.horizon}"
            )
        if not self.input_min < self.input_max:
            raise ValueError(
                f"input bounds out of order: [{self.input_min}, {self.input_max}]"
            )

    def input_region(self) -> RegionSet:
        lo_closed = math.isfinite(self.input_min)
        hi_closed = math.isfinite(self.input_max)
        return RegionSet((Interval(self.input_min, self.input_max, lo_closed, hi_closed),))


@dataclass(frozen=True)
class AffinePolicyStep:
    """u = gain * x + feedforward."""

    gain: float
    feedforward: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gain) and math.isfinite(self.feedforward)):
            raise ValueError("policy step coefficients must be finite")


@dataclass(frozen=True)
class AffinePolicy:
    """One affine feedback map per step over the horizon."""

    steps: tuple[AffinePolicyStep, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("policy needs at least one step")

    @classmethod
    def constant(cls, gain: float, feedforward: float, horizon: int) -> "AffinePolicy":
        return cls(tuple(AffinePolicyStep(gain, feedforward) for _ in range(horizon)))

    def __len__(self) -> int:
        return len(self.steps)


class CertificateKind(str, Enum):
    AVOID_VIOLATION = "avoid_violation"
    TARGET_DEFICIT = "target_deficit"
    INPUT_BOUND_VIOLATION = "input_bound_violation"


@dataclass(frozen=True)
class Certificate:
    """Witness that a constraint failed: where, which, and by how much.

    For avoid/target kinds the residual is the probability mass by which
    the almost-sure constraint misses.  Input-bound failures are decided
    structurally (a nonzero gain on any positive-stddev component can
    never keep the input inside a bounded interval almost surely); their
    residual reports the violating input mass, which may round to zero
    even though the structural rule fails.
    """

    step: int
    kind: CertificateKind
    residual: float
    detail: str

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind.value,
            "residual": self.residual,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class PropagationTrace:
    """State measures over the horizon plus the constraint residuals."""

    measures: tuple[Measure1D, ...]  # length horizon + 1
    avoid_residuals: tuple[float, ...]  # length horizon
    terminal_deficit: float


def propagate_step(
    m: Measure1D, step: AffinePolicyStep, sys: SystemModel, k: int
) -> Measure1D:
    """One closed-loop step: affine pushforward then noise convolution."""
    if not 0 <= k < sys.horizon:
        raise ValueError(f"step index {k} outside horizon {sys.horizon}")
    pushed = m.pushforward_affine(1.0 + sys.dt * step.gain, sys.dt * step.feedforward)
    return pushed.convolve(sys.noise_per_step[k])


def check_input_bound(
    m: Measure1D, step: AffinePolicyStep, sys: SystemModel, k: int = 0
) -> Optional[Certificate]:
    """None when u = gain*x + feedforward stays in bounds almost surely.

    Requires gain == 0 whenever any component has positive stddev; for
    atom-only measures, every atom must map into the closed input interval.
    """
    constrained = math.isfinite(sys.input_min) or math.isfinite(sys.input_max)
    bounds = sys.input_region()
    input_measure = m.pushforward_affine(step.gain, step.feedforward)
    outside = 1.0 - mass_in_region(input_measure, bounds)
    if constrained and step.gain != 0.0 and not m.is_atomic:
        return Certificate(
            step=k,
            kind=CertificateKind.INPUT_BOUND_VIOLATION,
            residual=outside,
            detail=(
                f"gain {step.gain} on a measure with positive-stddev components "
                "puts unbounded support on the input"
            ),
        )
    if outside > 0.0:
        return Certificate(
            step=k,
            kind=CertificateKind.INPUT_BOUND_VIOLATION,
            residual=outside,
            detail=(
                f"input mass {outside} falls outside "
                f"[{sys.input_min}, {sys.input_max}]"
            ),
        )
    return None


def verify_policy(
    init: Measure1D,
    policy: AffinePolicy,
    sys: SystemModel,
    avoid: RandomSetSpec,
    target: RandomSetSpec,
    tol: float = DEFAULT_TOL,
) -> tuple[PropagationTrace, Optional[Certificate]]:
    """Propagate under the policy and check every reach/avoid constraint.

    The tube constraint is checked at every step 0..N-1 and the target
    constraint on the terminal measure.  Returns the full trace and the
    first certificate in time order (avoid at k, then input bound at k,
    then target at N), or None when every residual is within tol.
    """
    if len(policy) != sys.horizon:
        raise ValueError(
            f"policy has {len(policy)} steps, expected horizon {sys.horizon}"
        )
    if tol < 0.0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    measures = [init]
    residuals: list[float] = []
    certificate: Optional[Certificate] = None
    state = init
    for k, step in enumerate(policy.steps):
        r = avoid_residual(state, avoid)
        residuals.append(r)
        if certificate is None and r > tol:
            certificate = Certificate(
                step=k,
                kind=CertificateKind.AVOID_VIOLATION,
                residual=r,
                detail=f"tube constraint misses {r} mass at step {k}",
            )
        if certificate is None:
            certificate = check_input_bound(state, step, sys, k)
        state = propagate_step(state, step, sys, k)
        measures.append(state)
    deficit = target_deficit(state, target)
    if certificate is None and deficit > tol:
        certificate = Certificate(
            step=sys.horizon,
            kind=CertificateKind.TARGET_DEFICIT,
            residual=deficit,
            detail=f"target constraint misses {deficit} mass at the terminal step",
        )
    trace = PropagationTrace(
        measures=tuple(measures),
        avoid_residuals=tuple(residuals),
        terminal_deficit=deficit,
    )
    return trace, certificate


# ---------- trace export ----------

CSV_FLOAT_FMT = ".17g"


def format_float(x: float) -> str:
    return format(float(x), CSV_FLOAT_FMT)


def trace_window(trace: PropagationTrace, pad: float = 0.5) -> tuple[float, float]:
    """Default export window covering every step's support."""
    lo = min(m.support_window()[0] for m in trace.measures) - pad
    hi = max(m.support_window()[1] for m in trace.measures) + pad
    return lo, hi


def write_components_csv(trace: PropagationTrace, path) -> None:
    lines = ["step,component_index,weight,mean,stddev"]
    for k, m in enumerate(trace.measures):
        for i, c in enumerate(m.components):
            lines.append(
                f"{k},{i},{format_float(c.weight)},"
                f"{format_float(c.mean)},{format_float(c.stddev)}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_cdf_grid_csv(
    trace: PropagationTrace,
    path,
    window: Optional[tuple[float, float]] = None,
    points: int = 1001,
) -> None:
    lo, hi = window if window is not None else trace_window(trace)
    if not lo < hi:
        raise ValueError(f"export window out of order: [{lo}, {hi}]")
    step_size = (hi - lo) / (points - 1)
    grid = [lo + i * step_size for i in range(points)]
    lines = ["step,grid_x,cdf_value"]
    for k, m in enumerate(trace.measures):
        for x in grid:
            lines.append(f"{k},{format_float(x)},{format_float(m.cdf(x))}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
