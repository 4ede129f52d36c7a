"""Per-step affine feedback synthesis and feasible-initial-set mapping.

Each step solves a scalar minimization: the hard input bound forces the
gain to zero for any state measure with positive-stddev components, so for
each candidate gain the search reduces to a line search over the
feedforward.  A coarse grid localizes the basin, golden-section refines it,
and exact ties break toward the smallest control effort (smallest absolute
feedforward, then the smaller value) for determinism.

The terminal step minimizes the target deficit of the propagated measure.
Intermediate steps either match user-supplied waypoint measures in
1-Wasserstein distance or, absent waypoints, minimize the next state's
tube residual directly.

The feasible-set classifier sweeps a parametric family of initial
measures, synthesizing and then verifying each cell; every cell records
the residual that justified its label.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .measures import Measure1D
from .propagation import (
    AffinePolicy,
    AffinePolicyStep,
    Certificate,
    CertificateKind,
    DEFAULT_TOL,
    SystemModel,
    propagate_step,
    verify_policy,
)
from .regions import RandomSetSpec
from .transport import avoid_residual, target_deficit, w1

__all__ = [
    "SynthesisConfig",
    "SynthesisReport",
    "FeasibilityAxes",
    "FeasibilityCell",
    "FeasibilityGrid",
    "InputInfeasibleError",
    "minimize_scalar_on_grid",
    "synthesize_terminal_step",
    "synthesize_intermediate_step",
    "synthesize_policy",
    "feasible_initial_set",
]

_SATURATION_TOL = 1e-8
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SynthesisConfig:
    v_grid_points: int = 201
    refine_iters: int = 60
    gain_candidates: tuple[float, ...] = (0.0,)
    tol: float = DEFAULT_TOL

    def __post_init__(self) -> None:
        object.__setattr__(self, "gain_candidates", tuple(self.gain_candidates))
        if self.v_grid_points < 3:
            raise ValueError(f"v_grid_points must be >= 3, got {self.v_grid_points}")
        if self.refine_iters < 0:
            raise ValueError(f"refine_iters must be >= 0, got {self.refine_iters}")
        if self.tol < 0.0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if not self.gain_candidates:
            raise ValueError("gain_candidates must not be empty")


class InputInfeasibleError(ValueError):
    """No admissible (gain, feedforward) pair exists for the step."""

    def __init__(self, certificate: Certificate):
        super().__init__(certificate.detail)
        self.certificate = certificate


def minimize_scalar_on_grid(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    grid_points: int = 201,
    refine_iters: int = 60,
) -> tuple[float, float]:
    """Grid scan then golden-section refinement on [lo, hi].

    Exact ties on the grid break toward the smallest |x|, then the smaller
    x; refinement replaces the grid choice only on strict improvement, so
    the argmin is invariant under positive scaling of the objective.
    """
    if not lo <= hi:
        raise ValueError(f"search interval out of order: [{lo}, {hi}]")
    if lo == hi:
        return lo, f(lo)
    grid = np.linspace(lo, hi, grid_points)
    values = [f(float(v)) for v in grid]
    fmin = min(values)
    ties = [float(v) for v, fv in zip(grid, values) if fv == fmin]
    best_x = min(ties, key=lambda v: (abs(v), v))
    best_f = fmin
    idx = int(np.argmin(np.abs(grid - best_x)))
    a = float(grid[max(0, idx - 1)])
    b = float(grid[min(grid_points - 1, idx + 1)])
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    refined: list[tuple[float, float]] = [(c, fc), (d, fd)]
    for _ in range(refine_iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
            refined.append((c, fc))
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
            refined.append((d, fd))
    for x, fx in refined:
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _admissible_v_bounds(
    m: Measure1D, gain: float, sys: SystemModel
) -> Optional[tuple[float, float]]:
    """Feedforward interval keeping gain*x + v inside the input bounds a.s."""
    constrained = math.isfinite(sys.input_min) or math.isfinite(sys.input_max)
    if constrained and gain != 0.0 and not m.is_atomic:
        return None
    if gain == 0.0 or not constrained:
        return sys.input_min, sys.input_max
    scaled = [gain * p for p in m.atom_points()]
    v_lo = sys.input_min - min(scaled)
    v_hi = sys.input_max - max(scaled)
    if v_lo > v_hi:
        return None
    return v_lo, v_hi


def _search_window(
    bounds: tuple[float, float],
    m: Measure1D,
    sys: SystemModel,
    k: int,
    ref_points: Sequence[float],
) -> tuple[float, float]:
    """Replace infinite bound sides with a problem-scaled finite window."""
    lo, hi = bounds
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    m_lo, m_hi = m.support_window()
    n_lo, n_hi = sys.noise_per_step[k].support_window()
    sigma = max(c.stddev for c in m.components) + max(
        c.stddev for c in sys.noise_per_step[k].components
    )
    pad = 10.0 * sigma + 1.0
    pts = [p for p in ref_points if math.isfinite(p)]
    p_lo = min(pts) if pts else 0.0
    p_hi = max(pts) if pts else 0.0
    need_lo = (p_lo - pad - m_hi - n_hi) / sys.dt
    need_hi = (p_hi + pad - m_lo - n_lo) / sys.dt
    out_lo = lo if math.isfinite(lo) else min(need_lo, -1.0)
    out_hi = hi if math.isfinite(hi) else max(need_hi, 1.0)
    if out_lo >= out_hi:
        span = max(1.0, abs(need_hi - need_lo))
        if math.isfinite(lo):
            out_lo, out_hi = lo, lo + span
        else:
            out_lo, out_hi = hi - span, hi
    return out_lo, out_hi


def _empty_input_certificate(k: int, sys: SystemModel) -> Certificate:
    return Certificate(
        step=k,
        kind=CertificateKind.INPUT_BOUND_VIOLATION,
        residual=1.0,
        detail=(
            f"no gain candidate admits a feedforward inside "
            f"[{sys.input_min}, {sys.input_max}] at step {k}"
        ),
    )


@dataclass(frozen=True)
class _StepChoice:
    step: AffinePolicyStep
    objective: float
    saturated: bool


def _synthesize_step(
    m: Measure1D,
    sys: SystemModel,
    k: int,
    cfg: SynthesisConfig,
    objective_of: Callable[[AffinePolicyStep], float],
    ref_points: Sequence[float],
) -> _StepChoice:
    best: Optional[tuple[tuple, _StepChoice]] = None
    for gain in cfg.gain_candidates:
        bounds = _admissible_v_bounds(m, gain, sys)
        if bounds is None:
            continue
        lo, hi = _search_window(bounds, m, sys, k, ref_points)

        def f(v: float, _gain=gain) -> float:
            return objective_of(AffinePolicyStep(_gain, v))

        v, fv = minimize_scalar_on_grid(f, lo, hi, cfg.v_grid_points, cfg.refine_iters)
        # Land exactly on an input bound when refinement stops within 1e-8 of it;
        # bounds are admissible by construction.
        for bound in bounds:
            if math.isfinite(bound) and abs(v - bound) <= _SATURATION_TOL and v != bound:
                v, fv = bound, f(bound)
                break
        saturated = any(
            math.isfinite(bound) and abs(v - bound) <= _SATURATION_TOL for bound in bounds
        )
        key = (fv, abs(gain), gain, abs(v), v)
        choice = _StepChoice(AffinePolicyStep(gain, v), fv, saturated)
        if best is None or key < best[0]:
            best = (key, choice)
    if best is None:
        raise InputInfeasibleError(_empty_input_certificate(k, sys))
    return best[1]


def synthesize_terminal_step(
    m: Measure1D,
    sys: SystemModel,
    target: RandomSetSpec,
    cfg: SynthesisConfig = SynthesisConfig(),
) -> tuple[AffinePolicyStep, float]:
    """Minimize the terminal target deficit over admissible (gain, v)."""
    k = sys.horizon - 1

    def objective(step: AffinePolicyStep) -> float:
        return target_deficit(propagate_step(m, step, sys, k), target)

    choice = _synthesize_step(m, sys, k, cfg, objective, target.finite_endpoints())
    return choice.step, choice.objective


def synthesize_intermediate_step(
    m: Measure1D,
    desired_next: Measure1D,
    sys: SystemModel,
    k: int,
    cfg: SynthesisConfig = SynthesisConfig(),
) -> tuple[AffinePolicyStep, float]:
    """Minimize transport distance from the propagated measure to a waypoint."""

    def objective(step: AffinePolicyStep) -> float:
        return w1(propagate_step(m, step, sys, k), desired_next).distance

    ref = desired_next.support_window()
    choice = _synthesize_step(m, sys, k, cfg, objective, ref)
    return choice.step, choice.objective


@dataclass(frozen=True)
class SynthesisReport:
    policy: AffinePolicy
    per_step_objective: tuple[float, ...]
    certificate: Optional[Certificate]
    saturated: tuple[bool, ...]

    def to_dict(self) -> dict:
        return {
            "policy": [
                {"gain": s.gain, "feedforward": s.feedforward} for s in self.policy.steps
            ],
            "per_step_objective": list(self.per_step_objective),
            "saturated": list(self.saturated),
            "certificate": self.certificate.to_dict() if self.certificate else None,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def synthesize_policy(
    init: Measure1D,
    sys: SystemModel,
    avoid: RandomSetSpec,
    target: RandomSetSpec,
    waypoints: Optional[Sequence[Measure1D]] = None,
    cfg: SynthesisConfig = SynthesisConfig(),
) -> SynthesisReport:
    """Chain per-step synthesis forward over the horizon.

    Pre-terminal states (steps 0..N-2) are checked against the tube
    constraint before synthesizing; the terminal step minimizes the target
    deficit.  A certificate is emitted when a checked residual or an
    achieved per-step minimum exceeds cfg.tol: tube failures as
    avoid_violation, unmet waypoints and terminal deficits as
    target_deficit at the step they concern.  Synthesis continues past the
    first certificate so the returned policy always spans the horizon.
    """
    n = sys.horizon
    if waypoints is not None and len(waypoints) != n - 1:
        raise ValueError(
            f"expected {n - 1} waypoint measures for horizon {n}, got {len(waypoints)}"
        )
    state = init
    steps: list[AffinePolicyStep] = []
    objectives: list[float] = []
    saturated: list[bool] = []
    certificate: Optional[Certificate] = None
    for k in range(n):
        terminal = k == n - 1
        if not terminal:
            r = avoid_residual(state, avoid)
            if certificate is None and r > cfg.tol:
                certificate = Certificate(
                    step=k,
                    kind=CertificateKind.AVOID_VIOLATION,
                    residual=r,
                    detail=f"tube constraint misses {r} mass at step {k}",
                )
        try:
            if terminal:
                def objective(step: AffinePolicyStep) -> float:
                    return target_deficit(propagate_step(state, step, sys, k), target)

                choice = _synthesize_step(
                    state, sys, k, cfg, objective, target.finite_endpoints()
                )
            elif waypoints is not None:
                desired = waypoints[k]

                def objective(step: AffinePolicyStep) -> float:
                    return w1(propagate_step(state, step, sys, k), desired).distance

                choice = _synthesize_step(
                    state, sys, k, cfg, objective, desired.support_window()
                )
            else:
                def objective(step: AffinePolicyStep) -> float:
                    return avoid_residual(propagate_step(state, step, sys, k), avoid)

                choice = _synthesize_step(
                    state, sys, k, cfg, objective, avoid.finite_endpoints()
                )
        except InputInfeasibleError as exc:
            if certificate is None:
                certificate = exc.certificate
            fallback_v = min(max(0.0, sys.input_min), sys.input_max)
            if not math.isfinite(fallback_v):
                fallback_v = 0.0
            choice = _StepChoice(AffinePolicyStep(0.0, fallback_v), math.inf, False)
        steps.append(choice.step)
        objectives.append(choice.objective)
        saturated.append(choice.saturated)
        if certificate is None and choice.objective > cfg.tol:
            if terminal:
                certificate = Certificate(
                    step=n,
                    kind=CertificateKind.TARGET_DEFICIT,
                    residual=choice.objective,
                    detail=(
                        f"best admissible control leaves terminal deficit "
                        f"{choice.objective}"
                    ),
                )
            elif waypoints is not None:
                certificate = Certificate(
                    step=k + 1,
                    kind=CertificateKind.TARGET_DEFICIT,
                    residual=choice.objective,
                    detail=(
                        f"best admissible control misses the step-{k + 1} waypoint "
                        f"by {choice.objective} in transport distance"
                    ),
                )
            else:
                certificate = Certificate(
                    step=k + 1,
                    kind=CertificateKind.AVOID_VIOLATION,
                    residual=choice.objective,
                    detail=(
                        f"best admissible control leaves tube residual "
                        f"{choice.objective} at step {k + 1}"
                    ),
                )
        state = propagate_step(state, choice.step, sys, k)
    return SynthesisReport(
        policy=AffinePolicy(tuple(steps)),
        per_step_objective=tuple(objectives),
        certificate=certificate,
        saturated=tuple(saturated),
    )


# ---------- feasible initial set ----------

_FAMILIES = ("single_gaussian", "two_atom_mixture")


@dataclass(frozen=True)
class FeasibilityAxes:
    """Parameter grid for a family of candidate initial measures."""

    family: str
    means: tuple[float, ...]
    stddevs: tuple[float, ...] = (0.0,)
    second_means: tuple[float, ...] = ()
    first_weights: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for name in ("means", "stddevs", "second_means", "first_weights"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {_FAMILIES}")
        if not self.means:
            raise ValueError("means axis must not be empty")
        if self.family == "single_gaussian" and not self.stddevs:
            raise ValueError("stddevs axis must not be empty")
        if self.family == "two_atom_mixture":
            if not self.second_means:
                raise ValueError("two_atom_mixture needs a second_means axis")
            if not self.first_weights:
                raise ValueError("two_atom_mixture needs a first_weights axis")
            for w in self.first_weights:
                if not 0.0 < w < 1.0:
                    raise ValueError(f"first weight must lie in (0, 1), got {w}")

    def param_names(self) -> tuple[str, ...]:
        if self.family == "single_gaussian":
            return ("mean", "stddev")
        return ("mean1", "mean2", "weight1")

    def cell_params(self) -> list[dict[str, float]]:
        if self.family == "single_gaussian":
            combos = product(self.means, self.stddevs)
        else:
            combos = product(self.means, self.second_means, self.first_weights)
        names = self.param_names()
        return [dict(zip(names, combo)) for combo in combos]

    def build_measure(self, params: dict[str, float]) -> Measure1D:
        if self.family == "single_gaussian":
            return Measure1D.gaussian(params["mean"], params["stddev"])
        w = params["weight1"]
        return Measure1D.mixture(
            [(w, params["mean1"], 0.0), (1.0 - w, params["mean2"], 0.0)]
        )

    def to_dict(self) -> dict:
        out: dict = {"family": self.family, "means": list(self.means)}
        if self.family == "single_gaussian":
            out["stddevs"] = list(self.stddevs)
        else:
            out["second_means"] = list(self.second_means)
            out["first_weights"] = list(self.first_weights)
        return out


@dataclass(frozen=True)
class FeasibilityCell:
    params: dict[str, float]
    label: str  # "feasible" | "infeasible"
    residual: float

    def to_dict(self) -> dict:
        return {"params": dict(self.params), "label": self.label, "residual": self.residual}


@dataclass(frozen=True)
class FeasibilityGrid:
    axes: FeasibilityAxes
    cells: tuple[FeasibilityCell, ...]

    @property
    def family(self) -> str:
        return self.axes.family

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "axes": self.axes.to_dict(),
            "cells": [c.to_dict() for c in self.cells],
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path) -> None:
        from .propagation import format_float

        names = self.axes.param_names()
        lines = [",".join([*names, "label", "residual"])]
        for cell in self.cells:
            row = [format_float(cell.params[n]) for n in names]
            row.append(cell.label)
            row.append(format_float(cell.residual))
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def _classify_cell(
    params: dict[str, float],
    axes: FeasibilityAxes,
    sys: SystemModel,
    avoid: RandomSetSpec,
    target: RandomSetSpec,
    cfg: SynthesisConfig,
) -> FeasibilityCell:
    init = axes.build_measure(params)
    report = synthesize_policy(init, sys, avoid, target, cfg=cfg)
    trace, verify_cert = verify_policy(
        init, report.policy, sys, avoid, target, tol=cfg.tol
    )
    certificate = verify_cert or report.certificate
    if certificate is None:
        residual = max((*trace.avoid_residuals, trace.terminal_deficit))
        return FeasibilityCell(params=params, label="feasible", residual=residual)
    return FeasibilityCell(
        params=params, label="infeasible", residual=certificate.residual
    )


def feasible_initial_set(
    sys: SystemModel,
    avoid: RandomSetSpec,
    target: RandomSetSpec,
    axes: FeasibilityAxes,
    cfg: SynthesisConfig = SynthesisConfig(),
) -> FeasibilityGrid:
    """Classify every cell of the parameter grid by synthesize-then-verify.

    Cells are independent pure evaluations merged by index, so the result
    does not depend on visit order.  MREACH_THREADS caps worker threads.
    """
    cells = axes.cell_params()
    workers = int(os.environ.get("MREACH_THREADS", "1") or "1")
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda p: _classify_cell(p, axes, sys, avoid, target, cfg), cells
                )
            )
    else:
        results = [_classify_cell(p, axes, sys, avoid, target, cfg) for p in cells]
    return FeasibilityGrid(axes=axes, cells=tuple(results))
