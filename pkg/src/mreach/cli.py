"""Command line orchestration: run scenarios, export reports and figure data.

Subcommands: propagate, verify, synthesize, feasible-set, simulate,
export-figures.  Exit codes: 0 when the run is feasible/valid, 2 when a
certificate is emitted, 1 on usage or parse errors.  All outputs are UTF-8;
CSVs are comma-delimited with a header row and 17-significant-digit floats.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Optional, Sequence

from .measures import Measure1D, MixtureComponent
from .montecarlo import estimate_reach_avoid, simulate, validate_trace
from .propagation import (
    Certificate,
    format_float,
    propagate_step,
    verify_policy,
    write_cdf_grid_csv,
    write_components_csv,
)
from .regions import RandomSetSpec
from .scenario import Scenario, ScenarioError, parse_scenario
from .synthesis import feasible_initial_set, synthesize_policy
from .transport import target_deficit

__all__ = ["main", "run", "export_figure_data"]

_GRID_POINTS = 1001
_UNBOUNDED_DEFICIT_GOAL = 1e-3


class _Parser(argparse.ArgumentParser):
    # usage errors must exit 1; code 2 is reserved for certificates
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _cert_exit(certificate: Optional[Certificate]) -> int:
    return 2 if certificate is not None else 0


def _verify_payload(scn: Scenario, trace, certificate) -> dict:
    return {
        "scenario": scn.name,
        "feasible": certificate is None,
        "tolerance": scn.synthesis.tol,
        "avoid_residuals": list(trace.avoid_residuals),
        "terminal_deficit": trace.terminal_deficit,
        "certificate": certificate.to_dict() if certificate else None,
    }


def _cmd_propagate(scn: Scenario, out_dir: str) -> int:
    trace, certificate = verify_policy(
        scn.require_measure(), scn.require_policy(), scn.system,
        scn.avoid, scn.target, tol=scn.synthesis.tol,
    )
    write_components_csv(trace, os.path.join(out_dir, "trace_components.csv"))
    write_cdf_grid_csv(
        trace, os.path.join(out_dir, "trace_cdf.csv"),
        window=scn.export.window, points=_GRID_POINTS,
    )
    return _cert_exit(certificate)


def _cmd_verify(scn: Scenario, out_dir: str) -> int:
    trace, certificate = verify_policy(
        scn.require_measure(), scn.require_policy(), scn.system,
        scn.avoid, scn.target, tol=scn.synthesis.tol,
    )
    _write_json(os.path.join(out_dir, "verify_report.json"),
                _verify_payload(scn, trace, certificate))
    return _cert_exit(certificate)


def _cmd_synthesize(scn: Scenario, out_dir: str) -> int:
    report = synthesize_policy(
        scn.require_measure(), scn.system, scn.avoid, scn.target, cfg=scn.synthesis
    )
    report.write_json(os.path.join(out_dir, "synthesis_report.json"))
    trace, verify_cert = verify_policy(
        scn.initial_measure, report.policy, scn.system,
        scn.avoid, scn.target, tol=scn.synthesis.tol,
    )
    _write_json(os.path.join(out_dir, "verify_report.json"),
                _verify_payload(scn, trace, verify_cert))
    write_components_csv(trace, os.path.join(out_dir, "trace_components.csv"))
    write_cdf_grid_csv(
        trace, os.path.join(out_dir, "trace_cdf.csv"),
        window=scn.export.window, points=_GRID_POINTS,
    )
    if report.certificate is not None or verify_cert is not None:
        return 2
    return 0


def _cmd_feasible_set(scn: Scenario, out_dir: str) -> int:
    grid = feasible_initial_set(
        scn.system, scn.avoid, scn.target, scn.require_grid(), cfg=scn.synthesis
    )
    grid.write_json(os.path.join(out_dir, "feasible_set.json"))
    grid.write_csv(os.path.join(out_dir, "feasible_set.csv"))
    return 0


def _cmd_simulate(scn: Scenario, out_dir: str) -> int:
    mc = scn.monte_carlo
    trace, _ = verify_policy(
        scn.require_measure(), scn.require_policy(), scn.system,
        scn.avoid, scn.target, tol=scn.synthesis.tol,
    )
    trajectories = simulate(
        scn.initial_measure, scn.policy, scn.system, mc.n, mc.seed
    )
    estimate = estimate_reach_avoid(
        trajectories, scn.avoid, scn.target, mc.seed,
        couple_random_sets=mc.couple_random_sets,
    )
    report = validate_trace(trace, scn.system, scn.policy, mc.n, mc.seed, mc.alpha)
    report = dataclasses.replace(report, reach_avoid_estimate=estimate)
    _write_json(os.path.join(out_dir, "simulation_report.json"), report.to_dict())
    return 0


# ---------- figure data export ----------


def _sigma_approx(m: Measure1D, sigma: float) -> Measure1D:
    """Replace every atom with its normal approximant of the given stddev."""
    return Measure1D(
        tuple(
            MixtureComponent(c.weight, c.mean, sigma if c.is_atom else c.stddev)
            for c in m.components
        )
    )


def _membership_curve(spec: RandomSetSpec, x: float) -> float:
    return math.fsum(w * float(r.contains(x)) for w, r in spec.branches)


def _write_curve_csv(path: str, rows: list[tuple[str, float, float]]) -> None:
    lines = ["curve,grid_x,value"]
    for curve, x, value in rows:
        lines.append(f"{curve},{format_float(x)},{format_float(value)}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _figure_window(scn: Scenario, measures: Sequence[Measure1D]) -> tuple[float, float]:
    if scn.export.window is not None:
        return scn.export.window
    los = [m.support_window()[0] for m in measures]
    his = [m.support_window()[1] for m in measures]
    pts = [*scn.avoid.finite_endpoints(), *scn.target.finite_endpoints()]
    lo = min([*los, *pts]) - 1.0
    hi = max([*his, *pts]) + 1.0
    return lo, hi


def _unbounded_feedforward(scn: Scenario, policy, base_v: float) -> Optional[float]:
    """Feedforward reaching a small terminal deficit, ignoring input bounds.

    Illustrates the infinite-authority limit: scan doublings away from the
    base feedforward in both directions, keep the first value driving the
    deficit at or below the goal.
    """
    init = scn.initial_measure
    sys_model = scn.system
    k = sys_model.horizon - 1

    def deficit(v: float) -> float:
        step = dataclasses.replace(policy.steps[k], feedforward=v)
        return target_deficit(propagate_step(init, step, sys_model, k), scn.target)

    for exponent in range(64):
        offset = 2.0 ** exponent
        for v in (base_v - offset, base_v + offset):
            if deficit(v) <= _UNBOUNDED_DEFICIT_GOAL:
                return v
    return None


def export_figure_data(scn: Scenario, sigmas: Sequence[float], out_dir: str) -> list[str]:
    """Write cdf-grid CSVs for the state measures, references, and post-
    control measures of a scenario, one file per curve.

    For every requested sigma the initial measure's atoms are replaced by
    normal approximants; the zero-sigma (exact atom) curves are always
    exported.  The reference file carries the branch-weighted membership
    curves of the target and of the tube (avoid complement).
    """
    init = scn.require_measure()
    if scn.policy is not None:
        policy = scn.policy
    else:
        policy = synthesize_policy(
            init, scn.system, scn.avoid, scn.target, cfg=scn.synthesis
        ).policy
    post_exact = propagate_step(init, policy.steps[0], scn.system, 0)
    approx = {s: _sigma_approx(init, s) for s in sigmas}
    post_approx = {
        s: propagate_step(m, policy.steps[0], scn.system, 0) for s, m in approx.items()
    }
    window_measures = [init, post_exact, *approx.values(), *post_approx.values()]
    lo, hi = _figure_window(scn, window_measures)
    step_size = (hi - lo) / (_GRID_POINTS - 1)
    grid = [lo + i * step_size for i in range(_GRID_POINTS)]

    written: list[str] = []

    def emit(name: str, curve: str, fn) -> None:
        path = os.path.join(out_dir, name)
        _write_curve_csv(path, [(curve, x, fn(x)) for x in grid])
        written.append(path)

    emit("figdata_initial_atom.csv", "initial", init.cdf)
    emit("figdata_post_atom.csv", "post", post_exact.cdf)
    for s in sigmas:
        tag = f"{s:g}"
        emit(f"figdata_initial_sigma_{tag}.csv", "initial", approx[s].cdf)
        emit(f"figdata_post_sigma_{tag}.csv", "post", post_approx[s].cdf)
    v_unb = _unbounded_feedforward(scn, policy, policy.steps[-1].feedforward)
    if v_unb is not None:
        k = scn.system.horizon - 1
        step = dataclasses.replace(policy.steps[k], feedforward=v_unb)
        post_unb = propagate_step(init, step, scn.system, k)
        emit("figdata_post_unbounded.csv", "post_unbounded", post_unb.cdf)

    ref_rows: list[tuple[str, float, float]] = []
    tube = RandomSetSpec(
        tuple((w, r.complement()) for w, r in scn.avoid.branches)
    )
    for x in grid:
        ref_rows.append(("target_measure", x, _membership_curve(scn.target, x)))
    for x in grid:
        ref_rows.append(("tube_measure", x, _membership_curve(tube, x)))
    ref_path = os.path.join(out_dir, "figdata_reference.csv")
    _write_curve_csv(ref_path, ref_rows)
    written.append(ref_path)
    return written


# ---------- entry point ----------

_COMMANDS = {
    "propagate": _cmd_propagate,
    "verify": _cmd_verify,
    "synthesize": _cmd_synthesize,
    "feasible-set": _cmd_feasible_set,
    "simulate": _cmd_simulate,
}


def run(
    command: str,
    scenario_path: str,
    out_dir: str,
    seed: Optional[int] = None,
    n: Optional[int] = None,
    tol: Optional[float] = None,
    sigmas: Optional[Sequence[float]] = None,
) -> int:
    scn = parse_scenario(scenario_path).with_overrides(seed=seed, n=n, tol=tol)
    os.makedirs(out_dir, exist_ok=True)
    if command == "export-figures":
        export_figure_data(scn, scn.export.sigmas if sigmas is None else sigmas, out_dir)
        return 0
    handler = _COMMANDS.get(command)
    if handler is None:
        raise ScenarioError(f"command: unknown command {command!r}")
    return handler(scn, out_dir)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _Parser(
        prog="mreach",
        description=(
            "Propagate 1-D state measures through affine-controlled stochastic "
            "dynamics, check almost-sure reach/avoid constraints, synthesize "
            "bounded feedback, and map feasible initial measures."
        ),
    )
    parser.add_argument(
        "command",
        choices=[*_COMMANDS.keys(), "export-figures"],
    )
    parser.add_argument("--scenario", required=True,
                        help="scenario file path or bundled scenario name")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override monte_carlo.seed")
    parser.add_argument("--n", type=int, default=None,
                        help="override monte_carlo.n")
    parser.add_argument("--tol", type=float, default=None,
                        help="override synthesis.tol")
    parser.add_argument("--sigmas", type=str, default=None,
                        help="comma-separated sigma list for export-figures")
    args = parser.parse_args(argv)
    sigmas = None
    if args.sigmas is not None:
        try:
            sigmas = [float(s) for s in args.sigmas.split(",") if s.strip() != ""]
        except ValueError:
            print(f"mreach: error: --sigmas: not a number list: {args.sigmas!r}",
                  file=sys.stderr)
            return 1
    try:
        return run(
            args.command, args.scenario, args.out,
            seed=args.seed, n=args.n, tol=args.tol, sigmas=sigmas,
        )
    except ScenarioError as exc:
        print(f"mreach: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mreach: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
