from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import pytest

import oracles
from mreach import (
    AffinePolicyStep,
    CertificateKind,
    FeasibilityAxes,
    Interval,
    Measure1D,
    RandomSetSpec,
    RegionSet,
    SynthesisConfig,
    SystemModel,
    feasible_initial_set,
    minimize_scalar_on_grid,
    propagate_step,
    synthesize_intermediate_step,
    synthesize_policy,
    synthesize_terminal_step,
    target_deficit,
    verify_policy,
)

CFG = SynthesisConfig()


# ---------- terminal step ----------

def test_terminal_step_saturates_at_lower_bound(sys_noisy, target_halfline):
    step, objective = synthesize_terminal_step(
        Measure1D.atom(0.5), sys_noisy, target_halfline, CFG
    )
    assert step.gain == 0.0
    assert step.feedforward == pytest.approx(-0.1, abs=1e-8)
    assert objective == pytest.approx(1.0 - oracles.phi(0.6), abs=1e-9)


def test_terminal_step_far_left_atom_nearly_reaches(sys_noisy, target_halfline):
    step, objective = synthesize_terminal_step(
        Measure1D.atom(-2.0), sys_noisy, target_halfline, CFG
    )
    # deficit(v) = 1 - phi(3 - v) is smallest at the lower bound
    assert step.feedforward == pytest.approx(-0.1, abs=1e-8)
    assert objective == pytest.approx(1.0 - oracles.phi(3.1), abs=1e-9)
    assert objective <= 1.0 - oracles.phi(2.9) + 1e-12


def test_terminal_step_unbounded_inputs_drive_deficit_down(sys_unbounded, target_halfline):
    step, objective = synthesize_terminal_step(
        Measure1D.atom(0.5), sys_unbounded, target_halfline, CFG
    )
    assert step.feedforward <= -2.83  # phi(1 - 0.5 - v) >= 0.99 needs v <= -2.83
    assert objective < 0.01


def test_terminal_step_noise_free_reach_is_exact(target_halfline):
    sys_model = SystemModel(
        dt=1.0, horizon=1, noise_per_step=(Measure1D.atom(0.0),),
        input_min=-math.inf, input_max=math.inf,
    )
    step, objective = synthesize_terminal_step(
        Measure1D.atom(0.5), sys_model, target_halfline, CFG
    )
    assert objective == 0.0
    assert step.feedforward <= 0.5
    assert abs(step.feedforward) < 1e-9  # least-effort tie break


# ---------- intermediate step ----------

def test_intermediate_step_exact_match(sys_noisy):
    desired = Measure1D.gaussian(0.1, math.sqrt(2.0))
    step, objective = synthesize_intermediate_step(
        Measure1D.gaussian(0, 1), desired, sys_noisy, 0, CFG
    )
    assert step.feedforward == pytest.approx(0.1, abs=1e-8)
    assert objective < 1e-6


def test_intermediate_step_best_effort_shift(sys_noisy):
    desired = Measure1D.gaussian(1.0, math.sqrt(2.0))
    step, objective = synthesize_intermediate_step(
        Measure1D.gaussian(0, 1), desired, sys_noisy, 0, CFG
    )
    assert step.feedforward == pytest.approx(0.1, abs=1e-8)
    assert objective == pytest.approx(0.9, abs=1e-6)


def test_intermediate_step_deterministic_interior_minimum():
    sys_model = SystemModel(
        dt=1.0, horizon=1, noise_per_step=(Measure1D.atom(0.0),),
        input_min=-0.1, input_max=0.1,
    )
    desired = Measure1D.atom(0.05)
    step, objective = synthesize_intermediate_step(
        Measure1D.atom(0.0), desired, sys_model, 0, CFG
    )
    assert step.feedforward == pytest.approx(0.05, abs=1e-6)
    assert objective < 1e-6


# ---------- whole-horizon synthesis ----------

def test_policy_synthesis_single_atom_case(sys_noisy, avoid_band, target_halfline):
    report = synthesize_policy(
        Measure1D.atom(0.5), sys_noisy, avoid_band, target_halfline, cfg=CFG
    )
    assert report.policy.steps[0].feedforward == pytest.approx(-0.1, abs=1e-8)
    assert report.saturated == (True,)
    assert report.certificate is not None
    assert report.certificate.kind is CertificateKind.TARGET_DEFICIT
    assert report.certificate.residual == pytest.approx(1 - oracles.phi(0.6), abs=1e-9)


def test_policy_synthesis_mixture_case(sys_noisy, avoid_random, target_random, mixture_init):
    report = synthesize_policy(
        mixture_init, sys_noisy, avoid_random, target_random, cfg=CFG
    )
    expected = 1.0 - (
        0.2 * (0.2 * oracles.phi(-0.9) + 0.8 * oracles.phi(-1.4))
        + 0.8 * (0.2 * oracles.phi(-1.4) + 0.8 * oracles.phi(-1.9))
    )
    assert report.policy.steps[0].feedforward == pytest.approx(-0.1, abs=1e-8)
    assert report.saturated == (True,)
    assert report.certificate.kind is CertificateKind.TARGET_DEFICIT
    assert report.certificate.residual == pytest.approx(expected, abs=1e-9)


def test_policy_synthesis_feasible_run_has_no_certificate(
    sys_noise_free, avoid_band, target_halfline
):
    report = synthesize_policy(
        Measure1D.atom(-2.0), sys_noise_free, avoid_band, target_halfline, cfg=CFG
    )
    assert report.certificate is None
    assert report.per_step_objective == (0.0,)


def test_policy_synthesis_two_step_chains_forward(avoid_band, target_halfline):
    sys_model = SystemModel(
        dt=1.0, horizon=2,
        noise_per_step=(Measure1D.atom(0.0), Measure1D.atom(0.0)),
        input_min=-0.1, input_max=0.1,
    )
    report = synthesize_policy(
        Measure1D.atom(-2.0), sys_model, avoid_band, target_halfline, cfg=CFG
    )
    assert report.certificate is None
    assert len(report.policy.steps) == 2
    trace, cert = verify_policy(
        Measure1D.atom(-2.0), report.policy, sys_model, avoid_band, target_halfline
    )
    assert cert is None


def test_policy_synthesis_with_waypoints(avoid_band, target_halfline):
    sys_model = SystemModel(
        dt=1.0, horizon=2,
        noise_per_step=(Measure1D.gaussian(0, 1), Measure1D.gaussian(0, 1)),
        input_min=-0.1, input_max=0.1,
    )
    waypoint = Measure1D.gaussian(-1.9, 1.0)  # reachable from atom(-2) with v = 0.1
    report = synthesize_policy(
        Measure1D.atom(-2.0), sys_model, avoid_band, target_halfline,
        waypoints=[waypoint], cfg=CFG,
    )
    assert report.policy.steps[0].feedforward == pytest.approx(0.1, abs=1e-8)
    assert report.per_step_objective[0] < 1e-6


def test_policy_synthesis_unreachable_waypoint_reports_gap(avoid_band, target_halfline):
    sys_model = SystemModel(
        dt=1.0, horizon=2,
        noise_per_step=(Measure1D.gaussian(0, 1), Measure1D.gaussian(0, 1)),
        input_min=-0.1, input_max=0.1,
    )
    waypoint = Measure1D.gaussian(5.0, 1.0)
    report = synthesize_policy(
        Measure1D.atom(-2.0), sys_model, avoid_band, target_halfline,
        waypoints=[waypoint], cfg=CFG,
    )
    assert report.certificate is not None
    assert report.certificate.step == 1
    assert report.certificate.kind is CertificateKind.TARGET_DEFICIT
    assert report.certificate.residual > 1.0


def test_waypoint_count_validated(sys_noisy, avoid_band, target_halfline):
    with pytest.raises(ValueError):
        synthesize_policy(
            Measure1D.atom(0.5), sys_noisy, avoid_band, target_halfline,
            waypoints=[Measure1D.atom(0.0)], cfg=CFG,
        )


# ---------- search engine properties ----------

def test_argmin_invariant_under_positive_scaling(sys_noisy, target_halfline):
    m = Measure1D.atom(0.5)

    def deficit(v: float) -> float:
        return target_deficit(
            propagate_step(m, AffinePolicyStep(0.0, v), sys_noisy, 0), target_halfline
        )

    x1, f1 = minimize_scalar_on_grid(deficit, -0.1, 0.1)
    x7, f7 = minimize_scalar_on_grid(lambda v: 7.0 * deficit(v), -0.1, 0.1)
    assert x1 == x7
    assert f7 == pytest.approx(7.0 * f1, rel=1e-12)


def test_monotone_objective_returns_lower_bound(sys_noisy):
    # For a half-line target and zero gain the deficit falls as v falls, so
    # the search must sit on the lower input bound whenever it cannot reach tol.
    for c in (-1.0, 0.0, 1.0):
        target = RandomSetSpec.sure(RegionSet.of(Interval.at_most(c)))
        step, objective = synthesize_terminal_step(
            Measure1D.atom(0.5), sys_noisy, target, CFG
        )
        assert objective > CFG.tol
        assert step.feedforward == -0.1


def test_grid_refinement_converges(sys_noisy, avoid_random, target_random, mixture_init):
    coarse = synthesize_policy(
        mixture_init, sys_noisy, avoid_random, target_random, cfg=CFG
    )
    fine_cfg = dataclasses.replace(CFG, v_grid_points=2 * CFG.v_grid_points)
    fine = synthesize_policy(
        mixture_init, sys_noisy, avoid_random, target_random, cfg=fine_cfg
    )
    assert fine.per_step_objective[0] <= coarse.per_step_objective[0] + 1e-12
    assert abs(fine.per_step_objective[0] - coarse.per_step_objective[0]) < 1e-6


# ---------- feasibility grid ----------

def _noise_free_sys() -> SystemModel:
    return SystemModel(
        dt=1.0, horizon=1, noise_per_step=(Measure1D.atom(0.0),),
        input_min=-0.1, input_max=0.1,
    )


def test_noise_free_grid_matches_interval_oracle(avoid_band, target_halfline):
    axes = FeasibilityAxes(
        family="single_gaussian",
        means=tuple(-3.0 + 0.25 * i for i in range(25)),
        stddevs=(0.0,),
    )
    grid = feasible_initial_set(_noise_free_sys(), avoid_band, target_halfline, axes, CFG)
    for cell in grid.cells:
        expected = oracles.noisefree_va_feasible(cell.params["mean"])
        assert (cell.label == "feasible") == expected, cell


def test_noisy_grid_all_infeasible(sys_noisy, avoid_band, target_halfline):
    axes = FeasibilityAxes(
        family="single_gaussian", means=(-3.0, -1.0, 0.0, 1.0, 3.0), stddevs=(0.0,)
    )
    grid = feasible_initial_set(sys_noisy, avoid_band, target_halfline, axes, CFG)
    assert all(cell.label == "infeasible" for cell in grid.cells)
    inside = [c for c in grid.cells if -0.5 < c.params["mean"] < 0.5]
    assert all(c.residual == 1.0 for c in inside)  # avoid residual at step 0


def test_grid_deterministic_and_order_independent(avoid_band, target_halfline):
    axes = FeasibilityAxes(
        family="single_gaussian", means=(-1.0, 0.0, 0.6, 2.0), stddevs=(0.0, 0.1)
    )
    first = feasible_initial_set(_noise_free_sys(), avoid_band, target_halfline, axes, CFG)
    second = feasible_initial_set(_noise_free_sys(), avoid_band, target_halfline, axes, CFG)
    assert first == second


def test_two_atom_family_cells(avoid_band, target_halfline):
    axes = FeasibilityAxes(
        family="two_atom_mixture",
        means=(-2.0, 0.0),
        second_means=(-1.0,),
        first_weights=(0.2,),
    )
    grid = feasible_initial_set(_noise_free_sys(), avoid_band, target_halfline, axes, CFG)
    by_mean = {c.params["mean1"]: c for c in grid.cells}
    assert by_mean[-2.0].label == "feasible"
    assert by_mean[0.0].label == "infeasible"  # first atom sits inside the band
    assert set(grid.axes.param_names()) == {"mean1", "mean2", "weight1"}


def test_grid_serialization(tmp_path, avoid_band, target_halfline):
    axes = FeasibilityAxes(family="single_gaussian", means=(-1.0, 1.0), stddevs=(0.0,))
    grid = feasible_initial_set(_noise_free_sys(), avoid_band, target_halfline, axes, CFG)
    json_path = tmp_path / "grid.json"
    csv_path = tmp_path / "grid.csv"
    grid.write_json(json_path)
    grid.write_csv(csv_path)
    payload = json.loads(json_path.read_text())
    assert payload["family"] == "single_gaussian"
    assert len(payload["cells"]) == 2
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "mean,stddev,label,residual"
    assert len(lines) == 3


def test_report_serialization(tmp_path, sys_noisy, avoid_band, target_halfline):
    report = synthesize_policy(
        Measure1D.atom(0.5), sys_noisy, avoid_band, target_halfline, cfg=CFG
    )
    path = tmp_path / "report.json"
    report.write_json(path)
    payload = json.loads(path.read_text())
    assert payload["policy"][0]["feedforward"] == pytest.approx(-0.1, abs=1e-8)
    assert payload["saturated"] == [True]
    assert payload["certificate"]["kind"] == "target_deficit"
