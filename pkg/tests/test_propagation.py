from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from mreach import (
    AffinePolicy,
    AffinePolicyStep,
    CertificateKind,
    Measure1D,
    MixtureSizeError,
    SystemModel,
    check_input_bound,
    ks_distance,
    propagate_step,
    simulate,
    verify_policy,
)
from mreach.propagation import trace_window, write_cdf_grid_csv, write_components_csv


# ---------- propagate_step ----------

def test_step_from_atom_gives_shifted_gaussian(sys_noisy):
    out = propagate_step(Measure1D.atom(0.5), AffinePolicyStep(0.0, -0.1), sys_noisy, 0)
    c = out.components[0]
    assert (c.mean, c.stddev) == (0.4, 1.0)


def test_step_pure_diffusion(sys_noisy):
    out = propagate_step(Measure1D.gaussian(0, 1), AffinePolicyStep(0.0, 0.0), sys_noisy, 0)
    assert out.components[0].stddev == pytest.approx(math.sqrt(2), abs=1e-15)


def test_step_mixture_componentwise(sys_noisy, mixture_init):
    out = propagate_step(mixture_init, AffinePolicyStep(0.0, -0.1), sys_noisy, 0)
    assert [(c.weight, c.mean, c.stddev) for c in out.components] == [
        (0.2, 0.4, 1.0),
        (0.8, 0.9, 1.0),
    ]


def test_step_index_validated(sys_noisy):
    with pytest.raises(ValueError):
        propagate_step(Measure1D.atom(0.0), AffinePolicyStep(0.0, 0.0), sys_noisy, 1)


def test_step_component_cap_propagates():
    noise = Measure1D.mixture([(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)])
    sys_model = SystemModel(
        dt=1.0, horizon=7, noise_per_step=(noise,) * 7, input_min=-1, input_max=1
    )
    state = Measure1D.atom(0.0)
    with pytest.raises(MixtureSizeError):
        for k in range(7):
            state = propagate_step(state, AffinePolicyStep(0.0, 0.0), sys_model, k)


@given(
    mean=st.floats(-10, 10), stddev=st.floats(0.0, 5.0),
    gain=st.floats(-2, 2), v=st.floats(-3, 3), dt=st.floats(0.1, 2.0),
)
def test_mean_and_variance_recursion(mean, stddev, gain, v, dt):
    noise = Measure1D.gaussian(0.25, 0.5)
    sys_model = SystemModel(
        dt=dt, horizon=1, noise_per_step=(noise,),
        input_min=-math.inf, input_max=math.inf,
    )
    out = propagate_step(
        Measure1D.gaussian(mean, stddev), AffinePolicyStep(gain, v), sys_model, 0
    )
    c = out.components[0]
    factor = 1.0 + dt * gain
    assert c.mean == pytest.approx(factor * mean + dt * v + 0.25, abs=1e-12)
    assert c.stddev**2 == pytest.approx(factor**2 * stddev**2 + 0.25, abs=1e-10)


# ---------- input bounds ----------

def test_gain_on_gaussian_violates_bounds(sys_noisy):
    cert = check_input_bound(Measure1D.gaussian(0, 1), AffinePolicyStep(0.01, 0.0), sys_noisy)
    assert cert is not None
    assert cert.kind is CertificateKind.INPUT_BOUND_VIOLATION


def test_atom_feedforward_at_bound_passes(sys_noisy):
    assert check_input_bound(Measure1D.atom(0.5), AffinePolicyStep(0.0, 0.1), sys_noisy) is None


def test_atom_feedforward_beyond_bound_fails(sys_noisy):
    cert = check_input_bound(Measure1D.atom(0.5), AffinePolicyStep(0.0, 0.11), sys_noisy)
    assert cert is not None
    assert cert.residual == 1.0


def test_atom_gain_inside_bounds_passes(sys_noisy):
    m = Measure1D.mixture([(0.5, 0.5, 0.0), (0.5, 1.0, 0.0)])
    assert check_input_bound(m, AffinePolicyStep(0.1, 0.0), sys_noisy) is None


def test_unbounded_inputs_admit_gaussian_gain(sys_unbounded):
    assert check_input_bound(
        Measure1D.gaussian(0, 1), AffinePolicyStep(0.5, 0.0), sys_unbounded
    ) is None


# ---------- verify_policy ----------

def test_verify_saturated_policy_reports_terminal_deficit(
    sys_noisy, avoid_band, target_halfline, saturated_policy
):
    trace, cert = verify_policy(
        Measure1D.atom(0.5), saturated_policy, sys_noisy, avoid_band, target_halfline
    )
    assert trace.avoid_residuals == (0.0,)
    assert cert is not None
    assert cert.kind is CertificateKind.TARGET_DEFICIT
    assert cert.step == 1
    assert cert.residual == pytest.approx(1.0 - oracles.phi(0.6), abs=1e-12)


def test_verify_atom_inside_avoid_fails_at_step_zero(
    sys_noisy, avoid_band, target_halfline, saturated_policy
):
    trace, cert = verify_policy(
        Measure1D.atom(0.0), saturated_policy, sys_noisy, avoid_band, target_halfline
    )
    assert cert is not None
    assert (cert.kind, cert.step, cert.residual) == (
        CertificateKind.AVOID_VIOLATION, 0, 1.0
    )
    assert len(trace.measures) == 2  # trace completed despite the certificate


def test_verify_deficit_vanishes_with_unbounded_effort(
    sys_unbounded, avoid_band, target_halfline
):
    deficits = []
    for v in np.linspace(-0.1, -8.0, 25):
        policy = AffinePolicy((AffinePolicyStep(0.0, float(v)),))
        trace, _ = verify_policy(
            Measure1D.atom(0.5), policy, sys_unbounded, avoid_band, target_halfline
        )
        deficits.append(trace.terminal_deficit)
    assert all(b < a for a, b in zip(deficits, deficits[1:]))
    assert deficits[-1] < 1e-6


def test_verify_horizon_mismatch(sys_noisy, avoid_band, target_halfline):
    two_step = AffinePolicy.constant(0.0, 0.0, 2)
    with pytest.raises(ValueError):
        verify_policy(
            Measure1D.atom(0.5), two_step, sys_noisy, avoid_band, target_halfline
        )


def test_verify_checks_input_bounds(sys_noisy, avoid_band, target_halfline):
    policy = AffinePolicy((AffinePolicyStep(0.0, 0.2),))
    _, cert = verify_policy(
        Measure1D.atom(0.5), policy, sys_noisy, avoid_band, target_halfline
    )
    assert cert is not None
    assert cert.kind is CertificateKind.INPUT_BOUND_VIOLATION


def test_trace_weights_stay_normalized(
    sys_noisy, avoid_random, target_random, mixture_init, saturated_policy
):
    trace, _ = verify_policy(
        mixture_init, saturated_policy, sys_noisy, avoid_random, target_random
    )
    for m in trace.measures:
        assert abs(math.fsum(c.weight for c in m.components) - 1.0) <= 1e-12


def test_zero_tolerance_accepts_exact_atom_runs(
    sys_noise_free, avoid_band, target_halfline, saturated_policy
):
    trace, cert = verify_policy(
        Measure1D.atom(-2.0), saturated_policy, sys_noise_free,
        avoid_band, target_halfline, tol=0.0,
    )
    assert cert is None
    assert trace.avoid_residuals == (0.0,)
    assert trace.terminal_deficit == 0.0


def test_analytic_trace_matches_simulation_ks(
    sys_noisy, avoid_band, target_halfline, saturated_policy
):
    trace, _ = verify_policy(
        Measure1D.atom(0.5), saturated_policy, sys_noisy, avoid_band, target_halfline
    )
    n = 100_000
    x = simulate(Measure1D.atom(0.5), saturated_policy, sys_noisy, n, seed=31)
    for k, m in enumerate(trace.measures):
        assert ks_distance(x[:, k], m) < 1.63 / math.sqrt(n)


# ---------- trace export ----------

def test_trace_csv_exports(tmp_path, sys_noisy, avoid_band, target_halfline, saturated_policy):
    trace, _ = verify_policy(
        Measure1D.atom(0.5), saturated_policy, sys_noisy, avoid_band, target_halfline
    )
    comp_path = tmp_path / "components.csv"
    grid_path = tmp_path / "cdf.csv"
    write_components_csv(trace, comp_path)
    write_cdf_grid_csv(trace, grid_path, window=(-5.0, 5.0))
    comp_lines = comp_path.read_text().splitlines()
    assert comp_lines[0] == "step,component_index,weight,mean,stddev"
    assert comp_lines[1] == "0,0,1,0.5,0"
    grid_lines = grid_path.read_text().splitlines()
    assert grid_lines[0] == "step,grid_x,cdf_value"
    assert len(grid_lines) == 1 + 2 * 1001
    lo, hi = trace_window(trace)
    assert lo < 0.5 < hi


def test_cdf_export_rejects_bad_window(tmp_path, sys_noisy, avoid_band, target_halfline, saturated_policy):
    trace, _ = verify_policy(
        Measure1D.atom(0.5), saturated_policy, sys_noisy, avoid_band, target_halfline
    )
    with pytest.raises(ValueError):
        write_cdf_grid_csv(trace, tmp_path / "x.csv", window=(2.0, -2.0))
