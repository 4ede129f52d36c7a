"""Reach-avoid analysis over 1-D probability measures.

Propagates Gaussian/atomic mixture state measures through affine-controlled
stochastic dynamics, checks almost-sure reach/avoid constraints, synthesizes
per-step feedback by scalar transport-objective minimization under hard
input bounds, emits certificates of infeasibility, and maps the feasible
set of initial measures.
"""

from .measures import (
    MAX_COMPONENTS,
    Measure1D,
    MixtureComponent,
    MixtureSizeError,
    SampleBatch,
    std_normal_cdf,
    std_normal_quantile,
)
from .montecarlo import (
    SimulationReport,
    dkw_bound,
    estimate_reach_avoid,
    ks_distance,
    simulate,
    validate_trace,
)
from .propagation import (
    AffinePolicy,
    AffinePolicyStep,
    Certificate,
    CertificateKind,
    PropagationTrace,
    SystemModel,
    check_input_bound,
    propagate_step,
    verify_policy,
)
from .regions import (
    Interval,
    RandomSetSpec,
    RegionSet,
    mass_in_region,
    random_set_mass,
)
from .scenario import (
    ExportConfig,
    MonteCarloConfig,
    Scenario,
    ScenarioError,
    bundled_scenario_names,
    bundled_scenario_path,
    parse_scenario,
    scenario_to_json,
)
from .synthesis import (
    FeasibilityAxes,
    FeasibilityCell,
    FeasibilityGrid,
    SynthesisConfig,
    SynthesisReport,
    feasible_initial_set,
    minimize_scalar_on_grid,
    synthesize_intermediate_step,
    synthesize_policy,
    synthesize_terminal_step,
)
from .transport import (
    W1Result,
    avoid_residual,
    target_deficit,
    target_gap_integral,
    w1,
    w1_empirical,
    w1_gaussian_closed_form,
)

__version__ = "0.1.0"
