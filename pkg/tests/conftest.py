from __future__ import annotations

import hypothesis
from hypothesis import strategies as st

import pytest

from mreach import (
    AffinePolicy,
    AffinePolicyStep,
    Interval,
    Measure1D,
    RandomSetSpec,
    RegionSet,
    SystemModel,
)

hypothesis.settings.register_profile(
    "suite", max_examples=40, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("suite")


@st.composite
def mixtures(draw, max_components: int = 4, allow_atoms: bool = True,
             mean_bound: float = 50.0, sigma_max: float = 10.0):
    n = draw(st.integers(min_value=1, max_value=max_components))
    raw = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    total = sum(raw)
    sigma = st.floats(0.01, sigma_max)
    if allow_atoms:
        sigma = st.one_of(st.just(0.0), sigma)
    parts = []
    for w in raw:
        mean = draw(st.floats(-mean_bound, mean_bound))
        parts.append((w / total, mean, draw(sigma)))
    return Measure1D.mixture(parts)


@st.composite
def region_sets(draw, bound: float = 20.0):
    k = draw(st.integers(min_value=0, max_value=3))
    if k == 0:
        return RegionSet.empty()
    pts = sorted(draw(st.lists(
        st.floats(-bound, bound), min_size=2 * k, max_size=2 * k, unique=True
    )))
    intervals = []
    for i in range(k):
        lo, hi = pts[2 * i], pts[2 * i + 1]
        intervals.append(Interval(lo, hi, draw(st.booleans()), draw(st.booleans())))
    return RegionSet.from_intervals(intervals)


# ---------- shared single-step setups ----------


@pytest.fixture
def sys_noisy() -> SystemModel:
    return SystemModel(
        dt=1.0, horizon=1,
        noise_per_step=(Measure1D.gaussian(0.0, 1.0),),
        input_min=-0.1, input_max=0.1,
    )


@pytest.fixture
def sys_noise_free() -> SystemModel:
    return SystemModel(
        dt=1.0, horizon=1,
        noise_per_step=(Measure1D.atom(0.0),),
        input_min=-0.1, input_max=0.1,
    )


@pytest.fixture
def sys_unbounded() -> SystemModel:
    return SystemModel(
        dt=1.0, horizon=1,
        noise_per_step=(Measure1D.gaussian(0.0, 1.0),),
        input_min=float("-inf"), input_max=float("inf"),
    )


@pytest.fixture
def avoid_band() -> RandomSetSpec:
    return RandomSetSpec.sure(RegionSet.of(Interval.open(-0.5, 0.5)))


@pytest.fixture
def target_halfline() -> RandomSetSpec:
    return RandomSetSpec.sure(RegionSet.of(Interval.at_most(1.0)))


@pytest.fixture
def avoid_random() -> RandomSetSpec:
    return RandomSetSpec((
        (0.2, RegionSet.of(Interval.open(-0.5, 0.5))),
        (0.8, RegionSet.of(Interval.open(-1.0, 1.0))),
    ))


@pytest.fixture
def target_random() -> RandomSetSpec:
    return RandomSetSpec((
        (0.2, RegionSet.of(Interval.at_most(-0.5))),
        (0.8, RegionSet.of(Interval.at_most(-1.0))),
    ))


@pytest.fixture
def mixture_init() -> Measure1D:
    return Measure1D.mixture([(0.2, 0.5, 0.0), (0.8, 1.0, 0.0)])


@pytest.fixture
def saturated_policy() -> AffinePolicy:
    return AffinePolicy((AffinePolicyStep(0.0, -0.1),))
