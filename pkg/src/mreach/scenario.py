"""Declarative scenario files: parsing, validation, canonical serialization.

A scenario bundles the system model, the initial measure (or a feasibility
grid over initial measures), an optional policy, the avoid/target random
sets, synthesis settings, and Monte Carlo settings.  The JSON schema is
versioned; serialization emits fields in a fixed canonical order so that
serialize -> parse -> serialize is byte-identical.

Intervals serialize as {"lo": number|"-inf", "hi": number|"inf",
"lo_closed": bool, "hi_closed": bool}.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace
from importlib import resources
from typing import Any, Optional

from .measures import Measure1D, MixtureComponent
from .propagation import AffinePolicy, AffinePolicyStep, SystemModel
from .regions import Interval, RandomSetSpec, RegionSet
from .synthesis import FeasibilityAxes, SynthesisConfig

__all__ = [
    "MonteCarloConfig",
    "ExportConfig",
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "parse_scenario_text",
    "scenario_to_json",
    "bundled_scenario_path",
    "bundled_scenario_names",
    "axis_values",
]

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario validation failure naming the offending field."""


@dataclass(frozen=True)
class MonteCarloConfig:
    n: int = 100_000
    seed: int = 2024
    alpha: float = 0.05
    couple_random_sets: bool = True

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ScenarioError(f"monte_carlo.n: must be >= 1, got {self.n}")
        if self.seed < 0:
            raise ScenarioError(f"monte_carlo.seed: must be >= 0, got {self.seed}")
        if not 0.0 < self.alpha < 1.0:
            raise ScenarioError(f"monte_carlo.alpha: must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class ExportConfig:
    window: Optional[tuple[float, float]] = None
    sigmas: tuple[float, ...] = (0.2, 0.05, 0.005)


@dataclass(frozen=True)
class Scenario:
    name: str
    system: SystemModel
    initial_measure: Optional[Measure1D]
    initial_grid: Optional[FeasibilityAxes]
    policy: Optional[AffinePolicy]
    avoid: RandomSetSpec
    target: RandomSetSpec
    synthesis: SynthesisConfig
    monte_carlo: MonteCarloConfig
    export: ExportConfig

    def __post_init__(self) -> None:
        if (self.initial_measure is None) == (self.initial_grid is None):
            raise ScenarioError(
                "initial: exactly one of initial.measure and initial.grid is required"
            )
        if self.initial_grid is not None and self.policy is not None:
            raise ScenarioError(
                "policy: a grid-mode scenario must not carry a policy"
            )

    def require_measure(self) -> Measure1D:
        if self.initial_measure is None:
            raise ScenarioError(
                "initial.measure: this command needs a concrete initial measure, "
                "not a feasibility grid"
            )
        return self.initial_measure

    def require_grid(self) -> FeasibilityAxes:
        if self.initial_grid is None:
            raise ScenarioError(
                "initial.grid: the feasible-set command needs grid axes"
            )
        return self.initial_grid

    def require_policy(self) -> AffinePolicy:
        if self.policy is None:
            raise ScenarioError("policy: this command needs a policy in the scenario")
        return self.policy

    def with_overrides(
        self,
        seed: Optional[int] = None,
        n: Optional[int] = None,
        tol: Optional[float] = None,
    ) -> "Scenario":
        mc = self.monte_carlo
        if seed is not None or n is not None:
            mc = replace(
                mc,
                seed=mc.seed if seed is None else seed,
                n=mc.n if n is None else n,
            )
        synth = self.synthesis if tol is None else replace(self.synthesis, tol=tol)
        return replace(self, monte_carlo=mc, synthesis=synth)


# ---------- parsing helpers ----------


def _ctx(path: str, key: str | int) -> str:
    return f"{path}.{key}" if isinstance(key, str) else f"{path}[{key}]"


def _get(d: dict, key: str, path: str) -> Any:
    if not isinstance(d, dict):
        raise ScenarioError(f"{path}: expected an object")
    if key not in d:
        raise ScenarioError(f"{_ctx(path, key)}: missing required field")
    return d[key]


def _number(value: Any, path: str, allow_inf: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ScenarioError(f"{path}: expected a number, got {value!r}")
    if isinstance(value, str):
        if allow_inf and value in ("inf", "+inf"):
            return math.inf
        if allow_inf and value == "-inf":
            return -math.inf
        raise ScenarioError(f"{path}: expected a number, got {value!r}")
    out = float(value)
    if not allow_inf and not math.isfinite(out):
        raise ScenarioError(f"{path}: expected a finite number, got {value!r}")
    return out


def _integer(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}: expected an integer, got {value!r}")
    return value


def _boolean(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ScenarioError(f"{path}: expected a boolean, got {value!r}")
    return value


def _array(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ScenarioError(f"{path}: expected an array, got {value!r}")
    return value


def _parse_measure(obj: Any, path: str) -> Measure1D:
    comps_raw = _array(_get(obj, "components", path), _ctx(path, "components"))
    comps = []
    for i, c in enumerate(comps_raw):
        cpath = _ctx(_ctx(path, "components"), i)
        comps.append(
            MixtureComponent(
                weight=_number(_get(c, "weight", cpath), _ctx(cpath, "weight")),
                mean=_number(_get(c, "mean", cpath), _ctx(cpath, "mean")),
                stddev=_number(_get(c, "stddev", cpath), _ctx(cpath, "stddev")),
            )
        )
    try:
        return Measure1D(tuple(comps))
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_region(obj: Any, path: str) -> RegionSet:
    intervals = []
    for i, iv in enumerate(_array(obj, path)):
        ipath = _ctx(path, i)
        try:
            intervals.append(
                Interval(
                    lo=_number(_get(iv, "lo", ipath), _ctx(ipath, "lo"), allow_inf=True),
                    hi=_number(_get(iv, "hi", ipath), _ctx(ipath, "hi"), allow_inf=True),
                    lo_closed=_boolean(_get(iv, "lo_closed", ipath), _ctx(ipath, "lo_closed")),
                    hi_closed=_boolean(_get(iv, "hi_closed", ipath), _ctx(ipath, "hi_closed")),
                )
            )
        except ValueError as exc:
            raise ScenarioError(f"{ipath}: {exc}") from exc
    try:
        return RegionSet.from_intervals(intervals)
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_random_set(obj: Any, path: str) -> RandomSetSpec:
    branches = []
    for i, b in enumerate(_array(_get(obj, "branches", path), _ctx(path, "branches"))):
        bpath = _ctx(_ctx(path, "branches"), i)
        weight = _number(_get(b, "weight", bpath), _ctx(bpath, "weight"))
        region = _parse_region(_get(b, "region", bpath), _ctx(bpath, "region"))
        branches.append((weight, region))
    try:
        return RandomSetSpec(tuple(branches))
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def axis_values(obj: Any, path: str) -> tuple[float, ...]:
    """An axis is either an explicit list or {"start", "stop", "step"}."""
    if isinstance(obj, list):
        return tuple(_number(v, _ctx(path, i)) for i, v in enumerate(obj))
    if isinstance(obj, dict):
        start = _number(_get(obj, "start", path), _ctx(path, "start"))
        stop = _number(_get(obj, "stop", path), _ctx(path, "stop"))
        step = _number(_get(obj, "step", path), _ctx(path, "step"))
        if step <= 0:
            raise ScenarioError(f"{_ctx(path, 'step')}: must be positive, got {step}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise ScenarioError(f"{path}: empty range")
        return tuple(start + i * step for i in range(count))
    raise ScenarioError(f"{path}: expected an array or a start/stop/step object")


def _parse_grid(obj: Any, path: str) -> FeasibilityAxes:
    family = _get(obj, "family", path)
    try:
        if family == "single_gaussian":
            return FeasibilityAxes(
                family=family,
                means=axis_values(_get(obj, "means", path), _ctx(path, "means")),
                stddevs=axis_values(obj.get("stddevs", [0.0]), _ctx(path, "stddevs")),
            )
        if family == "two_atom_mixture":
            return FeasibilityAxes(
                family=family,
                means=axis_values(_get(obj, "means", path), _ctx(path, "means")),
                second_means=axis_values(
                    _get(obj, "second_means", path), _ctx(path, "second_means")
                ),
                first_weights=axis_values(
                    _get(obj, "first_weights", path), _ctx(path, "first_weights")
                ),
            )
        raise ScenarioError(f"{_ctx(path, 'family')}: unknown family {family!r}")
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_system(obj: Any, path: str) -> SystemModel:
    horizon = _integer(_get(obj, "horizon", path), _ctx(path, "horizon"))
    noise_raw = _array(_get(obj, "noise_per_step", path), _ctx(path, "noise_per_step"))
    noise = tuple(
        _parse_measure(nm, _ctx(_ctx(path, "noise_per_step"), i))
        for i, nm in enumerate(noise_raw)
    )
    try:
        return SystemModel(
            dt=_number(_get(obj, "dt", path), _ctx(path, "dt")),
            horizon=horizon,
            noise_per_step=noise,
            input_min=_number(_get(obj, "input_min", path), _ctx(path, "input_min"), allow_inf=True),
            input_max=_number(_get(obj, "input_max", path), _ctx(path, "input_max"), allow_inf=True),
        )
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_policy(obj: Any, path: str) -> AffinePolicy:
    steps = []
    for i, s in enumerate(_array(obj, path)):
        spath = _ctx(path, i)
        steps.append(
            AffinePolicyStep(
                gain=_number(_get(s, "gain", spath), _ctx(spath, "gain")),
                feedforward=_number(
                    _get(s, "feedforward", spath), _ctx(spath, "feedforward")
                ),
            )
        )
    return AffinePolicy(tuple(steps))


def parse_scenario_text(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"scenario is not valid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: expected a top-level JSON object")
    schema = _integer(_get(raw, "schema", "scenario"), "scenario.schema")
    if schema != SCHEMA_VERSION:
        raise ScenarioError(
            f"scenario.schema: unsupported version {schema}, expected {SCHEMA_VERSION}"
        )
    name = _get(raw, "name", "scenario")
    if not isinstance(name, str):
        raise ScenarioError(f"scenario.name: expected a string, got {name!r}")
    system = _parse_system(_get(raw, "system", "scenario"), "system")

    initial_raw = _get(raw, "initial", "scenario")
    if not isinstance(initial_raw, dict):
        raise ScenarioError("initial: expected an object")
    measure = None
    grid = None
    if "measure" in initial_raw:
        measure = _parse_measure(initial_raw["measure"], "initial.measure")
    if "grid" in initial_raw:
        grid = _parse_grid(initial_raw["grid"], "initial.grid")

    policy = None
    if raw.get("policy") is not None:
        policy = _parse_policy(raw["policy"], "policy")
        if len(policy) != system.horizon:
            raise ScenarioError(
                f"policy: has {len(policy)} steps, expected horizon {system.horizon}"
            )

    avoid = _parse_random_set(_get(raw, "avoid", "scenario"), "avoid")
    target = _parse_random_set(_get(raw, "target", "scenario"), "target")

    synth_raw = raw.get("synthesis", {})
    if not isinstance(synth_raw, dict):
        raise ScenarioError("synthesis: expected an object")
    try:
        synthesis = SynthesisConfig(
            v_grid_points=_integer(
                synth_raw.get("v_grid_points", 201), "synthesis.v_grid_points"
            ),
            refine_iters=_integer(
                synth_raw.get("refine_iters", 60), "synthesis.refine_iters"
            ),
            gain_candidates=tuple(
                _number(g, _ctx("synthesis.gain_candidates", i))
                for i, g in enumerate(
                    _array(synth_raw.get("gain_candidates", [0.0]), "synthesis.gain_candidates")
                )
            ),
            tol=_number(synth_raw.get("tol", 1e-9), "synthesis.tol"),
        )
    except ValueError as exc:
        raise ScenarioError(f"synthesis: {exc}") from exc

    mc_raw = raw.get("monte_carlo", {})
    if not isinstance(mc_raw, dict):
        raise ScenarioError("monte_carlo: expected an object")
    monte_carlo = MonteCarloConfig(
        n=_integer(mc_raw.get("n", 100_000), "monte_carlo.n"),
        seed=_integer(mc_raw.get("seed", 2024), "monte_carlo.seed"),
        alpha=_number(mc_raw.get("alpha", 0.05), "monte_carlo.alpha"),
        couple_random_sets=_boolean(
            mc_raw.get("couple_random_sets", True), "monte_carlo.couple_random_sets"
        ),
    )

    export_raw = raw.get("export", {})
    if not isinstance(export_raw, dict):
        raise ScenarioError("export: expected an object")
    window = None
    if export_raw.get("window") is not None:
        pair = _array(export_raw["window"], "export.window")
        if len(pair) != 2:
            raise ScenarioError("export.window: expected [lo, hi]")
        window = (
            _number(pair[0], "export.window[0]"),
            _number(pair[1], "export.window[1]"),
        )
        if not window[0] < window[1]:
            raise ScenarioError(f"export.window: out of order {window}")
    sigmas = ExportConfig().sigmas
    if export_raw.get("sigmas") is not None:
        sigmas = tuple(
            _number(s, _ctx("export.sigmas", i))
            for i, s in enumerate(_array(export_raw["sigmas"], "export.sigmas"))
        )
    export = ExportConfig(window=window, sigmas=sigmas)

    return Scenario(
        name=name,
        system=system,
        initial_measure=measure,
        initial_grid=grid,
        policy=policy,
        avoid=avoid,
        target=target,
        synthesis=synthesis,
        monte_carlo=monte_carlo,
        export=export,
    )


def parse_scenario(path_or_name: str) -> Scenario:
    """Load a scenario from a path, or by bundled name when no file exists."""
    path = path_or_name
    if not os.path.exists(path):
        bundled = bundled_scenario_path(path_or_name)
        if bundled is None:
            raise ScenarioError(
                f"scenario: no file at {path_or_name!r} and no bundled scenario "
                f"of that name (bundled: {', '.join(bundled_scenario_names())})"
            )
        path = bundled
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario_text(fh.read())


# ---------- canonical serialization ----------


def _num_out(x: float) -> Any:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _measure_out(m: Measure1D) -> dict:
    return {
        "components": [
            {"weight": c.weight, "mean": c.mean, "stddev": c.stddev}
            for c in m.components
        ]
    }


def _region_out(r: RegionSet) -> list:
    return [
        {
            "lo": _num_out(iv.lo),
            "hi": _num_out(iv.hi),
            "lo_closed": iv.lo_closed,
            "hi_closed": iv.hi_closed,
        }
        for iv in r.intervals
    ]


def _random_set_out(s: RandomSetSpec) -> dict:
    return {
        "branches": [
            {"weight": w, "region": _region_out(r)} for w, r in s.branches
        ]
    }


def _axes_out(axes: FeasibilityAxes) -> dict:
    out: dict = {"family": axes.family, "means": list(axes.means)}
    if axes.family == "single_gaussian":
        out["stddevs"] = list(axes.stddevs)
    else:
        out["second_means"] = list(axes.second_means)
        out["first_weights"] = list(axes.first_weights)
    return out


def scenario_to_json(s: Scenario) -> str:
    initial: dict = {}
    if s.initial_measure is not None:
        initial["measure"] = _measure_out(s.initial_measure)
    if s.initial_grid is not None:
        initial["grid"] = _axes_out(s.initial_grid)
    doc: dict = {
        "schema": SCHEMA_VERSION,
        "name": s.name,
        "system": {
            "dt": s.system.dt,
            "horizon": s.system.horizon,
            "input_min": _num_out(s.system.input_min),
            "input_max": _num_out(s.system.input_max),
            "noise_per_step": [_measure_out(m) for m in s.system.noise_per_step],
        },
        "initial": initial,
    }
    if s.policy is not None:
        doc["policy"] = [
            {"gain": st.gain, "feedforward": st.feedforward} for st in s.policy.steps
        ]
    doc["avoid"] = _random_set_out(s.avoid)
    doc["target"] = _random_set_out(s.target)
    doc["synthesis"] = {
        "v_grid_points": s.synthesis.v_grid_points,
        "refine_iters": s.synthesis.refine_iters,
        "gain_candidates": list(s.synthesis.gain_candidates),
        "tol": s.synthesis.tol,
    }
    doc["monte_carlo"] = {
        "n": s.monte_carlo.n,
        "seed": s.monte_carlo.seed,
        "alpha": s.monte_carlo.alpha,
        "couple_random_sets": s.monte_carlo.couple_random_sets,
    }
    export: dict = {}
    if s.export.window is not None:
        export["window"] = [s.export.window[0], s.export.window[1]]
    export["sigmas"] = list(s.export.sigmas)
    doc["export"] = export
    return json.dumps(doc, indent=2) + "\n"


# ---------- bundled scenarios ----------


def bundled_scenario_names() -> tuple[str, ...]:
    root = resources.files(__package__) / "scenarios"
    return tuple(
        sorted(p.name[: -len(".json")] for p in root.iterdir() if p.name.endswith(".json"))
    )


def bundled_scenario_path(name: str) -> Optional[str]:
    candidate = resources.files(__package__) / "scenarios" / f"{name}.json"
    if candidate.is_file():
        return str(candidate)
    return None
