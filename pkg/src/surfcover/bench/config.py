"""Benchmark configuration: a validated YAML document."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml

from ..kinematics import KinematicChain, ToleranceSpec, resolve_chain
from ..planners import METHODS, PlannerParams
from ..solvers import SolverBudget
from ..surface import SURFACE_KINDS, SurfaceMesh, generate_benchmark_surface, load_mesh_file

__all__ = ["BenchConfig", "ConfigError", "load_config", "config_from_dict"]


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_TOLERANCE_KEYS = {"free_spin_about_normal", "tilt_tolerance", "tangent_translation_radius", "full_6dof"}
_PLANNER_KEYS = {f.name for f in fields(PlannerParams)} - {"samples", "alpha", "seed", "budget", "reconfig"}


@dataclass(frozen=True)
class BenchConfig:
    surface: str = "hemisphere-exterior"
    surface_params: Dict[str, Any] = field(default_factory=dict)
    robot: str = "arm7"
    tolerance: Any = "free-spin"
    methods: Tuple[str, ...] = tuple(METHODS)
    repeats: int = 10
    master_seed: int = 0
    samples: int = 100
    alpha: float = 0.1
    time_cap: float = 60.0
    stagnation_secs: float = 2.0
    stagnation_iters: Optional[int] = 30
    planner: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError("repeats", "must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples", "must be >= 1")
        if self.alpha < 0:
            raise ConfigError("alpha", "must be non-negative")
        if not self.methods:
            raise ConfigError("methods", "at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError("methods", f"unknown method {m!r}; choose from {sorted(METHODS)}")
        unknown = set(self.planner) - _PLANNER_KEYS
        if unknown:
            raise ConfigError(f"planner.{sorted(unknown)[0]}", "unknown planner option")
        try:
            self.budget(0)
        except ValueError as exc:
            raise ConfigError("budget", str(exc)) from None

    def budget(self, seed: int) -> SolverBudget:
        return SolverBudget(self.time_cap, self.stagnation_secs, self.stagnation_iters, seed)

    def params(self, seed: int) -> PlannerParams:
        try:
            return PlannerParams(
                samples=self.samples, alpha=self.alpha, seed=seed, budget=self.budget(seed), **self.planner
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("planner", str(exc)) from None

    def tolerance_spec(self) -> ToleranceSpec:
        try:
            if isinstance(self.tolerance, str):
                return ToleranceSpec.preset(self.tolerance)
            return ToleranceSpec(**self.tolerance)
        except (TypeError, ValueError) as exc:
            raise ConfigError("tolerance", str(exc)) from None

    def chain(self) -> KinematicChain:
        try:
            return resolve_chain(self.robot)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError("robot", str(exc)) from None

    def mesh(self) -> SurfaceMesh:
        if self.surface in SURFACE_KINDS:
            try:
                return generate_benchmark_surface(self.surface, **dict(self.surface_params))
            except (TypeError, ValueError) as exc:
                raise ConfigError("surface_params", str(exc)) from None
        if self.surface_params:
            raise ConfigError("surface_params", "only valid with a generated surface kind")
        try:
            return load_mesh_file(self.surface)
        except (OSError, ValueError) as exc:
            raise ConfigError("surface", str(exc)) from None

    def with_density(self, n: int) -> "BenchConfig":
        """Same benchmark at another target count."""
        p = dict(self.surface_params)
        if self.surface == "floor-grid":
            side = max(2, round(n**0.5))
            p.update(nx=side, ny=side)
        elif self.surface in ("hemisphere-exterior", "bowl-interior"):
            p["n"] = n
        else:
            raise ConfigError("surface", f"density sweeps are not supported for {self.surface!r}")
        return replace(self, surface_params=p)


_TYPES = {
    "surface": str,
    "surface_params": dict,
    "robot": str,
    "tolerance": (str, dict),
    "methods": list,
    "repeats": int,
    "master_seed": int,
    "samples": int,
    "alpha": (int, float),
    "time_cap": (int, float),
    "stagnation_secs": (int, float),
    "stagnation_iters": (int, type(None)),
    "planner": dict,
}


def config_from_dict(data: Dict[str, Any]) -> BenchConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    for key, value in data.items():
        if key not in _TYPES:
            raise ConfigError(key, f"unknown key; expected one of {sorted(_TYPES)}")
        if isinstance(value, bool) or not isinstance(value, _TYPES[key]):
            raise ConfigError(key, f"unexpected type {type(value).__name__}")
    tol = data.get("tolerance")
    if isinstance(tol, dict):
        for k in tol:
            if k not in _TOLERANCE_KEYS:
                raise ConfigError(f"tolerance.{k}", "unknown tolerance field")
    data = dict(data)
    if "methods" in data:
        data["methods"] = tuple(data["methods"])
    return BenchConfig(**data)


def load_config(path) -> BenchConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML in {path}: {exc}") from None
    return config_from_dict(data or {})
