"""Scenario files: JSON documents describing a system, cost, disturbance,
and run configuration.  ``build`` turns the parsed document into the live
objects the controllers consume and validates referential completeness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .controllers import OnlineRunConfig
from .disturbances import DisturbanceSpec
from .model import (Box, ConfigurationError, CostModel, SystemModel,
                    linear_in_params_system, linear_system, quadratic_cost)

CONTROLLERS = ("known-preview", "unknown-preview", "minmax")
ESTIMATORS = ("least-squares", "linear-in-params", "synthetic")


@dataclass(frozen=True)
class Scenario:
    name: str
    raw: dict
    model: SystemModel
    costs: CostModel
    box: Box
    disturbance: DisturbanceSpec
    config: OnlineRunConfig
    controller: str
    estimator: str | None = None
    estimator_scale: float = 1.0
    x0: np.ndarray = field(default_factory=lambda: np.zeros(1))
    overrides: dict = field(default_factory=dict)


def load(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _build_system(doc: dict) -> SystemModel:
    kind = doc.get("kind")
    if kind == "linear":
        if "A" not in doc or "B" not in doc:
            raise ConfigurationError("linear system needs matrices A and B")
        return linear_system(doc["A"], doc["B"], theta_bound=doc.get("theta_bound"))
    if kind == "scalar-cubic":
        # x' = x + u + theta * x^3 + w
        theta = doc.get("theta")
        if theta is None:
            raise ConfigurationError("scalar-cubic system needs a theta value")
        return linear_in_params_system(
            1, 1,
            drift=lambda x, u: u,
            gain=lambda x, u: np.array([[x[0] ** 3]]),
            theta=[float(theta)],
            lipschitz_gain=float(doc.get("lipschitz_gain", 1.0)),
            theta_bound=doc.get("theta_bound"))
    raise ConfigurationError(f"unknown system kind {kind!r}")


def _build_cost(doc: dict) -> CostModel:
    kind = doc.get("kind")
    if kind == "quadratic":
        if "Q" not in doc or "R" not in doc:
            raise ConfigurationError("quadratic cost needs matrices Q and R")
        return quadratic_cost(doc["Q"], doc["R"], alpha_c=doc.get("alpha_c"))
    raise ConfigurationError(f"unknown cost kind {kind!r}")


def _build_box(doc: dict, m: int) -> Box:
    if "radius" in doc:
        return Box.symmetric(float(doc["radius"]), m)
    if "lower" in doc and "upper" in doc:
        return Box(np.asarray(doc["lower"], dtype=float), np.asarray(doc["upper"], dtype=float))
    raise ConfigurationError("control_box needs either a radius or lower/upper bounds")


def _build_disturbance(doc: dict, n: int, default_seed: int) -> DisturbanceSpec:
    if "w_c" not in doc:
        raise ConfigurationError("disturbance spec needs the norm bound w_c")
    return DisturbanceSpec(
        kind=doc.get("kind", "zero"),
        w_radius=float(doc["w_c"]),
        dim=n,
        amplitude=doc.get("amplitude"),
        period=float(doc.get("period", 20.0)),
        flip_interval=int(doc.get("flip_interval", 2)),
        time=int(doc.get("time", 5)),
        direction=tuple(doc["direction"]) if "direction" in doc else None,
        seed=int(doc.get("seed", default_seed)),
        boundary_points=int(doc.get("boundary_points", 64)))


def build(raw: dict, seed_override: int | None = None,
          gamma_override=None) -> Scenario:
    """Validate a scenario document and construct its live objects."""
    for key in ("system", "cost", "control_box", "disturbance", "run"):
        if key not in raw:
            raise ConfigurationError(f"scenario is missing the {key!r} section")
    run = raw["run"]
    controller = run.get("controller")
    if controller not in CONTROLLERS:
        raise ConfigurationError(f"controller must be one of {CONTROLLERS}, got {controller!r}")

    model = _build_system(raw["system"])
    costs = _build_cost(raw["cost"])
    box = _build_box(raw["control_box"], model.m)
    seed = int(seed_override if seed_override is not None else run.get("seed", 0))
    spec = _build_disturbance(raw["disturbance"], model.n, seed)

    gamma_grid = gamma_override if gamma_override is not None else run.get("gamma_grid", [])
    cfg = OnlineRunConfig(T=int(run["T"]), M=int(run["M"]),
                          estimation_steps=run.get("N"),
                          gamma_grid=tuple(float(g) for g in gamma_grid),
                          seed=seed,
                          state_ceiling=float(run.get("state_ceiling", 1e6)))

    estimator = None
    estimator_scale = 1.0
    if controller == "unknown-preview":
        est = raw.get("estimator")
        if not est or "kind" not in est:
            raise ConfigurationError("the unknown-system controller requires an estimator section")
        estimator = est["kind"]
        if estimator not in ESTIMATORS:
            raise ConfigurationError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
        if estimator == "least-squares" and model.kind != "linear":
            raise ConfigurationError("the least-squares estimator needs a linear system")
        if estimator == "linear-in-params" and model.kind != "linear-in-params":
            raise ConfigurationError(
                "the linear-in-params estimator needs a linear-in-params system")
        estimator_scale = float(est.get("scale", 1.0))
        if cfg.estimation_steps is None:
            raise ConfigurationError("the unknown-system controller requires run.N")

    x0 = np.asarray(run.get("x0", np.zeros(model.n)), dtype=float).reshape(-1)
    if x0.shape != (model.n,):
        raise ConfigurationError("x0 dimension does not match the system")

    return Scenario(name=str(raw.get("name", "scenario")), raw=raw, model=model, costs=costs,
                    box=box, disturbance=spec, config=cfg, controller=controller,
                    estimator=estimator, estimator_scale=estimator_scale, x0=x0,
                    overrides=dict(raw.get("overrides", {})))


def load_and_build(path, seed_override=None, gamma_override=None) -> Scenario:
    return build(load(path), seed_override=seed_override, gamma_override=gamma_override)


def apply_overrides(raw: dict, assignments: dict) -> dict:
    """Return a copy of the document with dotted-path assignments applied (sweep cells)."""
    out = json.loads(json.dumps(raw))
    for dotted, value in assignments.items():
        node = out
        parts = dotted.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return out
