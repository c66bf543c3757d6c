"""Orchestration shared by the CLI and the test-suite: resolve the bound
constants for a scenario, run its controller, score the regret, and certify
the matching inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analysis
from .analysis import ConstantsReport, derive_constants
from .controllers import (run_known_preview, run_minmax_no_preview,
                          run_unknown_preview)
from .disturbances import build_source
from .estimation import (estimate_linear, estimate_linear_in_params, synthetic_estimate)
from .model import ConfigurationError, Trajectory
from .scenario import Scenario


@dataclass(frozen=True)
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    constants: ConstantsReport
    metrics: dict


def _make_estimator(scn: Scenario):
    theta_true = scn.model.theta
    if scn.estimator == "least-squares":
        return lambda data: estimate_linear(data, theta_true=theta_true)
    if scn.estimator == "linear-in-params":
        return lambda data: estimate_linear_in_params(
            data, drift=lambda x, u: u, gain=lambda x, u: np.array([[x[0] ** 3]]),
            p=scn.model.p, theta_true=theta_true)
    if scn.estimator == "synthetic":
        return lambda data: synthetic_estimate(theta_true, data.count + 1,
                                               scn.estimator_scale, scn.config.seed)
    raise ConfigurationError(f"unknown estimator {scn.estimator!r}")


def resolve_constants(scn: Scenario) -> ConstantsReport:
    """Bound constants from scenario overrides, certified where absent."""
    ov = scn.overrides
    if "alpha_hi" in ov and "gamma_bar" in ov:
        alpha_hi, gamma_bar = float(ov["alpha_hi"]), float(ov["gamma_bar"])
        source = "config"
    else:
        cert = analysis.certify_value_bounds(
            scn.model, scn.costs, scn.config.M, scn.box,
            seed=scn.config.seed,
            radius=float(ov.get("certify_radius", 3.0)),
            w_radius=scn.disturbance.w_radius if scn.disturbance.w_radius > 0 else 1.0)
        alpha_hi, gamma_bar, source = cert.alpha_hi, cert.gamma_bar, cert.method

    worst: dict = {}
    if scn.controller == "minmax":
        if "alpha_hi_worst" in ov and "gamma_bar_worst" in ov:
            worst = dict(alpha_hi_worst=float(ov["alpha_hi_worst"]),
                         gamma_bar_worst=float(ov["gamma_bar_worst"]))
        elif scn.disturbance.w_radius > 0:
            cert_w = analysis.certify_minmax_value_bounds(
                scn.model, scn.costs, scn.config.M, scn.box, scn.disturbance.w_radius,
                seed=scn.config.seed, radius=float(ov.get("certify_radius", 3.0)))
            worst = dict(alpha_hi_worst=cert_w.alpha_hi, gamma_bar_worst=cert_w.gamma_bar)
        worst["margin_worst"] = ov.get("margin_worst")

    report = derive_constants(scn.costs.alpha_lo, alpha_hi, gamma_bar, scn.config.M,
                              margin=ov.get("margin"), bounds_source=source, **worst)
    if "alpha_value" in ov and "alpha_feedback" in ov:
        from dataclasses import replace

        gain_v, gain_c = analysis.estimate_sensitivity_constants(
            float(ov["alpha_value"]), float(ov["alpha_feedback"]),
            scn.costs.alpha_c if scn.costs.alpha_c is not None else 0.0,
            scn.model.lipschitz_gain,
            scn.model.theta_bound if scn.model.theta_bound is not None
            else float(np.linalg.norm(scn.model.theta)),
            scn.config.M, scn.costs.alpha_lo, alpha_hi,
            report.margin, report.decay, H=scn.config.M)
        report = replace(report, theta_value_gain=gain_v, theta_cost_gain=gain_c)
    return report


def run_scenario(scn: Scenario, constants: ConstantsReport | None = None) -> RunResult:
    if constants is None:
        constants = resolve_constants(scn)
    costs = scn.costs.with_bounds(constants.alpha_hi, constants.gamma_bar)
    source = build_source(scn.disturbance, scn.config.T, model=scn.model, costs=costs)
    if scn.controller == "known-preview":
        traj = run_known_preview(scn.model, costs, source, scn.box, scn.x0, scn.config)
    elif scn.controller == "unknown-preview":
        traj = run_unknown_preview(scn.model, costs, source, scn.box, scn.x0, scn.config,
                                   _make_estimator(scn))
    else:
        traj = run_minmax_no_preview(scn.model, costs, source, scn.box, scn.x0, scn.config,
                                     scn.disturbance.w_radius)
    metrics = collect_metrics(scn, traj, constants)
    return RunResult(scenario=scn, trajectory=traj, constants=constants, metrics=metrics)


def collect_metrics(scn: Scenario, traj: Trajectory, constants: ConstantsReport) -> dict:
    gammas = list(scn.config.gamma_grid)
    threshold = constants.attenuation_threshold
    metrics = {
        "name": scn.name,
        "controller": scn.controller,
        "seed": scn.config.seed,
        "T": traj.T,
        "M": scn.config.M,
        "total_cost": traj.total_cost,
        "energy": traj.energy,
        "attenuation_threshold": threshold,
        "regret": [{"gamma": g, "regret": analysis.attenuation_regret(traj, g)} for g in gammas],
        "regret_at_threshold": analysis.attenuation_regret(traj, threshold),
        "status": "ok",
    }
    if constants.attenuation_threshold_worst is not None:
        metrics["attenuation_threshold_worst"] = constants.attenuation_threshold_worst
    if traj.estimation_end is not None:
        start = traj.estimation_end
        metrics["estimation_end"] = start
        metrics["control_phase"] = {
            "cost": traj.suffix_cost(start),
            "energy": traj.suffix_energy(start),
            "regret_at_threshold": analysis.attenuation_regret(traj, threshold, start=start),
            "regret": [{"gamma": g, "regret": analysis.attenuation_regret(traj, g, start=start)}
                       for g in gammas],
        }
        if traj.estimate is not None:
            metrics["estimate"] = {
                "samples": traj.estimate.samples,
                "accuracy_bound": traj.estimate.accuracy_bound,
                "actual_error": traj.estimate.actual_error,
            }
    return metrics


def checks_for(scn: Scenario, constants: ConstantsReport) -> list[str]:
    checks = ["value-lower-bound"]
    if scn.controller == "known-preview":
        checks.append("value-decrease")
    elif scn.controller == "unknown-preview":
        if constants.theta_value_gain is not None:
            checks.append("value-decrease-estimated")
    else:
        checks.append("value-decrease-minmax")
    return checks


def certify_scenario(scn: Scenario) -> tuple[RunResult, list]:
    constants = resolve_constants(scn)
    result = run_scenario(scn, constants)
    costs = scn.costs.with_bounds(constants.alpha_hi, constants.gamma_bar)
    reports = [analysis.certify(result.trajectory, chk, constants, costs)
               for chk in checks_for(scn, constants)]
    return result, reports
