"""The three online loops: preview control of a known system, estimate-then-
control for an unknown system, and worst-case control without preview.

Each loop records the per-step horizon value alongside the applied control so
the analysis layer can certify the value-decrease inequalities after the run.
Runs are deterministic: all randomness is derived from the configuration seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .disturbances import DisturbanceSource
from .estimation import Dataset, EstimateReport, probe_input
from .horizon import solve_horizon
from .minmax import solve_minmax
from .model import Box, ConfigurationError, CostModel, SystemModel, Trajectory


class DivergenceError(RuntimeError):
    """State left the configured operating region; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class OnlineRunConfig:
    T: int
    M: int
    estimation_steps: int | None = None
    gamma_grid: tuple = ()
    seed: int = 0
    state_ceiling: float = 1e6

    def __post_init__(self):
        if self.M < 2:
            raise ConfigurationError("horizon must be at least 2")
        if self.T < self.M + 1:
            raise ConfigurationError("run length must be at least M+1")
        if self.estimation_steps is not None and not (1 <= self.estimation_steps < self.T):
            raise ConfigurationError("estimation phase must satisfy 1 <= N < T")
        object.__setattr__(self, "gamma_grid", tuple(float(g) for g in self.gamma_grid))


class _Recorder:
    def __init__(self, controller: str, cfg: OnlineRunConfig, n: int, m: int, w_radius: float):
        T, M = cfg.T, cfg.M
        self.controller = controller
        self.cfg = cfg
        self.w_radius = w_radius
        self.times = np.arange(1, T + 1)
        self.states = np.zeros((T, n))
        self.controls = np.zeros((T, m))
        self.disturbances = np.zeros((T, n))
        self.stage_costs = np.zeros(T)
        self.values = np.full(T, np.nan)
        self.previews = np.zeros((T, M, n))
        self.steps_done = 0

    def record(self, t, x, u, w, cost, value, preview):
        i = t - 1
        self.states[i] = x
        self.controls[i] = u
        self.disturbances[i] = w
        self.stage_costs[i] = cost
        self.values[i] = value
        if preview is not None:
            self.previews[i] = preview
        self.steps_done = t

    def trajectory(self, final_state, estimation_end=None, estimate=None, truncate=False) -> Trajectory:
        k = self.steps_done if truncate else self.cfg.T
        return Trajectory(controller=self.controller, times=self.times[:k],
                          states=self.states[:k], controls=self.controls[:k],
                          disturbances=self.disturbances[:k], stage_costs=self.stage_costs[:k],
                          values=self.values[:k], previews=self.previews[:k],
                          final_state=np.asarray(final_state, dtype=float),
                          w_radius=self.w_radius, seed=self.cfg.seed,
                          estimation_end=estimation_end, estimate=estimate)

    def guard(self, t, x, estimation_end=None, estimate=None):
        if np.linalg.norm(x) > self.cfg.state_ceiling:
            partial = self.trajectory(x, estimation_end, estimate, truncate=True)
            raise DivergenceError(
                f"state norm {np.linalg.norm(x):.3e} exceeded the ceiling "
                f"{self.cfg.state_ceiling:.3e} at step {t}", partial)


def run_known_preview(model: SystemModel, costs: CostModel, source: DisturbanceSource,
                      box: Box, x0, cfg: OnlineRunConfig) -> Trajectory:
    """Preview controller on the true system: solve the horizon problem, apply the first control."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    rec = _Recorder("known-preview", cfg, model.n, model.m, source.spec.w_radius)
    for t in range(1, cfg.T + 1):
        rec.guard(t, x)
        window = source.window(t, cfg.M)
        sol = solve_horizon(model, costs, t, x, window, box)
        u = sol.controls[0]
        w = window[0]
        rec.record(t, x, u, w, costs.stage_cost(t, x, u), sol.value, window)
        x = model.step(x, u, w)
    rec.guard(cfg.T + 1, x)
    return rec.trajectory(x)


def run_unknown_preview(model: SystemModel, costs: CostModel, source: DisturbanceSource,
                        box: Box, x0, cfg: OnlineRunConfig,
                        estimator: Callable[[Dataset], EstimateReport]) -> Trajectory:
    """Probe for N-1 steps, estimate, then preview-control the estimated system.

    The true system always advances the state; the estimated parameter only
    enters the horizon optimisation.
    """
    if cfg.estimation_steps is None:
        raise ConfigurationError("the unknown-system loop needs estimation_steps in the run config")
    N = cfg.estimation_steps
    x = np.asarray(x0, dtype=float).reshape(-1)
    rec = _Recorder("unknown-preview", cfg, model.n, model.m, source.spec.w_radius)
    xs, us, ws, nxts = [], [], [], []
    report: EstimateReport | None = None
    for t in range(1, cfg.T + 1):
        rec.guard(t, x, estimation_end=N, estimate=report)
        if t < N:
            u = probe_input(t, box, cfg.seed)
            w = source.realized(t)
            rec.record(t, x, u, w, costs.stage_cost(t, x, u), np.nan, None)
            x_next = model.step(x, u, w)
            xs.append(x); us.append(u); ws.append(w); nxts.append(x_next)
            x = x_next
            continue
        if t == N:
            data = Dataset(next_states=np.asarray(nxts).reshape(-1, model.n),
                           states=np.asarray(xs).reshape(-1, model.n),
                           controls=np.asarray(us).reshape(-1, model.m),
                           disturbances=np.asarray(ws).reshape(-1, model.n))
            try:
                report = estimator(data)
            except Exception as exc:
                # surface the probe-phase record alongside the estimator failure
                exc.trajectory = rec.trajectory(x, estimation_end=N, truncate=True)
                raise
        window = source.window(t, cfg.M)
        sol = solve_horizon(model, costs, t, x, window, box, theta=report.theta_hat)
        u = sol.controls[0]
        w = window[0]
        rec.record(t, x, u, w, costs.stage_cost(t, x, u), sol.value, window)
        x = model.step(x, u, w)
    rec.guard(cfg.T + 1, x, estimation_end=N, estimate=report)
    return rec.trajectory(x, estimation_end=N, estimate=report)


def run_minmax_no_preview(model: SystemModel, costs: CostModel, source: DisturbanceSource,
                          box: Box, x0, cfg: OnlineRunConfig, w_radius: float) -> Trajectory:
    """Worst-case controller: optimise against the disturbance ball, realize the actual one."""
    if w_radius < 0:
        raise ConfigurationError("w_radius must be nonnegative")
    x = np.asarray(x0, dtype=float).reshape(-1)
    rec = _Recorder("minmax", cfg, model.n, model.m, w_radius)
    for t in range(1, cfg.T + 1):
        rec.guard(t, x)
        sol = solve_minmax(model, costs, t, x, cfg.M, box, w_radius)
        u = sol.controls[0]
        w = source.realized(t, state=x, control=u)
        if np.linalg.norm(w) > w_radius + 1e-9:
            raise ConfigurationError("realized disturbance violates the configured norm bound")
        rec.record(t, x, u, w, costs.stage_cost(t, x, u), sol.value, None)
        x = model.step(x, u, w)
    rec.guard(cfg.T + 1, x)
    return rec.trajectory(x)
