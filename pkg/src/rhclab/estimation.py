"""Estimation-phase machinery for the unknown-system controller.

Probe inputs excite the system during the first N steps; the collected
transition tuples feed a pluggable estimator ``Dataset -> EstimateReport``.
With disturbance preview the least-squares residual is exact, so the linear
and linear-in-parameters estimators recover the true parameter once the
regressors have full column rank (accuracy bound identically zero).  The
synthetic estimator fabricates a controlled-error estimate for scaling
experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Box, Vector

_PROBE_TAG = 101
_SYNTH_TAG = 313
RANK_RTOL = 1e-10


class RankDeficiencyError(RuntimeError):
    """Regressors do not excite every parameter direction (estimation phase too short)."""


@dataclass(frozen=True)
class Dataset:
    """Transition tuples (x_next, x, u, w) collected during the estimation phase."""

    next_states: np.ndarray   # (K, n)
    states: np.ndarray        # (K, n)
    controls: np.ndarray      # (K, m)
    disturbances: np.ndarray  # (K, n)

    def __post_init__(self):
        K = self.next_states.shape[0]
        if not (self.states.shape[0] == self.controls.shape[0] == self.disturbances.shape[0] == K):
            raise ValueError("dataset arrays must have equal length")

    @property
    def count(self) -> int:
        return int(self.next_states.shape[0])


@dataclass(frozen=True)
class EstimateReport:
    theta_hat: Vector
    samples: int
    accuracy_bound: float            # guaranteed |theta_hat - theta| ceiling
    actual_error: float | None = None  # simulation-only diagnostic (needs the true theta)


def probe_input(t: int, box: Box, seed: int) -> np.ndarray:
    """Deterministic-given-seed uniform excitation over the control box."""
    rng = np.random.default_rng([int(seed), _PROBE_TAG, int(t)])
    return rng.uniform(box.lower, box.upper)


def _check_rank(matrix: np.ndarray, needed: int):
    if matrix.shape[0] < needed:
        raise RankDeficiencyError(
            f"{matrix.shape[0]} samples cannot identify {needed} parameter directions")
    svals = np.linalg.svd(matrix, compute_uv=False)
    if svals[-1] <= RANK_RTOL * max(svals[0], 1.0):
        raise RankDeficiencyError(
            "regressor matrix is rank deficient; probe inputs did not excite the system")


def estimate_linear(data: Dataset, theta_true: Vector | None = None) -> EstimateReport:
    """Least squares for x' = A x + B u + w; exact once the regressors have full rank."""
    n = data.states.shape[1]
    regressors = np.hstack([data.states, data.controls])
    _check_rank(regressors, regressors.shape[1])
    targets = data.next_states - data.disturbances
    coef, *_ = np.linalg.lstsq(regressors, targets, rcond=None)
    A = coef[:n].T
    B = coef[n:].T
    theta_hat = np.concatenate([A.ravel(), B.ravel()])
    err = None if theta_true is None else float(np.linalg.norm(theta_hat - theta_true))
    return EstimateReport(theta_hat=theta_hat, samples=data.count, accuracy_bound=0.0,
                          actual_error=err)


def estimate_linear_in_params(data: Dataset, drift, gain, p: int,
                              theta_true: Vector | None = None) -> EstimateReport:
    """Least squares for x' = x + drift(x,u) + gain(x,u) theta + w."""
    n = data.states.shape[1]
    rows = np.empty((data.count * n, p))
    resid = np.empty(data.count * n)
    for k in range(data.count):
        x, u = data.states[k], data.controls[k]
        G = np.asarray(gain(x, u), dtype=float).reshape(n, p)
        rows[k * n:(k + 1) * n] = G
        resid[k * n:(k + 1) * n] = (data.next_states[k] - x
                                    - np.asarray(drift(x, u), dtype=float).reshape(-1)
                                    - data.disturbances[k])
    _check_rank(rows, p)
    theta_hat, *_ = np.linalg.lstsq(rows, resid, rcond=None)
    err = None if theta_true is None else float(np.linalg.norm(theta_hat - theta_true))
    return EstimateReport(theta_hat=theta_hat, samples=data.count, accuracy_bound=0.0,
                          actual_error=err)


def synthetic_estimate(theta_true: Vector, samples: int, scale: float, seed: int) -> EstimateReport:
    """theta + a random-direction error of magnitude exactly scale/sqrt(samples)."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    theta_true = np.asarray(theta_true, dtype=float).reshape(-1)
    magnitude = float(scale) / np.sqrt(samples)
    rng = np.random.default_rng([int(seed), _SYNTH_TAG, int(samples)])
    direction = rng.standard_normal(theta_true.shape[0])
    nrm = np.linalg.norm(direction)
    direction = direction / nrm if nrm > 0 else np.eye(theta_true.shape[0])[0]
    theta_hat = theta_true + magnitude * direction
    return EstimateReport(theta_hat=theta_hat, samples=int(samples),
                          accuracy_bound=magnitude,
                          actual_error=float(np.linalg.norm(theta_hat - theta_true)))
