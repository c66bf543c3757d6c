"""System, cost, and trajectory containers shared by the solvers and online loops.

State, control, and disturbance vectors are plain 1-d numpy arrays.  A
``SystemModel`` wraps a parameterised transition map ``x' = f(x, u, w; theta)``
and a ``CostModel`` wraps time-indexed stage costs ``c_t(x, u)`` together with
a nonnegative deviation function ``sigma`` and the bound constants the
analysis layer consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

Vector = np.ndarray


class ConfigurationError(ValueError):
    """Scenario pieces do not fit together (dimension or schema mismatch)."""


def _as_vector(v, dim: int, name: str) -> Vector:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (dim,):
        raise ConfigurationError(f"{name} must have dimension {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Box:
    """Axis-aligned compact set of admissible controls."""

    lower: Vector
    upper: Vector

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ConfigurationError("box bounds must have equal dimension")
        if np.any(lo > hi):
            raise ConfigurationError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "_pad", 1e-9 * (1.0 + np.abs(lo) + np.abs(hi)))

    @classmethod
    def symmetric(cls, radius: float, dim: int) -> "Box":
        r = float(radius)
        return cls(-r * np.ones(dim), r * np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def project(self, u: Vector) -> Vector:
        return np.clip(u, self.lower, self.upper)

    def contains(self, u: Vector, tol: float = 1e-9) -> bool:
        return bool(np.all(u >= self.lower - tol) and np.all(u <= self.upper + tol))

    def strictly_inside(self, u: Vector) -> bool:
        pad = self._pad
        return bool(np.all(u > self.lower + pad) and np.all(u < self.upper - pad))


@dataclass(frozen=True)
class SystemModel:
    """Parameterised transition map with Lipschitz metadata.

    ``transition(x, u, w, theta)`` must be deterministic.  ``lipschitz_gain``
    is the constant ``L`` such that
    ``|f(x',u',w;th) - f(x,u,w;th)| <= L * |th| * (|x'-x| + |u'-u|)``.
    ``theta_bound`` caps the parameter two-norm (None = unspecified).
    """

    n: int
    m: int
    theta: Vector
    kind: str  # "linear" | "linear-in-params" | "custom"
    lipschitz_gain: float
    transition: Callable[[Vector, Vector, Vector, Vector], Vector]
    jacobian: Callable[[Vector, Vector, Vector, Vector], tuple] | None = None
    theta_bound: float | None = None

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    def step(self, x, u, w, theta: Vector | None = None) -> Vector:
        """One transition of the system under the given (default: own) parameter."""
        x = _as_vector(x, self.n, "state")
        u = _as_vector(u, self.m, "control")
        w = _as_vector(w, self.n, "disturbance")
        th = self.theta if theta is None else np.asarray(theta, dtype=float)
        nxt = np.asarray(self.transition(x, u, w, th), dtype=float).reshape(-1)
        if nxt.shape != (self.n,):
            raise ConfigurationError("transition returned a vector of the wrong dimension")
        return nxt

    def rollout(self, x0, controls, disturbances, theta: Vector | None = None) -> np.ndarray:
        """States visited under paired control/disturbance sequences (length k -> k+1 states)."""
        controls = np.atleast_2d(np.asarray(controls, dtype=float))
        disturbances = np.atleast_2d(np.asarray(disturbances, dtype=float))
        if controls.size == 0:
            controls = controls.reshape(0, self.m)
        if disturbances.size == 0:
            disturbances = disturbances.reshape(0, self.n)
        if controls.shape[0] != disturbances.shape[0]:
            raise ConfigurationError("controls and disturbances must have equal length")
        states = np.empty((controls.shape[0] + 1, self.n))
        states[0] = _as_vector(x0, self.n, "state")
        for i in range(controls.shape[0]):
            states[i + 1] = self.step(states[i], controls[i], disturbances[i], theta=theta)
        return states

    def with_theta(self, theta) -> "SystemModel":
        th = np.asarray(theta, dtype=float).reshape(-1)
        if th.shape != self.theta.shape:
            raise ConfigurationError("replacement parameter has wrong dimension")
        return replace(self, theta=th)

    def jacobians(self, x, u, w, theta: Vector | None = None, eps: float = 1e-6):
        """(df/dx, df/du) at a point; analytic when available, central differences otherwise."""
        th = self.theta if theta is None else np.asarray(theta, dtype=float)
        if self.jacobian is not None:
            return self.jacobian(x, u, w, th)
        fx = np.empty((self.n, self.n))
        fu = np.empty((self.n, self.m))
        for i in range(self.n):
            d = np.zeros(self.n)
            d[i] = eps
            fx[:, i] = (self.step(x + d, u, w, th) - self.step(x - d, u, w, th)) / (2 * eps)
        for i in range(self.m):
            d = np.zeros(self.m)
            d[i] = eps
            fu[:, i] = (self.step(x, u + d, w, th) - self.step(x, u - d, w, th)) / (2 * eps)
        return fx, fu


def pack_linear_theta(A: np.ndarray, B: np.ndarray) -> Vector:
    return np.concatenate([np.asarray(A, dtype=float).ravel(), np.asarray(B, dtype=float).ravel()])


def unpack_linear_theta(theta: Vector, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != n * n + n * m:
        raise ConfigurationError("parameter vector length does not match linear system dimensions")
    return theta[: n * n].reshape(n, n), theta[n * n :].reshape(n, m)


def linear_system(A, B, theta_bound: float | None = None) -> SystemModel:
    """x' = A x + B u + w.  The parameter vector stacks A then B row-major."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ConfigurationError("A must be square")
    if B.shape[0] != n:
        raise ConfigurationError("B row count must match state dimension")
    m = B.shape[1]

    def transition(x, u, w, theta):
        Am, Bm = unpack_linear_theta(theta, n, m)
        return Am @ x + Bm @ u + w

    def jacobian(x, u, w, theta):
        return unpack_linear_theta(theta, n, m)

    theta = pack_linear_theta(A, B)
    # spectral norm <= Frobenius norm = |theta|, so gain 1 satisfies the metadata contract
    return SystemModel(n=n, m=m, theta=theta, kind="linear", lipschitz_gain=1.0,
                       transition=transition, jacobian=jacobian,
                       theta_bound=theta_bound if theta_bound is not None else float(np.linalg.norm(theta)))


def linear_in_params_system(n: int, m: int, drift, gain, theta, lipschitz_gain: float,
                            theta_bound: float | None = None) -> SystemModel:
    """x' = x + drift(x,u) + gain(x,u) @ theta + w with user-supplied evaluators."""
    theta = np.asarray(theta, dtype=float).reshape(-1)

    def transition(x, u, w, th):
        return x + np.asarray(drift(x, u), dtype=float).reshape(-1) \
            + np.asarray(gain(x, u), dtype=float).reshape(n, -1) @ th + w

    return SystemModel(n=n, m=m, theta=theta, kind="linear-in-params",
                       lipschitz_gain=float(lipschitz_gain), transition=transition,
                       theta_bound=theta_bound if theta_bound is not None else float(np.linalg.norm(theta)))


def custom_system(n: int, m: int, transition, theta, lipschitz_gain: float,
                  theta_bound: float | None = None, jacobian=None) -> SystemModel:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    return SystemModel(n=n, m=m, theta=theta, kind="custom", lipschitz_gain=float(lipschitz_gain),
                       transition=transition, jacobian=jacobian, theta_bound=theta_bound)


@dataclass(frozen=True)
class CostModel:
    """Time-indexed stage costs ``c_t(x, u)`` with the bound metadata used by the analysis.

    ``alpha_lo`` is the constant with ``c_t(x, u) >= alpha_lo * sigma(x) >= 0``.
    ``alpha_hi`` / ``gamma_bar`` bound the horizon value function
    ``V <= alpha_hi * sigma(x) + gamma_bar * (preview energy)``; they are either
    user-supplied or produced by the certification op.  ``alpha_c`` is a stage
    cost Lipschitz constant over the operating region (used only by the
    parameter-sensitivity constants).
    """

    stage: Callable[[int, Vector, Vector], float]
    sigma: Callable[[Vector], float]
    alpha_lo: float
    alpha_hi: float | None = None
    gamma_bar: float | None = None
    alpha_c: float | None = None
    kind: str = "custom"
    Q: np.ndarray | None = None
    R: np.ndarray | None = None
    t_max: int | None = None  # costs defined for 1 <= t <= t_max (None = all t)

    def stage_cost(self, t: int, x, u) -> float:
        if t < 1 or (self.t_max is not None and t > self.t_max):
            raise ConfigurationError(f"stage cost requested at t={t}, outside the configured range")
        return float(self.stage(t, np.asarray(x, dtype=float), np.asarray(u, dtype=float)))

    def gradients(self, t: int, x, u, eps: float = 1e-6) -> tuple[Vector, Vector]:
        """(dc/dx, dc/du); analytic for the quadratic kind, central differences otherwise."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if self.kind == "quadratic":
            return 2.0 * self.Q @ x, 2.0 * self.R @ u
        gx = np.empty_like(x)
        gu = np.empty_like(u)
        for i in range(x.shape[0]):
            d = np.zeros_like(x)
            d[i] = eps
            gx[i] = (self.stage_cost(t, x + d, u) - self.stage_cost(t, x - d, u)) / (2 * eps)
        for i in range(u.shape[0]):
            d = np.zeros_like(u)
            d[i] = eps
            gu[i] = (self.stage_cost(t, x, u + d) - self.stage_cost(t, x, u - d)) / (2 * eps)
        return gx, gu

    def with_bounds(self, alpha_hi: float, gamma_bar: float) -> "CostModel":
        return replace(self, alpha_hi=float(alpha_hi), gamma_bar=float(gamma_bar))


def quadratic_cost(Q, R, alpha_hi: float | None = None, gamma_bar: float | None = None,
                   alpha_c: float | None = None) -> CostModel:
    """c_t(x,u) = x'Qx + u'Ru with sigma(x) = |x|^2 and alpha_lo = lambda_min(Q)."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    q_lo = float(np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))))
    r_lo = float(np.min(np.linalg.eigvalsh(0.5 * (R + R.T))))
    if q_lo <= 0:
        raise ConfigurationError("Q must be positive definite so that the cost dominates sigma")
    if r_lo <= 0:
        raise ConfigurationError("R must be positive definite (strong convexity in the control)")

    def stage(t, x, u):
        return float(x @ Q @ x + u @ R @ u)

    def sigma(x):
        return float(np.dot(x, x))

    return CostModel(stage=stage, sigma=sigma, alpha_lo=q_lo, alpha_hi=alpha_hi,
                     gamma_bar=gamma_bar, alpha_c=alpha_c, kind="quadratic", Q=Q, R=R)


def custom_cost(stage, sigma, alpha_lo: float, alpha_hi: float | None = None,
                gamma_bar: float | None = None, alpha_c: float | None = None,
                t_max: int | None = None) -> CostModel:
    if alpha_lo <= 0:
        raise ConfigurationError("alpha_lo must be positive")
    return CostModel(stage=stage, sigma=sigma, alpha_lo=float(alpha_lo), alpha_hi=alpha_hi,
                     gamma_bar=gamma_bar, alpha_c=alpha_c, kind="custom", t_max=t_max)


@dataclass(frozen=True)
class Trajectory:
    """Per-step record of one online run (times are 1-based).

    ``values[t-1]`` holds the horizon value computed at step t (NaN during an
    estimation phase).  ``previews[t-1]`` is the disturbance window the
    controller saw at step t (zeros for the no-preview controller).
    """

    controller: str
    times: np.ndarray          # (T,)
    states: np.ndarray         # (T, n)
    controls: np.ndarray       # (T, m)
    disturbances: np.ndarray   # (T, n)
    stage_costs: np.ndarray    # (T,)
    values: np.ndarray         # (T,)
    previews: np.ndarray       # (T, M, n)
    final_state: np.ndarray    # (n,)
    w_radius: float
    seed: int
    estimation_end: int | None = None   # first control-phase step (estimation ran on t < this)
    estimate: object | None = None      # EstimateReport for the unknown-system loop

    @property
    def T(self) -> int:
        return int(self.times.shape[0])

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.stage_costs))

    @property
    def energy(self) -> float:
        return float(np.sum(self.disturbances ** 2))

    @property
    def cumulative_costs(self) -> np.ndarray:
        return np.cumsum(self.stage_costs)

    @property
    def cumulative_energies(self) -> np.ndarray:
        return np.cumsum(np.sum(self.disturbances ** 2, axis=1))

    def preview_energy(self, t: int, drop_last: bool = False) -> float:
        """Energy of the window served at step t (optionally without its final entry)."""
        win = self.previews[t - 1]
        if drop_last and win.shape[0] > 0:
            win = win[:-1]
        return float(np.sum(win ** 2))

    def suffix_cost(self, start: int) -> float:
        return float(np.sum(self.stage_costs[start - 1:]))

    def suffix_energy(self, start: int) -> float:
        return float(np.sum(self.disturbances[start - 1:] ** 2))
