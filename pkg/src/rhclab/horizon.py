"""Finite-horizon cost-to-go solver with disturbance preview.

Minimises ``sum_{k=0}^{M-1} c_{t+k}(x_k, u_k)`` subject to the system
dynamics driven by a known disturbance window, with the controls constrained
to a box.  Linear dynamics with quadratic costs and an interior minimiser are
solved exactly through the stacked normal equations; everything else runs
projected gradient descent with an adjoint-recursion gradient and
backtracking line search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Box, ConfigurationError, CostModel, SystemModel, unpack_linear_theta

GRAD_TOL = 1e-8
MAX_ITERS = 10_000


@dataclass(frozen=True)
class HorizonSolution:
    controls: np.ndarray          # (M, m)
    value: float
    predicted_states: np.ndarray  # (M+1, n)
    status: str                   # "exact" | "converged" | "max-iterations"
    residual: float               # projected-gradient fixed-point residual at exit


@dataclass(frozen=True)
class _ExactPlan:
    """Stacked matrices for the affine-quadratic horizon problem.

    With z the stacked control vector, the predicted states are
    ``x_k = offsets_k + F_k z`` and the objective is
    ``z'Pz + 2 q(x0, W)'z + const``; P is independent of (x0, W) so it is
    factorised once per (system, cost, M).
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    M: int
    F: np.ndarray        # (M, n, M*m) prediction blocks
    P: np.ndarray        # (M*m, M*m)
    P_chol: tuple
    A_pows: np.ndarray   # (M, n, n) A^k


def _build_plan(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, M: int) -> _ExactPlan:
    import scipy.linalg as sla

    n, m = B.shape
    A_pows = np.empty((M, n, n))
    A_pows[0] = np.eye(n)
    for k in range(1, M):
        A_pows[k] = A @ A_pows[k - 1]
    F = np.zeros((M, n, M * m))
    for k in range(1, M):
        for i in range(k):
            F[k][:, i * m:(i + 1) * m] = A_pows[k - 1 - i] @ B
    P = np.zeros((M * m, M * m))
    for k in range(M):
        P += F[k].T @ Q @ F[k]
        P[k * m:(k + 1) * m, k * m:(k + 1) * m] += R
    chol = sla.cho_factor(P)
    return _ExactPlan(A=A, B=B, Q=Q, R=R, M=M, F=F, P=P, P_chol=chol, A_pows=A_pows)


def _plan_offsets(plan: _ExactPlan, x0: np.ndarray, previews: np.ndarray) -> np.ndarray:
    M, n = plan.M, plan.A.shape[0]
    d = np.empty((M, n))
    d[0] = x0
    for k in range(1, M):
        d[k] = plan.A @ d[k - 1] + previews[k - 1]
    return d


def _plan_solve(plan: _ExactPlan, x0: np.ndarray, previews: np.ndarray) -> np.ndarray:
    import scipy.linalg as sla

    d = _plan_offsets(plan, x0, previews)
    q = np.zeros(plan.M * plan.B.shape[1])
    for k in range(plan.M):
        q += plan.F[k].T @ (plan.Q @ d[k])
    z = sla.cho_solve(plan.P_chol, -q)
    return z.reshape(plan.M, plan.B.shape[1])


_PLAN_CACHE: dict = {}


def _get_plan(model: SystemModel, costs: CostModel, theta: np.ndarray, M: int) -> _ExactPlan:
    key = (theta.tobytes(), costs.Q.tobytes(), costs.R.tobytes(), M, model.n, model.m)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        A, B = unpack_linear_theta(theta, model.n, model.m)
        plan = _build_plan(A, B, costs.Q, costs.R, M)
        if len(_PLAN_CACHE) > 64:
            _PLAN_CACHE.clear()
        _PLAN_CACHE[key] = plan
    return plan


def _horizon_cost(model: SystemModel, costs: CostModel, t: int, x0: np.ndarray,
                  controls: np.ndarray, previews: np.ndarray, theta: np.ndarray):
    states = model.rollout(x0, controls, previews, theta=theta)
    total = 0.0
    for k in range(controls.shape[0]):
        total += costs.stage_cost(t + k, states[k], controls[k])
    return total, states


def _objective_and_gradient(model, costs, t, x0, controls, previews, theta):
    """Adjoint recursion: grad_u[k] = dc/du_k + f_u' lambda_{k+1}."""
    M = controls.shape[0]
    total, states = _horizon_cost(model, costs, t, x0, controls, previews, theta)
    lam = np.zeros(model.n)
    grad = np.empty_like(controls)
    for k in range(M - 1, -1, -1):
        gx, gu = costs.gradients(t + k, states[k], controls[k])
        fx, fu = model.jacobians(states[k], controls[k], previews[k], theta=theta)
        grad[k] = gu + fu.T @ lam
        lam = gx + fx.T @ lam
    return total, grad


def _projected_gradient(model, costs, t, x0, previews, box, theta, z0,
                        tol=GRAD_TOL, max_iter=MAX_ITERS):
    """Projected gradient with Armijo backtracking on the control stack.

    Convergence is the fixed-point residual |z - proj(z - grad)| <= tol; an
    iterate whose line search stalls (or that stops making measurable
    progress) still counts as converged within 100*tol, which absorbs the
    noise floor of finite-difference jacobians on custom dynamics.
    """
    z = box.project(z0.reshape(-1, model.m)).astype(float)
    val, grad = _objective_and_gradient(model, costs, t, x0, z, previews, theta)
    step = 1.0
    status = "max-iterations"
    residual = np.inf
    stall = 0
    for _ in range(max_iter):
        residual = float(np.max(np.abs(z - box.project(z - grad)))) if z.size else 0.0
        if residual <= tol:
            status = "converged"
            break
        accepted = False
        s = min(step * 2.0, 1e8)
        while s >= 1e-14:
            z_new = box.project(z - s * grad)
            if not np.any(z_new != z):
                s *= 0.5
                continue
            decrease = float(np.sum(grad * (z - z_new)))
            val_new, _ = _horizon_cost(model, costs, t, x0, z_new, previews, theta)
            if val_new <= val - 1e-4 * decrease:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            status = "converged" if residual <= 100 * tol else "max-iterations"
            break
        progress = val - val_new
        step = s
        z = z_new
        val, grad = _objective_and_gradient(model, costs, t, x0, z, previews, theta)
        if progress <= 1e-14 * max(1.0, abs(val)):
            stall += 1
            if stall >= 3:
                status = "converged" if residual <= 100 * tol else "max-iterations"
                break
        else:
            stall = 0
    return z, status, residual


def solve_horizon(model: SystemModel, costs: CostModel, t: int, x0, previews,
                  box: Box, theta=None, tol: float = GRAD_TOL,
                  max_iter: int = MAX_ITERS) -> HorizonSolution:
    """Minimise the M-step cost-to-go for the previewed disturbance window.

    The horizon M is the preview length.  ``theta`` overrides the model
    parameter used for prediction (the estimated-system optimisation); the
    returned value is always recomputed by rolling the controls out against
    the preview, so the reported value is consistent with the dynamics.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    previews = np.asarray(previews, dtype=float)
    if previews.ndim == 1:
        previews = previews.reshape(-1, 1)
    M = previews.shape[0]
    if M < 1:
        raise ConfigurationError("horizon must be at least 1")
    if previews.shape[1] != model.n or x0.shape[0] != model.n:
        raise ConfigurationError("preview or state dimension does not match the system")
    if box.dim != model.m:
        raise ConfigurationError("control box dimension does not match the system")
    th = model.theta if theta is None else np.asarray(theta, dtype=float).reshape(-1)

    status = None
    residual = 0.0
    controls = None
    if model.kind == "linear" and costs.kind == "quadratic":
        plan = _get_plan(model, costs, th, M)
        z = _plan_solve(plan, x0, previews)
        if box.strictly_inside(z):  # bounds broadcast over the stacked rows
            controls, status = z, "exact"
        else:
            controls, status, residual = _projected_gradient(
                model, costs, t, x0, previews, box, th, box.project(z), tol, max_iter)
    else:
        z0 = np.zeros((M, model.m))
        controls, status, residual = _projected_gradient(
            model, costs, t, x0, previews, box, th, z0, tol, max_iter)

    value, states = _horizon_cost(model, costs, t, x0, controls, previews, th)
    return HorizonSolution(controls=controls, value=float(value), predicted_states=states,
                           status=status, residual=float(residual))


def horizon_value(model, costs, t, x0, previews, box, theta=None) -> float:
    """Optimal M-step cost-to-go (the solution value alone)."""
    return solve_horizon(model, costs, t, x0, previews, box, theta=theta).value


def first_control(model, costs, t, x0, previews, box, theta=None) -> np.ndarray:
    """The receding-horizon feedback: first element of the optimal sequence."""
    return solve_horizon(model, costs, t, x0, previews, box, theta=theta).controls[0]
