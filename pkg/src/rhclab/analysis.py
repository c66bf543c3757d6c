"""Closed-form theory constants, the attenuation-regret metric, and empirical
certification of the per-step inequalities along simulated trajectories.

Constant naming: ``alpha_lo``/``alpha_hi`` bound the stage cost and the
horizon value against ``sigma``; ``gamma_bar`` is the best attenuation the
value bound admits; ``decay`` is the geometric contraction factor of the
closed-loop value recursion and ``margin`` its contraction margin;
``attenuation_threshold`` is the level above which the regret stays bounded.
The ``*_worst`` family is the analogous set for the worst-case (no-preview)
controller.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .horizon import _get_plan, _horizon_cost, _plan_solve, solve_horizon
from .minmax import solve_minmax
from .model import Box, ConfigurationError, CostModel, SystemModel, Trajectory

RESIDUAL_TOL = 1e-6

CHECKS = ("value-lower-bound", "value-decrease", "value-decrease-estimated",
          "value-decrease-minmax", "cost-envelope")


class CertificationError(RuntimeError):
    """A bound family could not be certified for the scenario."""


# ---------------------------------------------------------------------------
# closed-form constants
# ---------------------------------------------------------------------------

def min_horizon(alpha_lo: float, alpha_hi: float) -> int:
    """Smallest horizon strictly exceeding (alpha_hi/alpha_lo)^2 + 1."""
    if alpha_lo <= 0:
        raise ConfigurationError("alpha_lo must be positive")
    if alpha_hi < alpha_lo:
        raise ConfigurationError("alpha_hi must be at least alpha_lo")
    x = (alpha_hi / alpha_lo) ** 2 + 1.0
    return int(math.floor(x + 1e-12)) + 1


def value_decrease_constants(alpha_lo: float, alpha_hi: float, gamma_bar: float,
                             M: int) -> tuple[float, float]:
    """Coefficients (on sigma(x), on the previewed energy) of the value-decrease bound."""
    if M < 2:
        raise ConfigurationError("horizon must be at least 2")
    drop_state = alpha_hi ** 2 / (alpha_lo * (M - 1)) - alpha_lo
    drop_energy = gamma_bar * (alpha_hi / (alpha_lo * (M - 1)) + 1.0)
    return drop_state, drop_energy


def margin_interval_sup(alpha_lo: float, alpha_hi: float, M: int) -> float:
    return alpha_lo - alpha_hi ** 2 / ((M - 1) * alpha_lo)


def choose_decay(alpha_lo: float, alpha_hi: float, M: int,
                 margin: float | None = None) -> tuple[float, float]:
    """Pick the contraction margin and the decay rate a = 1 - margin/alpha_hi.

    Defaults to 80% of the margin interval's sup; the decay sits at its lower
    endpoint, which minimises the attenuation threshold's 1/(1-a)^2 blow-up.
    """
    sup = margin_interval_sup(alpha_lo, alpha_hi, M)
    if sup <= 0:
        raise ConfigurationError(
            f"horizon {M} is below the threshold {min_horizon(alpha_lo, alpha_hi)}: "
            "no valid contraction margin exists")
    eps = 0.8 * sup if margin is None else float(margin)
    if not (0.0 < eps < sup):
        raise ConfigurationError(f"margin must lie in (0, {sup:.6g})")
    a = 1.0 - eps / alpha_hi
    if not (0.0 < a < 1.0):
        raise ConfigurationError("decay fell outside (0, 1); check the bound constants")
    return eps, a


def disturbance_gain(alpha_lo: float, alpha_hi: float, gamma_bar: float) -> float:
    """Gain b of the value recursion V' <= a V + b * (window energy)."""
    return gamma_bar * (alpha_lo / alpha_hi + 1.0)


def attenuation_threshold(alpha_lo: float, alpha_hi: float, gamma_bar: float,
                          M: int, a: float) -> float:
    """Attenuation level above which the preview controller's regret is bounded."""
    if not 0.0 < a < 1.0:
        raise ConfigurationError("decay must lie in (0, 1)")
    b = disturbance_gain(alpha_lo, alpha_hi, gamma_bar)
    return b * ((M - 1) * (1.0 - a) + 1.0) / (1.0 - a) ** 2


def cost_envelope(alpha_hi: float, gamma_bar: float, gain: float, a: float,
                  M: int, H: int, t: int = 1) -> tuple[float, float, np.ndarray]:
    """Stage-cost envelope at time t+H: scale*exp(-rate*H)*sigma(x_t) + sum coeff_j |w_j|^2.

    Returns (scale, rate, coeffs) with coeffs[j - t] covering j in
    [t, t+H+M-2]: a flat head over the first window, geometric decay across
    the middle band, and the undamped tail for the most recent disturbances.
    """
    if H < M:
        raise ConfigurationError("the envelope needs H >= M")
    scale = alpha_hi
    rate = -math.log(a)
    coeffs = np.empty(H + M - 1)
    head = gain * a ** (H - M) / (1.0 - a) + a ** H * gamma_bar
    for j in range(t, t + H + M - 1):
        if j <= t + M - 1:
            coeffs[j - t] = head
        elif j <= t + H - 1:
            coeffs[j - t] = gain / (1.0 - a) * a ** (t + H - j - 1)
        else:
            coeffs[j - t] = gain / (1.0 - a)
    return scale, rate, coeffs


def worst_case_decrease_constants(alpha_lo: float, alpha_hi_worst: float,
                                  gamma_bar_worst: float, M: int) -> tuple[float, float]:
    if M < 2:
        raise ConfigurationError("horizon must be at least 2")
    drop_state = alpha_hi_worst ** 2 / ((M - 1) * alpha_lo) - alpha_lo
    drop_energy = gamma_bar_worst * (alpha_hi_worst / ((M - 1) * alpha_lo) + 1.0)
    return drop_state, drop_energy


def worst_case_threshold(alpha_lo: float, alpha_hi_worst: float,
                         gamma_bar_worst: float, a: float) -> float:
    """Attenuation threshold of the worst-case controller (scored against T*max|w|^2)."""
    if a >= 1.0:
        raise ConfigurationError("decay must be below 1")
    return gamma_bar_worst / (1.0 - a) * (alpha_lo / alpha_hi_worst + 1.0)


def estimate_sensitivity_constants(alpha_value: float, alpha_feedback: float,
                                   alpha_c: float, lipschitz_gain: float, theta_bound: float,
                                   M: int, alpha_lo: float, alpha_hi: float,
                                   margin: float, a: float, H: int) -> tuple[float, float]:
    """Per-step sensitivities to the parameter-estimate error.

    Returns (value gain, cost gain): coefficients multiplying |theta_hat -
    theta| in the control-phase value-decrease bound and in the H-step stage
    cost envelope respectively.
    """
    amplification = max((lipschitz_gain * theta_bound) ** (k + 1) for k in range(max(M - 1, 1)))
    value_gain = 2.0 * alpha_value + alpha_c * amplification * alpha_feedback * (M - 1) \
        * (alpha_hi / (alpha_lo * (M - 1)) + 1.0)
    c = alpha_value * (2.0 + margin / alpha_hi) + alpha_c * amplification * alpha_feedback \
        * (M - 1) * ((alpha_lo - margin) / alpha_hi + 1.0)
    cost_gain = c * (1.0 - a ** H) / (1.0 - a) + a ** H * alpha_value
    return value_gain, cost_gain


def attenuation_ratio_diagnostic(alpha_lo: float, alpha_hi: float) -> float:
    """Scale factor relating the threshold to the best attenuation (inf when degenerate)."""
    r = (alpha_hi / alpha_lo) ** 2
    c = math.ceil(r - 1e-12)
    denom = alpha_hi * (c / r - 1.0)
    if denom <= 0:
        return math.inf
    return c * alpha_lo / denom


# ---------------------------------------------------------------------------
# constants report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantsReport:
    alpha_lo: float
    alpha_hi: float
    gamma_bar: float
    horizon: int
    min_horizon: int
    margin_max: float
    margin: float
    decay: float
    disturbance_gain: float
    value_drop_state: float
    value_drop_energy: float
    attenuation_threshold: float
    envelope_scale: float
    envelope_rate: float
    bounds_source: str = "config"
    theta_value_gain: float | None = None
    theta_cost_gain: float | None = None
    alpha_hi_worst: float | None = None
    gamma_bar_worst: float | None = None
    min_horizon_worst: int | None = None
    margin_worst: float | None = None
    decay_worst: float | None = None
    value_drop_state_worst: float | None = None
    value_drop_energy_worst: float | None = None
    attenuation_threshold_worst: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def derive_constants(alpha_lo: float, alpha_hi: float, gamma_bar: float, M: int,
                     margin: float | None = None, bounds_source: str = "config",
                     alpha_hi_worst: float | None = None,
                     gamma_bar_worst: float | None = None,
                     margin_worst: float | None = None) -> ConstantsReport:
    """Assemble every derived constant for horizon M, validating the premises."""
    m_min = min_horizon(alpha_lo, alpha_hi)
    if M < m_min:
        raise ConfigurationError(
            f"horizon {M} is below the minimum horizon {m_min} required by the "
            f"bound constants (alpha_lo={alpha_lo:.6g}, alpha_hi={alpha_hi:.6g})")
    sup = margin_interval_sup(alpha_lo, alpha_hi, M)
    eps, a = choose_decay(alpha_lo, alpha_hi, M, margin)
    drop_state, drop_energy = value_decrease_constants(alpha_lo, alpha_hi, gamma_bar, M)
    b = disturbance_gain(alpha_lo, alpha_hi, gamma_bar)
    gamma_crit = attenuation_threshold(alpha_lo, alpha_hi, gamma_bar, M, a)
    kwargs = {}
    if alpha_hi_worst is not None:
        if gamma_bar_worst is None:
            raise ConfigurationError("worst-case bounds need both alpha_hi_worst and gamma_bar_worst")
        m_min_w = min_horizon(alpha_lo, alpha_hi_worst)
        if M < m_min_w:
            raise ConfigurationError(
                f"horizon {M} is below the worst-case minimum horizon {m_min_w}")
        eps_w, a_w = choose_decay(alpha_lo, alpha_hi_worst, M, margin_worst)
        dsw, dew = worst_case_decrease_constants(alpha_lo, alpha_hi_worst, gamma_bar_worst, M)
        kwargs = dict(alpha_hi_worst=alpha_hi_worst, gamma_bar_worst=gamma_bar_worst,
                      min_horizon_worst=m_min_w, margin_worst=eps_w, decay_worst=a_w,
                      value_drop_state_worst=dsw, value_drop_energy_worst=dew,
                      attenuation_threshold_worst=worst_case_threshold(
                          alpha_lo, alpha_hi_worst, gamma_bar_worst, a_w))
    report = ConstantsReport(alpha_lo=alpha_lo, alpha_hi=alpha_hi, gamma_bar=gamma_bar,
                             horizon=M, min_horizon=m_min, margin_max=sup, margin=eps,
                             decay=a, disturbance_gain=b, value_drop_state=drop_state,
                             value_drop_energy=drop_energy,
                             attenuation_threshold=gamma_crit, envelope_scale=alpha_hi,
                             envelope_rate=-math.log(a), bounds_source=bounds_source,
                             **kwargs)
    for name, value in report.as_dict().items():
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigurationError(f"derived constant {name} is not finite")
    return report


# ---------------------------------------------------------------------------
# attenuation regret
# ---------------------------------------------------------------------------

def attenuation_regret(trajectory: Trajectory, gamma: float, start: int = 1) -> float:
    """Positive part of (cumulative cost - gamma * disturbance energy) from step ``start`` on."""
    if gamma < 0:
        raise ConfigurationError("gamma must be nonnegative")
    return max(0.0, trajectory.suffix_cost(start) - gamma * trajectory.suffix_energy(start))


def regret_curve(trajectory: Trajectory, gammas) -> np.ndarray:
    return np.array([attenuation_regret(trajectory, g) for g in gammas])


# ---------------------------------------------------------------------------
# trajectory certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificationReport:
    check: str
    steps: np.ndarray
    residuals: np.ndarray   # LHS - RHS; nonpositive entries satisfy the inequality
    tolerance: float

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else -math.inf

    @property
    def violations(self) -> np.ndarray:
        return self.steps[self.residuals > self.tolerance]

    @property
    def passed(self) -> bool:
        return self.violations.size == 0


def _scaled_tolerance(values: np.ndarray) -> float:
    scale = np.nanmax(np.abs(values)) if values.size else 0.0
    return RESIDUAL_TOL * max(1.0, scale / 1e3)


def certify(trajectory: Trajectory, check: str, constants: ConstantsReport,
            costs: CostModel, theta_error: float | None = None,
            anchor: int = 1, H_max: int | None = None) -> CertificationReport:
    """Evaluate one per-step inequality along a trajectory (residual = LHS - RHS)."""
    if check not in CHECKS:
        raise ConfigurationError(f"unknown check {check!r}; expected one of {CHECKS}")
    sigma = np.array([costs.sigma(x) for x in trajectory.states])
    tol = _scaled_tolerance(trajectory.values)

    if check == "value-lower-bound":
        start = trajectory.estimation_end or 1
        steps = np.arange(start, trajectory.T + 1)
        res = np.array([constants.alpha_lo * sigma[t - 1] - trajectory.values[t - 1]
                        for t in steps])
        return CertificationReport(check, steps, res, tol)

    if check == "value-decrease":
        if trajectory.controller != "known-preview":
            raise ConfigurationError("the preview value-decrease check needs a known-preview run")
        steps = np.arange(1, trajectory.T)
        res = np.array([
            (trajectory.values[t] - trajectory.values[t - 1])
            - constants.value_drop_state * sigma[t - 1]
            - constants.value_drop_energy * trajectory.preview_energy(t)
            for t in steps])
        return CertificationReport(check, steps, res, tol)

    if check == "value-decrease-estimated":
        if trajectory.controller != "unknown-preview" or trajectory.estimation_end is None:
            raise ConfigurationError("the estimated-system check needs an unknown-system run")
        if constants.theta_value_gain is None:
            raise ConfigurationError("constants lack the parameter-sensitivity gains")
        if theta_error is None:
            if trajectory.estimate is None or trajectory.estimate.actual_error is None:
                raise ConfigurationError("theta_error unavailable; pass it explicitly")
            theta_error = trajectory.estimate.actual_error
        slack = constants.theta_value_gain * theta_error
        steps = np.arange(trajectory.estimation_end, trajectory.T)
        res = np.array([
            (trajectory.values[t] - trajectory.values[t - 1])
            - constants.value_drop_state * sigma[t - 1]
            - constants.value_drop_energy * trajectory.preview_energy(t)
            - slack
            for t in steps])
        return CertificationReport(check, steps, res, tol)

    if check == "value-decrease-minmax":
        if trajectory.controller != "minmax":
            raise ConfigurationError("the worst-case check needs a min-max run")
        if constants.value_drop_state_worst is None:
            raise ConfigurationError("constants lack the worst-case bound family")
        peak = trajectory.w_radius ** 2
        steps = np.arange(1, trajectory.T)
        res = np.array([
            (trajectory.values[t] - trajectory.values[t - 1])
            - constants.value_drop_state_worst * sigma[t - 1]
            - constants.value_drop_energy_worst * peak
            for t in steps])
        return CertificationReport(check, steps, res, tol)

    # cost-envelope
    if trajectory.controller != "known-preview":
        raise ConfigurationError("the cost-envelope check needs a known-preview run")
    M = constants.horizon
    H_hi = H_max if H_max is not None else trajectory.T - anchor
    Hs = np.arange(M, H_hi + 1)
    if Hs.size == 0:
        raise ConfigurationError("no admissible H in the requested range")
    w_sq = np.sum(trajectory.disturbances ** 2, axis=1)
    res = np.empty(Hs.size)
    for i, H in enumerate(Hs):
        scale, rate, coeffs = cost_envelope(constants.alpha_hi, constants.gamma_bar,
                                            constants.disturbance_gain, constants.decay,
                                            M, int(H), t=anchor)
        bound = scale * math.exp(-rate * H) * sigma[anchor - 1]
        for j in range(anchor, anchor + int(H) + M - 1):
            if j <= trajectory.T:  # later windows are zero-padded
                bound += coeffs[j - anchor] * w_sq[j - 1]
        res[i] = trajectory.stage_costs[anchor + int(H) - 1] - bound
    tol = _scaled_tolerance(trajectory.stage_costs)
    return CertificationReport("cost-envelope", Hs, res, tol)


# ---------------------------------------------------------------------------
# value-bound certification (produces alpha_hi / gamma_bar)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueBoundCertificate:
    alpha_hi: float
    gamma_bar: float
    method: str
    samples: int


def _exact_quadratic_form(model: SystemModel, costs: CostModel, M: int) -> np.ndarray:
    """Quadratic form of the unconstrained horizon value in (x, w_0..w_{M-2})."""
    n = model.n
    dim = n + (M - 1) * n
    plan = _get_plan(model, costs, model.theta, M)

    def value(y):
        x = y[:n]
        previews = np.zeros((M, n))
        if M > 1:
            previews[:M - 1] = y[n:].reshape(M - 1, n)
        z = _plan_solve(plan, x, previews)
        val, _ = _horizon_cost(model, costs, 1, x, z, previews, model.theta)
        return val

    basis = np.eye(dim)
    diag = np.array([value(basis[i]) for i in range(dim)])
    form = np.diag(diag)
    for i in range(dim):
        for j in range(i + 1, dim):
            form[i, j] = form[j, i] = 0.5 * (value(basis[i] + basis[j]) - diag[i] - diag[j])
    return form


GAMMA_SCALE_GRID = (1.5, 2.0, 3.0, 5.0, 8.0, 12.0)


def certify_value_bounds(model: SystemModel, costs: CostModel, M: int, box: Box,
                         samples: int = 160, seed: int = 0, radius: float = 3.0,
                         w_radius: float = 1.0, gamma_scale="auto") -> ValueBoundCertificate:
    """Smallest workable (alpha_hi, gamma_bar) with V <= alpha_hi*sigma + gamma_bar*energy.

    Linear-quadratic scenarios use the exact quadratic form of the
    unconstrained value (valid wherever the box stays inactive): the bound
    holds globally iff diag(alpha*I, gamma*I) dominates the form, so alpha is
    the top eigenvalue of a Schur complement once gamma is fixed.  A larger
    gamma absorbs the state/disturbance coupling and shrinks alpha, so
    ``gamma_scale="auto"`` picks the multiplier of lambda_max of the
    disturbance block that minimises the required horizon (tie-break: the
    tighter gamma).  Anything else is certified from solved samples with
    max-ratio inflation and rejected when the ratio grows with the state
    magnitude.
    """
    if M < 1:
        raise ConfigurationError("horizon must be at least 1")
    if model.kind == "linear" and costs.kind == "quadratic":
        n = model.n
        form = _exact_quadratic_form(model, costs, M)
        xx = form[:n, :n]
        xw = form[:n, n:]
        ww = form[n:, n:]
        lam_ww = max(float(np.max(np.linalg.eigvalsh(ww))) if ww.size else 0.0, 1e-9)

        def pair(mult: float) -> tuple[float, float]:
            gamma = mult * lam_ww
            if ww.size:
                shifted = gamma * np.eye(ww.shape[0]) - ww
                middle = xx + xw @ np.linalg.solve(shifted, xw.T)
            else:
                middle = xx
            alpha = float(np.max(np.linalg.eigvalsh(middle))) * (1.0 + 1e-9) + 1e-12
            return max(alpha, costs.alpha_lo), gamma

        if gamma_scale == "auto":
            candidates = [pair(mult) for mult in GAMMA_SCALE_GRID]
            best_m = min(min_horizon(costs.alpha_lo, a) for a, _ in candidates)
            alpha, gamma = min((pair for pair in candidates
                                if min_horizon(costs.alpha_lo, pair[0]) == best_m),
                               key=lambda pair: pair[1])
        else:
            alpha, gamma = pair(float(gamma_scale))
        return ValueBoundCertificate(alpha_hi=alpha, gamma_bar=gamma,
                                     method="certified-exact", samples=0)

    if radius <= 0 and w_radius <= 0:
        raise ConfigurationError("degenerate sample set: nothing but the origin to certify on")
    rng = np.random.default_rng(seed)
    sig, eng, vals = [], [], []
    for i in range(samples):
        # sample modes: pure state, pure disturbance, mixed, boundary-aligned,
        # and large state with a small disturbance (where the coupling between
        # the two features is at its worst relative to the energy budget)
        mode = i % 5
        x = np.zeros(model.n)
        w = np.zeros((M, model.n))
        if mode != 1:
            d = rng.standard_normal(model.n)
            d /= max(np.linalg.norm(d), 1e-12)
            scale = rng.uniform(0.6, 1.0) if mode in (3, 4) else rng.uniform(0.05, 1.0)
            x = radius * scale * d
        if mode != 0 and M > 1:  # the final window entry never reaches a costed state
            raw = rng.standard_normal((M - 1, model.n))
            nrm = np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-12)
            if mode == 3:
                mag = w_radius
            elif mode == 4:
                mag = w_radius * 0.2 * rng.uniform(0.05, 1.0, (M - 1, 1))
            else:
                mag = w_radius * rng.uniform(0.0, 1.0, (M - 1, 1))
            w[:M - 1] = raw / nrm * mag
        sol = solve_horizon(model, costs, 1, x, w, box)
        sig.append(costs.sigma(x))
        eng.append(float(np.sum(w[:M - 1] ** 2)))
        vals.append(sol.value)
    sig = np.array(sig)
    eng = np.array(eng)
    vals = np.array(vals)
    if np.max(sig) < 1e-12 and np.max(eng) < 1e-12:
        raise CertificationError("degenerate sample set: sigma and energy are all zero")
    # anchor each coefficient at its pure-feature max ratio, then trade a larger
    # gamma against the alpha the mixed samples require (same knob as the exact
    # path: extra gamma slack absorbs the state/disturbance coupling)
    pure_state = (sig > 1e-12) & (eng <= 1e-12)
    pure_dist = (eng > 1e-12) & (sig <= 1e-12)
    floor_alpha = max(costs.alpha_lo,
                      float(np.max(vals[pure_state] / sig[pure_state])) if np.any(pure_state)
                      else costs.alpha_lo)
    floor_gamma = max(1e-9, float(np.max(vals[pure_dist] / eng[pure_dist]))
                      if np.any(pure_dist) else 1e-9)
    mixed = sig > 1e-12

    def pair(mult: float) -> tuple[float, float]:
        gamma = floor_gamma * mult
        alpha = floor_alpha
        if np.any(mixed):
            alpha = max(alpha, float(np.max((vals[mixed] - gamma * eng[mixed]) / sig[mixed])))
        return alpha * (1.0 + 1e-9), gamma * (1.0 + 1e-9)

    candidates = [pair(mult) for mult in (1.0,) + GAMMA_SCALE_GRID]
    best_m = min(min_horizon(costs.alpha_lo, a) for a, _ in candidates)
    alpha_hi, gamma_bar = min((p for p in candidates
                               if min_horizon(costs.alpha_lo, p[0]) == best_m),
                              key=lambda p: p[1])
    # reject families whose required alpha grows with the state magnitude
    if np.count_nonzero(mixed) >= 8:
        req = (vals[mixed] - gamma_bar * eng[mixed]) / sig[mixed]
        order = np.argsort(sig[mixed])
        half = order.shape[0] // 2
        lo_req = max(float(np.max(req[order[:half]])), costs.alpha_lo)
        hi_req = max(float(np.max(req[order[half:]])), costs.alpha_lo)
        if hi_req > 1.25 * lo_req and hi_req > lo_req + 1e-9:
            raise CertificationError(
                "value grows faster than sigma; no affine bound family certifies this scenario")
    # the sampled certificate is empirical; a small headroom covers couplings
    # between the sampled points
    return ValueBoundCertificate(alpha_hi=float(alpha_hi) * 1.05,
                                 gamma_bar=float(gamma_bar) * 1.02,
                                 method="certified-sampled", samples=samples)


def certify_minmax_value_bounds(model: SystemModel, costs: CostModel, M: int, box: Box,
                                w_radius: float, samples: int = 48, seed: int = 0,
                                radius: float = 3.0) -> ValueBoundCertificate:
    """(alpha_hi_worst, gamma_bar_worst) with V_worst(x) <= alpha*sigma(x) + gamma*w_radius^2."""
    if w_radius <= 0:
        raise ConfigurationError("the worst-case bound family needs a positive disturbance radius")
    rng = np.random.default_rng(seed)
    xs = []
    for i in range(samples):
        d = rng.standard_normal(model.n)
        d /= max(np.linalg.norm(d), 1e-12)
        xs.append(radius * (i / (samples - 1.0)) * d if samples > 1 else np.zeros(model.n))
    sig = np.array([costs.sigma(x) for x in xs])
    vals = np.array([solve_minmax(model, costs, 1, x, M, box, w_radius).value for x in xs])
    feats = np.stack([sig, np.full(len(xs), w_radius ** 2)], axis=1)
    coef, *_ = np.linalg.lstsq(feats, vals, rcond=None)
    coef = np.maximum(coef, [costs.alpha_lo, 1e-9])
    pred = feats @ coef
    ratio = np.max(vals / np.maximum(pred, 1e-12))
    scale = ratio * (1.0 + 1e-9)
    return ValueBoundCertificate(alpha_hi=float(coef[0] * scale),
                                 gamma_bar=float(coef[1] * scale),
                                 method="certified-sampled", samples=samples)


def consistent_preview_horizon(model: SystemModel, costs: CostModel, box: Box,
                               start: int = 3, max_horizon: int = 24,
                               **cert_kwargs) -> tuple[int, ValueBoundCertificate]:
    """Smallest self-consistent horizon: M at least the min horizon its own certificate implies."""
    M = max(start, 2)
    for _ in range(max_horizon):
        cert = certify_value_bounds(model, costs, M, box, **cert_kwargs)
        needed = min_horizon(costs.alpha_lo, cert.alpha_hi)
        if M >= needed:
            return M, cert
        M = needed
    raise CertificationError("no self-consistent horizon found below the cap")


def consistent_minmax_horizon(model: SystemModel, costs: CostModel, box: Box,
                              w_radius: float, start: int = 3, max_horizon: int = 16,
                              **cert_kwargs) -> tuple[int, ValueBoundCertificate]:
    M = max(start, 2)
    for _ in range(max_horizon):
        cert = certify_minmax_value_bounds(model, costs, M, box, w_radius, **cert_kwargs)
        needed = min_horizon(costs.alpha_lo, cert.alpha_hi)
        if M >= needed:
            return M, cert
        M = needed
    raise CertificationError("no self-consistent worst-case horizon found below the cap")


def estimate_theta_sensitivity(model: SystemModel, costs: CostModel, M: int, box: Box,
                               radius: float = 2.0, w_radius: float = 0.5,
                               delta: float = 1e-4, samples: int = 24, seed: int = 0,
                               safety: float = 1.5) -> tuple[float, float]:
    """Finite-difference estimates of the value and feedback sensitivities to theta.

    Sampled over the given operating region; the returned constants are only
    as trustworthy as the sampling, hence the safety factor and the
    "empirical" label attached by callers.
    """
    rng = np.random.default_rng(seed)
    alpha_value = 0.0
    alpha_feedback = 0.0
    for _ in range(samples):
        xd = rng.standard_normal(model.n)
        xd /= max(np.linalg.norm(xd), 1e-12)
        x = radius * rng.uniform(0.0, 1.0) * xd
        w = np.zeros((M, model.n))
        if M > 1:
            raw = rng.standard_normal((M - 1, model.n))
            nrm = np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-12)
            w[:M - 1] = raw / nrm * (w_radius * rng.uniform(0.0, 1.0, (M - 1, 1)))
        dth = rng.standard_normal(model.p)
        dth /= max(np.linalg.norm(dth), 1e-12)
        base = solve_horizon(model, costs, 1, x, w, box)
        bumped = solve_horizon(model, costs, 1, x, w, box, theta=model.theta + delta * dth)
        alpha_value = max(alpha_value, abs(bumped.value - base.value) / delta)
        alpha_feedback = max(alpha_feedback,
                             float(np.linalg.norm(bumped.controls[0] - base.controls[0])) / delta)
    return safety * alpha_value, safety * alpha_feedback
