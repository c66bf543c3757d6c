"""Bounded disturbance sources with a uniform windowed-preview interface.

Every source emits vectors with two-norm at most ``w_radius``.  Non-adaptive
kinds are pointwise functions of the step index, so overlapping preview
windows agree and runs are reproducible from the seed alone.  The greedy
adversarial kind reacts to the realized state/control and therefore refuses
to serve previews.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError, CostModel, SystemModel

_KIND_TAG = {"uniform-random": 11}
_KINDS = ("zero", "constant", "sinusoid", "uniform-random", "sign-flip", "impulse",
          "greedy-adversarial")


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: str
    w_radius: float
    dim: int = 1
    amplitude: float | None = None       # defaults to w_radius
    period: float = 20.0                 # sinusoid
    flip_interval: int = 2               # sign-flip
    time: int = 5                        # impulse step
    direction: tuple | None = None       # unit direction for directional kinds
    seed: int = 0
    boundary_points: int = 64            # greedy search grid on the sphere

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown disturbance kind {self.kind!r}")
        if self.w_radius < 0:
            raise ConfigurationError("w_radius must be nonnegative")
        amp = self.w_radius if self.amplitude is None else float(self.amplitude)
        if abs(amp) > self.w_radius + 1e-12:
            raise ConfigurationError("amplitude exceeds the disturbance norm bound")
        object.__setattr__(self, "amplitude", amp)
        if self.direction is None:
            d = np.zeros(self.dim)
            if self.dim:
                d[0] = 1.0
        else:
            d = np.asarray(self.direction, dtype=float).reshape(-1)
            if d.shape != (self.dim,):
                raise ConfigurationError("direction dimension mismatch")
            nrm = np.linalg.norm(d)
            if nrm == 0:
                raise ConfigurationError("direction must be nonzero")
            d = d / nrm
        object.__setattr__(self, "direction", tuple(float(v) for v in d))


def energy(disturbances) -> float:
    """Total squared two-norm of a disturbance sequence."""
    arr = np.asarray(disturbances, dtype=float)
    return float(np.sum(arr ** 2))


class DisturbanceSource:
    """Realization/preview access for one run of length ``horizon_end`` steps.

    ``window(t, M)`` serves the M-step preview starting at t, zero-padded past
    the run end.  ``realized(t, ...)`` is the disturbance that actually hits
    the system at step t.
    """

    def __init__(self, spec: DisturbanceSpec, run_length: int,
                 model: SystemModel | None = None, costs: CostModel | None = None):
        self.spec = spec
        self.run_length = int(run_length)
        self._model = model
        self._costs = costs
        if spec.kind == "greedy-adversarial" and (model is None or costs is None):
            raise ConfigurationError("greedy-adversarial source needs the system and cost models")
        self._dirs = None
        self._cache: dict[int, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def adaptive(self) -> bool:
        return self.spec.kind == "greedy-adversarial"

    def _at(self, t: int) -> np.ndarray:
        cached = self._cache.get(t)
        if cached is not None:
            return cached
        out = self._compute(t)
        self._cache[t] = out
        return out

    def _compute(self, t: int) -> np.ndarray:
        s = self.spec
        if t > self.run_length:
            return np.zeros(s.dim)
        d = np.asarray(s.direction)
        if s.kind == "zero":
            return np.zeros(s.dim)
        if s.kind == "constant":
            return s.amplitude * d
        if s.kind == "sinusoid":
            return s.amplitude * np.sin(2.0 * np.pi * t / s.period) * d
        if s.kind == "sign-flip":
            sign = 1.0 if ((t - 1) // s.flip_interval) % 2 == 0 else -1.0
            return sign * s.amplitude * d
        if s.kind == "impulse":
            return s.amplitude * d if t == s.time else np.zeros(s.dim)
        if s.kind == "uniform-random":
            rng = np.random.default_rng([s.seed, _KIND_TAG["uniform-random"], t])
            vec = rng.standard_normal(s.dim)
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                return np.zeros(s.dim)
            radius = s.w_radius * rng.uniform() ** (1.0 / s.dim)
            return radius * vec / nrm
        raise ConfigurationError(f"kind {s.kind!r} has no pointwise realization")

    def window(self, t: int, M: int) -> np.ndarray:
        if t < 1:
            raise ConfigurationError("time indices are 1-based")
        if self.adaptive:
            raise ConfigurationError(
                "greedy-adversarial disturbances cannot be previewed; use a no-preview controller")
        return np.stack([self._at(t + k) for k in range(M)]) if M else np.zeros((0, self.dim))

    def _boundary_directions(self) -> np.ndarray:
        if self._dirs is not None:
            return self._dirs
        s = self.spec
        if s.dim == 1:
            dirs = np.array([[1.0], [-1.0]])
        elif s.dim == 2:
            ang = 2.0 * np.pi * np.arange(s.boundary_points) / s.boundary_points
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        else:
            rng = np.random.default_rng([s.seed, 37])
            raw = rng.standard_normal((s.boundary_points, s.dim))
            dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        self._dirs = dirs
        return dirs

    def realized(self, t: int, state=None, control=None) -> np.ndarray:
        if not self.adaptive:
            return self._at(t)
        if t > self.run_length:
            return np.zeros(self.dim)
        if state is None or control is None:
            raise ConfigurationError("greedy-adversarial source needs the current state and control")
        s = self.spec
        # sup over the ball approximated on the sphere: score each boundary
        # candidate by the next-step stage cost at zero control
        best, best_val = np.zeros(s.dim), -np.inf
        zero_u = np.zeros(self._model.m)
        for d in self._boundary_directions():
            w = s.w_radius * d
            nxt = self._model.step(state, control, w)
            val = self._costs.stage_cost(t + 1, nxt, zero_u)
            if val > best_val:
                best, best_val = w, val
        return best


def build_source(spec: DisturbanceSpec, run_length: int, model: SystemModel | None = None,
                 costs: CostModel | None = None) -> DisturbanceSource:
    return DisturbanceSource(spec, run_length, model=model, costs=costs)


class ShiftedSource:
    """View of another source with its time axis advanced by a fixed offset."""

    def __init__(self, base: DisturbanceSource, offset: int):
        self._base = base
        self.offset = int(offset)
        self.dim = base.dim
        self.adaptive = base.adaptive
        self.spec = base.spec

    def window(self, t: int, M: int) -> np.ndarray:
        return self._base.window(t + self.offset, M)

    def realized(self, t: int, state=None, control=None) -> np.ndarray:
        return self._base.realized(t + self.offset, state=state, control=control)
