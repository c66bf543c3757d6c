import numpy as np
import pytest

import rhclab as rl
from rhclab.model import ConfigurationError


def test_zero_window():
    spec = rl.DisturbanceSpec(kind="zero", w_radius=1.0, dim=2)
    src = rl.build_source(spec, 100)
    assert np.array_equal(src.window(1, 4), np.zeros((4, 2)))


def test_constant_boundary():
    spec = rl.DisturbanceSpec(kind="constant", w_radius=0.5, dim=1)
    src = rl.build_source(spec, 100)
    assert np.all(src.window(1, 5) == 0.5)


def test_sign_flip_pattern():
    spec = rl.DisturbanceSpec(kind="sign-flip", w_radius=1.0, dim=1, flip_interval=2)
    src = rl.build_source(spec, 100)
    assert src.window(1, 4)[:, 0] == pytest.approx([1.0, 1.0, -1.0, -1.0])
    assert src.window(3, 4)[:, 0] == pytest.approx([-1.0, -1.0, 1.0, 1.0])


def test_impulse_kind():
    spec = rl.DisturbanceSpec(kind="impulse", w_radius=1.0, amplitude=0.25, time=5, dim=1)
    src = rl.build_source(spec, 100)
    win = src.window(3, 5)
    assert win[:, 0] == pytest.approx([0.0, 0.0, 0.25, 0.0, 0.0])


def test_amplitude_cannot_exceed_bound():
    with pytest.raises(ConfigurationError):
        rl.DisturbanceSpec(kind="constant", w_radius=0.5, amplitude=0.8, dim=1)
    with pytest.raises(ConfigurationError):
        rl.DisturbanceSpec(kind="warp", w_radius=0.5, dim=1)


def test_norm_bound_fuzz():
    kinds = [
        rl.DisturbanceSpec(kind="zero", w_radius=0.7, dim=2),
        rl.DisturbanceSpec(kind="constant", w_radius=0.7, dim=2, direction=(1.0, 2.0)),
        rl.DisturbanceSpec(kind="sinusoid", w_radius=0.7, dim=2, period=17.0),
        rl.DisturbanceSpec(kind="sign-flip", w_radius=0.7, dim=2, flip_interval=3),
        rl.DisturbanceSpec(kind="uniform-random", w_radius=0.7, dim=2, seed=21),
        rl.DisturbanceSpec(kind="impulse", w_radius=0.7, amplitude=0.7, time=500, dim=2),
    ]
    for spec in kinds:
        src = rl.build_source(spec, 20_000)
        for t in range(1, 10_001):
            assert np.linalg.norm(src.realized(t)) <= 0.7 + 1e-12


def test_greedy_norm_bound_fuzz():
    model = rl.linear_system([[1.0]], [[1.0]])
    costs = rl.quadratic_cost([[1.0]], [[1.0]])
    spec = rl.DisturbanceSpec(kind="greedy-adversarial", w_radius=0.4, dim=1, seed=3)
    src = rl.build_source(spec, 20_000, model=model, costs=costs)
    rng = np.random.default_rng(3)
    for t in range(1, 2_001):
        w = src.realized(t, state=rng.standard_normal(1), control=rng.standard_normal(1))
        assert np.linalg.norm(w) <= 0.4 + 1e-12


def test_window_consistency():
    for spec in (rl.DisturbanceSpec(kind="sinusoid", w_radius=1.0, dim=1, period=13.0),
                 rl.DisturbanceSpec(kind="uniform-random", w_radius=1.0, dim=2, seed=5),
                 rl.DisturbanceSpec(kind="sign-flip", w_radius=1.0, dim=1, flip_interval=4)):
        src = rl.build_source(spec, 200)
        for t in (1, 7, 50):
            assert np.array_equal(src.window(t, 6)[1:], src.window(t + 1, 5))


def test_window_pads_past_run_end():
    spec = rl.DisturbanceSpec(kind="constant", w_radius=1.0, dim=1)
    src = rl.build_source(spec, 10)
    win = src.window(9, 4)
    assert win[:, 0] == pytest.approx([1.0, 1.0, 0.0, 0.0])


def test_determinism_under_fixed_seed():
    spec = rl.DisturbanceSpec(kind="uniform-random", w_radius=1.0, dim=3, seed=8)
    a = rl.build_source(spec, 100)
    b = rl.build_source(spec, 100)
    for t in range(1, 101):
        assert np.array_equal(a.realized(t), b.realized(t))


def test_greedy_rejects_preview():
    model = rl.linear_system([[1.0]], [[1.0]])
    costs = rl.quadratic_cost([[1.0]], [[1.0]])
    spec = rl.DisturbanceSpec(kind="greedy-adversarial", w_radius=1.0, dim=1)
    src = rl.build_source(spec, 100, model=model, costs=costs)
    with pytest.raises(ConfigurationError):
        src.window(1, 3)
    with pytest.raises(ConfigurationError):
        src.realized(1)  # needs the current state and control
    with pytest.raises(ConfigurationError):
        rl.build_source(spec, 100)  # needs the models


def test_greedy_picks_worst_boundary_point():
    model = rl.linear_system([[1.0]], [[1.0]])
    costs = rl.quadratic_cost([[1.0]], [[1.0]])
    spec = rl.DisturbanceSpec(kind="greedy-adversarial", w_radius=0.5, dim=1)
    src = rl.build_source(spec, 100, model=model, costs=costs)
    # pushing away from the origin hurts most: at x=1, u=0 the worst move is +0.5
    assert src.realized(1, state=np.array([1.0]), control=np.array([0.0]))[0] == 0.5
    assert src.realized(1, state=np.array([-1.0]), control=np.array([0.0]))[0] == -0.5


def test_energy_examples():
    assert rl.energy(np.zeros((3, 1))) == 0.0
    assert rl.energy(np.array([[1.0], [-1.0]])) == pytest.approx(2.0)
    assert rl.energy(np.array([[1.0, 0.0], [0.0, 2.0]])) == pytest.approx(5.0)


def test_shifted_source_view():
    spec = rl.DisturbanceSpec(kind="sinusoid", w_radius=1.0, dim=1, period=9.0)
    base = rl.build_source(spec, 100)
    shifted = rl.ShiftedSource(base, 4)
    assert np.array_equal(shifted.window(1, 5), base.window(5, 5))
    assert np.array_equal(shifted.realized(2), base.realized(6))
