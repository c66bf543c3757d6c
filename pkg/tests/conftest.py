import numpy as np
import pytest

import rhclab as rl


@pytest.fixture(scope="session")
def scalar_integrator():
    """x' = x + u + w with unit quadratic cost; the workhorse certified scenario."""
    model = rl.linear_system([[1.0]], [[1.0]])
    costs = rl.quadratic_cost([[1.0]], [[1.0]])
    box = rl.Box.symmetric(50.0, 1)
    return model, costs, box


@pytest.fixture(scope="session")
def scalar_stable():
    model = rl.linear_system([[0.7]], [[1.0]])
    costs = rl.quadratic_cost([[1.0]], [[1.0]])
    box = rl.Box.symmetric(1.0, 1)
    return model, costs, box


@pytest.fixture(scope="session")
def twodim_lq():
    model = rl.linear_system([[0.9, 0.1], [0.05, 0.8]], np.eye(2))
    costs = rl.quadratic_cost(np.eye(2), np.eye(2))
    box = rl.Box.symmetric(50.0, 2)
    return model, costs, box


@pytest.fixture(scope="session")
def integrator_certified(scalar_integrator):
    """Self-consistent horizon plus certified bound constants for the integrator."""
    model, costs, box = scalar_integrator
    M, cert = rl.consistent_preview_horizon(model, costs, box)
    constants = rl.derive_constants(costs.alpha_lo, cert.alpha_hi, cert.gamma_bar, M,
                                    bounds_source=cert.method)
    return model, costs.with_bounds(cert.alpha_hi, cert.gamma_bar), box, M, constants
