import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from data_models.kinetic_system import KineticPoint, SystemSpec
from kinetic_tools.errors import InvalidParametersError
from kinetic_tools.operators import principal_operator
from kinetic_workers.fundamental_solution import (
    evolve_gaussian,
    fundamental_solution,
    fundamental_solution_grid,
    kolmogorov_covariance,
    transported_mean,
)


def test_covariance_of_the_kolmogorov_process():
    cov = kolmogorov_covariance(SystemSpec.kolmogorov(), 2.0)
    # (Var V, Cov, Var X) = (tau, tau^2 / 2, tau^3 / 3)
    assert np.allclose(cov, [[2.0, 2.0], [2.0, 8.0 / 3.0]], rtol=1e-14)
    assert np.allclose(kolmogorov_covariance(SystemSpec.kolmogorov(), 2.0, diffusivity=1.0), 2.0 * cov)


def test_covariance_is_positive_definite_for_long_chains():
    cov = kolmogorov_covariance(SystemSpec.kolmogorov(kappa=3, d=2), 0.5)
    assert np.all(np.linalg.eigvalsh(cov) > 0)


def test_covariance_rejects_non_positive_time():
    with pytest.raises(InvalidParametersError):
        kolmogorov_covariance(SystemSpec.kolmogorov(), 0.0)
    with pytest.raises(InvalidParametersError):
        kolmogorov_covariance(SystemSpec.kolmogorov(), 1.0, diffusivity=0.0)


def test_kernel_mass_is_one():
    spec = SystemSpec.kolmogorov()
    edges = (np.linspace(-6.0, 6.0, 61), np.linspace(-6.0, 6.0, 61))
    field = fundamental_solution_grid(spec, KineticPoint(x=(0.0, 0.0), t=0.0), 1.0, edges, cell_averaged=True)
    assert np.sum(field.values * field.spatial_volumes()) == pytest.approx(1.0, abs=1e-6)
    assert field.metadata["time"] == 1.0


def test_kernel_solves_the_equation():
    spec = SystemSpec.kolmogorov()
    source = KineticPoint(x=(0.2, -0.1), t=0.0)

    def f(x, t):
        return fundamental_solution(spec, source, KineticPoint.from_array(x, t), diffusivity=1.0)

    value = f(np.array([0.3, 0.2]), 1.0)
    residual = principal_operator(spec, f, np.array([0.3, 0.2]), 1.0, h=1e-2)
    assert abs(residual) < 1e-6 * max(1.0, value)


def test_kernel_is_transported_along_free_streaming():
    spec = SystemSpec.kolmogorov(kappa=2)
    mean = transported_mean(spec, np.array([1.0, 0.0, 0.0]), 2.0)
    assert np.allclose(mean, [1.0, 2.0, 2.0])


def test_gaussian_evolution_is_a_semigroup():
    spec = SystemSpec.kolmogorov(kappa=2)
    mean0 = np.array([0.5, -0.2, 1.0])
    cov0 = np.diag([0.3, 1.0, 2.0])
    m1, c1 = evolve_gaussian(spec, mean0, cov0, 0.4)
    m2, c2 = evolve_gaussian(spec, m1, c1, 0.6)
    m, c = evolve_gaussian(spec, mean0, cov0, 1.0)
    assert np.allclose(m2, m, atol=1e-12)
    assert np.allclose(c2, c, atol=1e-12)


def test_point_mass_evolves_into_the_kernel():
    spec = SystemSpec.kolmogorov()
    _, cov = evolve_gaussian(spec, np.zeros(2), np.zeros((2, 2)), 1.5, diffusivity=1.0)
    assert np.allclose(cov, kolmogorov_covariance(spec, 1.5, diffusivity=1.0))
