import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from data_models.kinetic_system import KineticPoint, SystemSpec
from data_utils.settings import KineticSettings
from kinetic_tools.errors import InvalidParametersError
from kinetic_workers.fundamental_solution import kolmogorov_covariance
from kinetic_workers.sde_simulator import (
    density_l1_error,
    empirical_density,
    ensemble_moments,
    sde_simulate,
)


@pytest.fixture
def spec():
    return SystemSpec.kolmogorov()


def test_exact_scheme_moments(spec):
    ensemble = sde_simulate(spec, 20_000, dt=1.0, horizon=1.0, seed=7)
    moments = ensemble_moments(ensemble)
    expected = kolmogorov_covariance(spec, 1.0)
    assert np.allclose(expected, [[1.0, 0.5], [0.5, 1.0 / 3.0]])
    assert np.all(np.abs(moments["mean"]) <= 4.0 * moments["mean_standard_error"])
    assert np.all(np.abs(moments["covariance"] - expected) <= 4.0 * moments["covariance_standard_error"])


def test_euler_maruyama_is_close_for_small_steps(spec):
    ensemble = sde_simulate(spec, 40_000, dt=0.01, horizon=1.0, seed=8, scheme="euler-maruyama")
    assert ensemble.dt == pytest.approx(0.01)
    cov = ensemble_moments(ensemble)["covariance"]
    assert np.allclose(cov, kolmogorov_covariance(spec, 1.0), atol=0.03)


def test_same_seed_same_paths(spec):
    first = sde_simulate(spec, 500, dt=0.1, horizon=1.0, seed=11)
    second = sde_simulate(spec, 500, dt=0.1, horizon=1.0, seed=11)
    other = sde_simulate(spec, 500, dt=0.1, horizon=1.0, seed=12)
    assert np.array_equal(first.terminal, second.terminal)
    assert not np.array_equal(first.terminal, other.terminal)


def test_paths_do_not_depend_on_worker_count(spec):
    settings = KineticSettings(SDE_CHUNK_SIZE=1000)
    results = []
    for workers in (1, 3):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ensemble = sde_simulate(spec, 5000, dt=0.25, horizon=1.0, seed=5, executor=pool, settings=settings)
        results.append(ensemble.terminal)
    assert np.array_equal(results[0], results[1])


def test_zero_horizon_returns_the_start(spec):
    start = KineticPoint(x=(0.5, -1.0), t=2.0)
    ensemble = sde_simulate(spec, 10, dt=0.1, horizon=0.0, seed=1, start=start)
    assert np.array_equal(ensemble.terminal, np.tile([0.5, -1.0], (10, 1)))


def test_start_point_is_transported(spec):
    start = KineticPoint(x=(1.0, 0.0), t=2.0)
    ensemble = sde_simulate(spec, 20_000, dt=1.0, horizon=1.0, seed=3, start=start)
    moments = ensemble_moments(ensemble)
    assert np.all(np.abs(moments["mean"] - [1.0, 1.0]) <= 4.0 * moments["mean_standard_error"])
    field = empirical_density(ensemble, (np.linspace(-4, 6, 21), np.linspace(-4, 6, 21)))
    assert field.metadata["time"] == 3.0
    assert np.sum(field.values * field.spatial_volumes()) == pytest.approx(1.0, abs=1e-3)


def test_recorded_frames(spec):
    ensemble = sde_simulate(spec, 100, dt=0.1, horizon=1.0, seed=2, record_every=5)
    assert ensemble.recorded.shape == (2, 100, 2)
    assert np.allclose(ensemble.recorded_times, [0.5, 1.0])
    assert np.array_equal(ensemble.recorded[-1], ensemble.terminal)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_paths": 0},
        {"dt": 0.0},
        {"horizon": -1.0},
        {"scheme": "milstein"},
        {"record_every": 0},
    ],
)
def test_invalid_arguments(spec, kwargs):
    params = {"n_paths": 10, "dt": 0.1, "horizon": 1.0, "seed": 0}
    params.update(kwargs)
    with pytest.raises(InvalidParametersError):
        sde_simulate(spec, **params)


@pytest.mark.slow
def test_density_error_shrinks_with_more_paths(spec):
    edges = (np.linspace(-4.0, 4.0, 21), np.linspace(-3.0, 3.0, 21))
    mean = np.zeros(2)
    cov = kolmogorov_covariance(spec, 1.0)
    small = density_l1_error(sde_simulate(spec, 10_000, 1.0, 1.0, seed=4), edges, mean, cov)
    large = density_l1_error(sde_simulate(spec, 200_000, 1.0, 1.0, seed=4), edges, mean, cov)
    assert large < small
    assert large < 0.1


@pytest.mark.slow
def test_density_error_decays_like_inverse_square_root(spec):
    edges = (np.linspace(-4.0, 4.0, 21), np.linspace(-3.0, 3.0, 21))
    mean = np.zeros(2)
    cov = kolmogorov_covariance(spec, 1.0)
    sizes = np.array([10_000, 100_000, 1_000_000])
    errors = [
        density_l1_error(sde_simulate(spec, int(n), 1.0, 1.0, seed=40 + k), edges, mean, cov)
        for k, n in enumerate(sizes)
    ]
    slope, _ = np.polyfit(np.log(sizes), np.log(errors), 1)
    assert slope == pytest.approx(-0.5, abs=0.15)
