import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from data_models.control_basis import ControlBasis
from data_models.kinetic_system import KineticPoint, SystemSpec
from kinetic_tools.control_basis import build_basis
from kinetic_tools.errors import InvalidParametersError, SingularMapError
from kinetic_tools.geometry import exp_tB
from kinetic_tools.trajectory import (
    bounding_radius,
    control_signal,
    endpoint_residual,
    eval_path,
    eval_trajectory,
    eval_velocity,
    grad_phi_inverse,
    phi_map,
    psi_map,
    sample_connection_pairs,
    singularity_slope,
    solve_control,
    tangent_length,
)
from kinetic_tools.wronskian import svd_pinv


@pytest.fixture
def spec():
    return SystemSpec.kolmogorov()


@pytest.fixture
def bundle(spec):
    basis = build_basis(1, 1.0)
    endpoint = KineticPoint(x=(0.4, -0.3), t=-0.5)
    target = KineticPoint(x=(-0.2, 0.6), t=-2.5)
    return solve_control(spec, basis, endpoint, target)


def test_trajectory_hits_both_endpoints(bundle):
    assert bundle.delta == -2.0
    assert bundle.residual < 1e-10
    assert endpoint_residual(bundle) < 1e-10
    assert eval_trajectory(bundle, 0.0) == bundle.endpoint
    end = eval_trajectory(bundle, 1.0)
    assert np.allclose(end.vector, bundle.target.vector, atol=1e-10)
    assert end.t == pytest.approx(-2.5)


def test_zero_defect_gives_free_transport(spec):
    basis = build_basis(1, 1.0)
    endpoint = KineticPoint(x=(0.5, 0.2), t=0.0)
    target = KineticPoint.from_array(exp_tB(spec, -2.0) @ endpoint.vector, -2.0)
    out = solve_control(spec, basis, endpoint, target)
    assert out.is_trivial
    path = eval_path(out, [0.25, 0.75])
    assert np.allclose(path[0, :-1], exp_tB(spec, -0.5) @ endpoint.vector)
    assert np.allclose(path[1, :-1], exp_tB(spec, -1.5) @ endpoint.vector)


def test_velocity_matches_finite_difference(bundle):
    h = 1e-6
    rows = eval_path(bundle, [0.5 - h, 0.5 + h])
    numeric = (rows[1] - rows[0]) / (2 * h)
    assert np.allclose(eval_velocity(bundle, 0.5), numeric, rtol=1e-6, atol=1e-8)


def test_control_signal_drives_velocity_layer(bundle):
    # d v / ds = sum_i m_i s^alpha_i
    h = 1e-6
    rows = eval_path(bundle, [0.3 - h, 0.3 + h])
    dv = (rows[1, 0] - rows[0, 0]) / (2 * h)
    assert dv == pytest.approx(control_signal(bundle, 0.3)[0], rel=1e-6)


def test_connection_maps_reproduce_the_path(bundle):
    for s in (0.1, 0.5, 1.0):
        x_s = eval_path(bundle, [s])[0, :-1]
        assert np.allclose(phi_map(bundle, s).apply(bundle.target.vector), x_s, atol=1e-12)
    for s in (0.05, 0.5):
        x_s = eval_path(bundle, [s])[0, :-1]
        assert np.allclose(psi_map(bundle, s).apply(bundle.endpoint.vector), x_s, atol=1e-12)


def test_psi_at_zero_is_identity(bundle):
    psi = psi_map(bundle, 0.0)
    assert np.array_equal(psi.matrix, np.eye(2))
    assert psi.diagnostics["condition_number"] == pytest.approx(1.0)


def test_map_domains(bundle):
    with pytest.raises(SingularMapError):
        phi_map(bundle, 0.0)
    with pytest.raises(InvalidParametersError):
        psi_map(bundle, 0.75)
    with pytest.raises(InvalidParametersError):
        eval_trajectory(bundle, 1.5)


def test_gradient_shortcut_matches_general_formula(bundle):
    wb = bundle.wronskian
    e0 = np.array([[1.0], [0.0]])
    for s in (0.3, 1e-3):
        general = wb.wdelta(1.0) @ (svd_pinv(wb.wdelta(s), 1e-15) @ e0)
        assert np.allclose(grad_phi_inverse(bundle, s), general, rtol=1e-8, atol=1e-10)


def test_singularity_slope(spec):
    basis = ControlBasis(alphas=(-0.8, -0.3), kappa=1)
    out = solve_control(
        spec, basis, KineticPoint(x=(0.4, -0.3), t=-0.5), KineticPoint(x=(-0.2, 0.6), t=-2.5)
    )
    fit = singularity_slope(out)
    assert not fit.excluded
    assert fit.predicted_slope == pytest.approx(-0.7)
    assert fit.slope == pytest.approx(-0.7, abs=0.05)


def test_singularity_slope_excludes_trivial_control(spec):
    basis = build_basis(1, 1.0)
    endpoint = KineticPoint(x=(0.5, 0.2), t=0.0)
    target = KineticPoint.from_array(exp_tB(spec, -2.0) @ endpoint.vector, -2.0)
    fit = singularity_slope(solve_control(spec, basis, endpoint, target))
    assert fit.excluded
    assert fit.slope is None


def test_tangent_length_exceeds_chord(bundle):
    start = np.append(bundle.endpoint.vector, bundle.endpoint.t)
    end = np.append(bundle.target.vector, bundle.target.t)
    assert tangent_length(bundle) >= np.linalg.norm(end - start) * (1 - 1e-6)


def test_bounding_radius_reaches_the_past_cylinder(spec):
    basis = build_basis(1, 1.0)
    first = bounding_radius(spec, basis, n_samples=5, seed=4, s_nodes=9)
    second = bounding_radius(spec, basis, n_samples=5, seed=4, s_nodes=9)
    # Q- starts at t = -5, so the time size alone is at least 2
    assert first.radius >= 2.0
    assert first.per_layer["t"] >= 2.0
    assert first == second


# =====================================================
# Boundary solve across chains and methods
# =====================================================
RECTANGULAR = SystemSpec(kappa=1, beta=1.0, dims=(2, 1), blocks=([[1.0, 0.5]],), lambda_=2.0)


def _rows_to_point(row):
    return KineticPoint.from_array(row[:-1], row[-1])


@pytest.mark.parametrize(
    "spec",
    [SystemSpec.kolmogorov(), SystemSpec.kolmogorov(kappa=2), SystemSpec.kolmogorov(kappa=3), RECTANGULAR],
    ids=["kappa1", "kappa2", "kappa3", "rectangular"],
)
@pytest.mark.parametrize("method", ["factored", "min-norm"])
def test_connection_pairs_are_joined_exactly(spec, method):
    basis = build_basis(spec.kappa, spec.beta)
    pairs = sample_connection_pairs(spec, n=25, seed=spec.kappa)
    worst = 0.0
    for k in range(25):
        z0 = _rows_to_point(pairs["zero"][k])
        for name in ("plus", "minus"):
            out = solve_control(spec, basis, _rows_to_point(pairs[name][k]), z0, method=method)
            worst = max(worst, out.residual, endpoint_residual(out))
    assert worst <= 1e-9


def test_min_norm_control_is_smallest_on_rectangular_chain():
    basis = build_basis(1, 1.0)
    endpoint = KineticPoint(x=(0.4, -0.3, 0.2), t=-0.5)
    target = KineticPoint(x=(-0.2, 0.6, 1.1), t=-2.5)
    factored = solve_control(RECTANGULAR, basis, endpoint, target, method="factored")
    min_norm = solve_control(RECTANGULAR, basis, endpoint, target, method="min-norm")
    assert min_norm.residual <= 1e-10
    assert np.linalg.norm(min_norm.control) <= np.linalg.norm(factored.control) + 1e-12
    assert np.allclose(eval_path(min_norm, [1.0])[0, :-1], target.vector, atol=1e-10)


@pytest.mark.parametrize("kappa", [2, 3])
def test_path_solves_the_layer_equations(kappa):
    # dX^(i)/ds = delta B_i X^(i-1) for every layer below the velocity
    spec = SystemSpec.kolmogorov(kappa=kappa)
    basis = build_basis(kappa, 1.0)
    pairs = sample_connection_pairs(spec, n=1, seed=17)
    out = solve_control(spec, basis, _rows_to_point(pairs["minus"][0]), _rows_to_point(pairs["zero"][0]))
    h = 1e-5
    for s in (0.2, 0.35, 0.5, 0.65, 0.8):
        rows = eval_path(out, [s - h, s, s + h])
        derivative = (rows[2, :-1] - rows[0, :-1]) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(rows))))
        for i in range(1, kappa + 1):
            expected = out.delta * spec.block(i) @ rows[1, spec.layer_slice(i - 1)]
            assert np.allclose(derivative[spec.layer_slice(i)], expected, rtol=1e-5, atol=1e-5 * scale)


def _grad_closed_form(alphas, delta, s):
    a0, a1 = alphas
    top = ((2 + a0) * s ** (-1 - a0) - (2 + a1) * s ** (-1 - a1)) / (a0 - a1)
    bottom = delta * (s ** (-1 - a0) - s ** (-1 - a1)) / (a0 - a1)
    return np.array([[top], [bottom]])


def test_gradient_matches_two_layer_closed_form(bundle):
    for s in (0.1, 0.3, 0.7):
        expected = _grad_closed_form(bundle.basis.alphas, bundle.delta, s)
        assert np.allclose(grad_phi_inverse(bundle, s), expected, rtol=1e-10, atol=0.0)


def test_gradient_matches_jacobian_of_inverted_map(bundle):
    h = 1e-4
    y = np.array([0.3, -0.7])
    step = np.array([h, 0.0])
    for s in (0.1, 0.3, 0.7):
        phi = phi_map(bundle, s)
        inverse = lambda point: np.linalg.solve(phi.matrix, point - phi.offset)
        jacobian = (inverse(y + step) - inverse(y - step)) / (2 * h)
        assert np.allclose(grad_phi_inverse(bundle, s)[:, 0], jacobian, rtol=1e-6)


def test_nearly_equal_exponents_bend_the_fitted_slope(spec):
    # two exponents 0.02 apart nearly cancel, so the fit over the window
    # is steeper than the asymptotic value -1 - max(alpha)
    basis = ControlBasis(alphas=(-0.67, -0.65), kappa=1)
    out = solve_control(
        spec, basis, KineticPoint(x=(0.4, -0.3), t=-0.5), KineticPoint(x=(-0.2, 0.6), t=-2.5)
    )
    fit = singularity_slope(out)
    assert fit.predicted_slope == pytest.approx(-0.35)

    lo, hi = fit.window
    nodes = np.logspace(np.log10(lo), np.log10(hi), fit.n_nodes)
    norms = [np.linalg.norm(_grad_closed_form(basis.alphas, out.delta, s)) for s in nodes]
    closed_slope, _ = np.polyfit(np.log(nodes), np.log(norms), 1)
    assert fit.slope == pytest.approx(closed_slope, abs=1e-6)
    assert fit.slope == pytest.approx(-0.437, abs=0.005)
