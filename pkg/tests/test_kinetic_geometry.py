import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from data_models.kinetic_system import Cylinder, KineticPoint, SystemSpec
from data_utils.spec_loader import dump_system_spec, load_system_spec
from kinetic_tools.errors import InvalidParametersError, InvalidSpecError
from kinetic_tools.geometry import (
    absolute_time_interval,
    assemble_B,
    composed_block,
    cylinder_contains,
    cylinder_contains_array,
    cylinder_layout,
    cylinder_sample,
    cylinder_sample_array,
    cylinder_volume,
    dilate,
    exp_tB,
    group_compose,
    group_inverse,
    homogeneous_norm,
    make_cylinder,
    stacked_B,
)
from kinetic_tools.operators import principal_operator, transport_derivative


@pytest.fixture
def kolmogorov():
    return SystemSpec.kolmogorov()


@pytest.fixture
def chain():
    """kappa = 2 with a rectangular first block."""
    return SystemSpec(
        kappa=2,
        beta=1.0,
        dims=(2, 2, 1),
        blocks=([[1.0, 0.0], [0.5, 1.0]], [[0.0, 1.0]]),
        lambda_=2.0,
    )


# =====================================================
# Structure
# =====================================================
def test_display_and_stacked_B(kolmogorov):
    assert np.array_equal(assemble_B(kolmogorov), np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert np.array_equal(stacked_B(kolmogorov), np.array([[0.0, 0.0], [1.0, 0.0]]))


def test_B_is_nilpotent_of_index_kappa_plus_one():
    spec = SystemSpec.kolmogorov(kappa=3, d=2)
    B = stacked_B(spec)
    assert np.any(np.linalg.matrix_power(B, 3))
    assert not np.any(np.linalg.matrix_power(B, 4))


def test_exp_tB_kolmogorov(kolmogorov):
    assert np.allclose(exp_tB(kolmogorov, 2.5), [[1.0, 0.0], [2.5, 1.0]])
    assert np.allclose(exp_tB(kolmogorov, 2.5, layout="display"), [[1.0, 2.5], [0.0, 1.0]])


def test_composed_block(chain):
    assert np.allclose(composed_block(chain, 2, 1), [[0.5, 1.0]])
    with pytest.raises(InvalidParametersError):
        composed_block(chain, 1, 2)
    with pytest.raises(InvalidParametersError):
        composed_block(chain, 3, 1)


# =====================================================
# Group law and dilations
# =====================================================
def test_group_compose_example(kolmogorov):
    z_tilde = KineticPoint(x=(1.0, 0.0), t=0.0)
    z = KineticPoint(x=(0.0, 0.0), t=2.0)
    out = group_compose(kolmogorov, z_tilde, z)
    assert np.allclose(out.vector, [1.0, 2.0])
    assert out.t == 2.0


def test_inverse_and_associativity(chain):
    rng = np.random.default_rng(3)
    a, b, c = (KineticPoint.from_array(rng.normal(size=chain.N), rng.normal()) for _ in range(3))

    ident = group_compose(chain, group_inverse(chain, a), a)
    assert np.allclose(ident.vector, 0.0, atol=1e-12)
    assert abs(ident.t) < 1e-12

    left = group_compose(chain, group_compose(chain, a, b), c)
    right = group_compose(chain, a, group_compose(chain, b, c))
    assert np.allclose(left.vector, right.vector, atol=1e-12)
    assert np.isclose(left.t, right.t)


def test_dilation_scales_layers(kolmogorov):
    out = dilate(kolmogorov, 2.0, KineticPoint(x=(1.0, 1.0), t=1.0))
    assert np.allclose(out.vector, [2.0, 8.0])
    assert out.t == 4.0
    with pytest.raises(InvalidParametersError):
        dilate(kolmogorov, 0.0, KineticPoint(x=(1.0, 1.0), t=1.0))


def test_dilation_is_group_automorphism(chain):
    rng = np.random.default_rng(11)
    a = KineticPoint.from_array(rng.normal(size=chain.N), rng.normal())
    b = KineticPoint.from_array(rng.normal(size=chain.N), rng.normal())
    r = 1.7
    lhs = dilate(chain, r, group_compose(chain, a, b))
    rhs = group_compose(chain, dilate(chain, r, a), dilate(chain, r, b))
    assert np.allclose(lhs.vector, rhs.vector, rtol=1e-12, atol=1e-12)


def test_homogeneous_norm_is_one_homogeneous(chain):
    z = KineticPoint(x=(0.3, -0.2, 0.5, 0.1, 0.7), t=-0.4)
    assert np.isclose(homogeneous_norm(chain, dilate(chain, 3.0, z)), 3.0 * homogeneous_norm(chain, z))


# =====================================================
# Cylinders
# =====================================================
def test_unit_cylinder_membership(kolmogorov):
    q1 = make_cylinder(kolmogorov)
    assert cylinder_contains(kolmogorov, q1, KineticPoint(x=(0.0, 0.0), t=-0.5))
    assert cylinder_contains(kolmogorov, q1, KineticPoint(x=(0.0, 0.0), t=0.0))
    assert not cylinder_contains(kolmogorov, q1, KineticPoint(x=(0.0, 0.0), t=-1.0))
    assert not cylinder_contains(kolmogorov, q1, KineticPoint(x=(2.0, 0.0), t=-0.5))


def test_samples_land_inside_and_are_reproducible(chain):
    center = KineticPoint(x=(0.3, -0.2, 1.0, 0.5, -0.4), t=1.0)
    cyl = make_cylinder(chain, center, 0.7)
    pts = cylinder_sample_array(chain, cyl, 10_000, seed=5)
    assert cylinder_contains_array(chain, cyl, pts).all()
    assert np.array_equal(pts, cylinder_sample_array(chain, cyl, 10_000, seed=5))
    assert not np.array_equal(pts, cylinder_sample_array(chain, cyl, 10_000, seed=6))
    points = cylinder_sample(chain, cyl, 3, seed=5)
    small = cylinder_sample_array(chain, cyl, 3, seed=5)
    assert np.array_equal(np.array([list(p.x) + [p.t] for p in points]), small)
    assert all(cylinder_contains(chain, cyl, p) for p in points)


def test_cylinder_volume_scales_with_homogeneous_dimension(kolmogorov):
    base = cylinder_volume(kolmogorov, make_cylinder(kolmogorov))
    assert np.isclose(base, 4.0)
    scaled = cylinder_volume(kolmogorov, make_cylinder(kolmogorov, radius=1.5))
    assert np.isclose(scaled, base * 1.5 ** kolmogorov.homogeneous_dimension)


def test_cylinder_layout_times(kolmogorov):
    layout = cylinder_layout(kolmogorov)
    assert absolute_time_interval(kolmogorov, layout["plus"]) == (-1.0, 0.0)
    assert absolute_time_interval(kolmogorov, layout["zero"]) == (-3.0, -2.0)
    assert absolute_time_interval(kolmogorov, layout["minus"]) == (-5.0, -4.0)


def test_cylinder_rejects_empty_interval(kolmogorov):
    with pytest.raises(InvalidSpecError):
        Cylinder(center=KineticPoint.origin(kolmogorov), radius=1.0, time_interval=(0.0, 0.0))


# =====================================================
# Spec validation and I/O
# =====================================================
@pytest.mark.parametrize(
    "document",
    [
        {"kappa": 1, "beta": 0.0, "dims": [1, 1], "blocks": [[1.0]]},
        {"kappa": 1, "beta": 1.0, "dims": [1, 2], "blocks": [[1.0, 0.0]]},
        {"kappa": 1, "beta": 1.0, "dims": [2, 2], "blocks": [[[1.0, 0.0], [0.0, 0.0]]]},
        {"kappa": 1, "beta": 1.0, "dims": [1, 1], "blocks": [[3.0]], "lambda": 2.0},
        {"kappa": 2, "beta": 1.0, "dims": [1, 1, 1], "blocks": [[1.0]]},
    ],
)
def test_invalid_specs_are_rejected(document):
    with pytest.raises(InvalidSpecError):
        SystemSpec.model_validate(document)


def test_spec_json_round_trip(tmp_path, chain):
    path = dump_system_spec(chain, tmp_path / "spec.json")
    assert load_system_spec(path) == chain


def test_missing_spec_file(tmp_path):
    with pytest.raises(InvalidSpecError):
        load_system_spec(tmp_path / "nope.json")


def test_display_order_round_trip(chain):
    z = KineticPoint.from_display(chain, [9.0, 1.0, 2.0, 3.0, 4.0, -1.0])
    assert z.x == (3.0, 4.0, 1.0, 2.0, 9.0)
    assert z.display(chain) == [9.0, 1.0, 2.0, 3.0, 4.0, -1.0]


# =====================================================
# Operators
# =====================================================
def test_transport_annihilates_free_streaming_invariant(kolmogorov):
    # x - t v is constant along free transport
    f = lambda x, t: x[1] - t * x[0]
    assert abs(transport_derivative(kolmogorov, f, np.array([0.4, -1.2]), 0.7)) < 1e-10


def test_principal_operator_vanishes_on_polynomial_solution(kolmogorov):
    # d_t f + v d_x f = d_vv f for f = v^2 + 2t
    f = lambda x, t: x[0] ** 2 + 2.0 * t
    assert abs(principal_operator(kolmogorov, f, np.array([0.3, 2.0]), -0.5)) < 1e-9


def _cubic(x, t):
    return x[0] ** 3 + x[0] * x[-1] - 2.0 * x[1] * t + t ** 2 * x[0] + 0.3 * x[-1] ** 2 + x[0] * x[1] * x[-1]


@pytest.mark.parametrize("spec", [SystemSpec.kolmogorov(), SystemSpec.kolmogorov(kappa=2, d=2)])
def test_principal_operator_scales_with_dilations(spec):
    r = 1.7
    rng = np.random.default_rng(3)
    x, t = rng.normal(size=spec.N), -0.4

    def dilated(y, s):
        z = dilate(spec, r, KineticPoint.from_array(y, s))
        return _cubic(z.vector, z.t)

    z = dilate(spec, r, KineticPoint.from_array(x, t))
    lhs = principal_operator(spec, dilated, x, t)
    rhs = r ** 2 * principal_operator(spec, _cubic, z.vector, z.t)
    assert abs(rhs) > 1e-3
    assert lhs == pytest.approx(rhs, rel=1e-8)


@pytest.mark.parametrize("beta", [1.0, 0.5])
def test_dilations_form_a_semigroup(chain, beta):
    spec = SystemSpec(**{**chain.model_dump(), "beta": beta})
    z = KineticPoint(x=(0.3, -0.2, 0.5, 0.1, 0.7), t=-0.4)
    for r, s in ((1.7, 0.4), (0.25, 3.0), (2.0, 2.0)):
        nested = dilate(spec, r, dilate(spec, s, z))
        direct = dilate(spec, r * s, z)
        assert np.allclose(nested.vector, direct.vector, rtol=1e-13, atol=0.0)
        assert nested.t == pytest.approx(direct.t, rel=1e-13)
    assert dilate(spec, 1.0, z) == z
