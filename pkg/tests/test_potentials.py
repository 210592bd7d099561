import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from whflow.potentials import (
    BivariatePolynomial,
    DegenerateMinimumError,
    Polynomial1D,
    PotentialError,
    SusyPotentialW,
    from_couplings,
    make_standard_potential,
    make_two_particle_potential,
    rotate_to_normal_coordinates,
    shift_to_minimum,
    susy_partner_potentials,
    to_couplings,
)

finite = st.floats(-3.0, 3.0, allow_nan=False)


def test_single_well_coefficients():
    p = make_standard_potential("single_well", 1.0)
    assert p.coeffs[2] == 0.5 and p.coeffs[4] == 1.0
    assert p(1.0) == pytest.approx(1.5)


def test_double_well_stationary_points():
    p = make_standard_potential("double_well", 0.2)
    assert p(0.0) == 0.0
    d = p.derivative()
    for x in (math.sqrt(1.25), -math.sqrt(1.25)):
        assert abs(d(x)) < 1e-12


@given(st.floats(-5, 5))
def test_asymmetric_well_odd_part_is_linear(x):
    p = make_standard_potential("asym_double_well", 0.2, 0.2)
    assert p(x) - p(-x) == pytest.approx(0.4 * x, abs=1e-9)


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_nonpositive_coupling_rejected(lam):
    with pytest.raises(PotentialError):
        make_standard_potential("single_well", lam)


def test_evaluation_at_origin_is_exact():
    p = Polynomial1D([0.1234567890123, 2.0, 3.0])
    assert p(0.0) == 0.1234567890123


def test_unbounded_potential_not_flow_ready():
    with pytest.raises(PotentialError):
        Polynomial1D([0, 0, 1, 0, -1]).check_flow_ready()
    with pytest.raises(PotentialError):
        Polynomial1D([0, 1]).check_flow_ready()


def test_superpotential_normalization():
    w = SusyPotentialW(0.3)
    assert w(0.0) == 0.0
    assert w.as_polynomial().derivative()(0.0) == -1.0


def test_partner_potentials_at_zero_coupling():
    plus, minus = susy_partner_potentials(SusyPotentialW(0.0))
    np.testing.assert_allclose(plus.padded(2), [-0.5, 0.0, 0.5])
    np.testing.assert_allclose(minus.padded(2), [0.5, 0.0, 0.5])


def test_partner_potential_coefficients():
    plus, _ = susy_partner_potentials(SusyPotentialW(0.24))
    np.testing.assert_allclose(plus.padded(4), [-0.5, 0.24, 0.5, -0.24, 0.0288], atol=1e-15)


def test_strong_coupling_partner_has_single_stationary_point():
    from whflow.potentials import real_critical_points

    plus, _ = susy_partner_potentials(SusyPotentialW(0.4))
    crit = real_critical_points(plus)
    assert crit.size == 1
    # the only stationary point is the minimum, on the negative side of the origin
    assert plus.derivative(2)(crit[0]) > 0


@given(st.floats(-2.0, 2.0))
def test_partner_difference_is_superpotential_slope(g):
    plus, minus = susy_partner_potentials(SusyPotentialW(g))
    diff = plus.padded(4) - minus.padded(4)
    slope = np.zeros(5)
    slope[: 2] = [-1.0, 2.0 * g]
    np.testing.assert_allclose(diff, slope, atol=1e-14)


def test_shift_translated_harmonic():
    res = shift_to_minimum(Polynomial1D([0.5, -1.0, 0.5]))
    assert res.x_min == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(res.shifted.padded(2), [0.0, 0.0, 0.5], atol=1e-12)


def test_shift_asymmetric_well():
    res = shift_to_minimum(make_standard_potential("asym_double_well", 0.2, 0.2))
    assert res.x_min == pytest.approx(-1.21, abs=0.01)
    assert res.shifted.coeffs[2] > 0


def test_shift_reports_degenerate_pair():
    with pytest.raises(DegenerateMinimumError) as info:
        shift_to_minimum(make_standard_potential("double_well", 0.2))
    np.testing.assert_allclose(info.value.minima, [-math.sqrt(1.25), math.sqrt(1.25)], atol=1e-9)
    right = shift_to_minimum(make_standard_potential("double_well", 0.2), branch="right")
    assert right.x_min == pytest.approx(math.sqrt(1.25), abs=1e-9)


@given(
    st.floats(0.05, 2.0),
    st.floats(-1.0, 1.0),
    st.floats(-1.0, 1.0),
    st.floats(-1.0, 1.0),
)
def test_shift_then_unshift_is_identity(c4, c3, c2, c1):
    p = Polynomial1D([0.3, c1, c2, c3, c4])
    res = shift_to_minimum(p, branch="left")
    back = res.shifted.shifted(-res.x_min)
    # shift_to_minimum zeroes the residual linear term; compare against p with the same residue removed
    np.testing.assert_allclose(back.padded(4)[2:], p.padded(4)[2:], rtol=1e-12, atol=1e-12)
    assert back(res.x_min) == pytest.approx(p(res.x_min), rel=1e-12, abs=1e-12)
    assert res.shifted.derivative(2)(0.0) >= 0


@pytest.mark.parametrize("kind", ["single_well", "double_well"])
def test_even_potentials_have_zero_odd_coefficients(kind):
    p = make_standard_potential(kind, 0.37)
    assert np.all(p.coeffs[1::2] == 0.0)


def test_coupling_conversion_round_trip():
    p = Polynomial1D([0.1, 0.2, 0.3, 0.4, 0.5])
    a = to_couplings(p, 6)
    np.testing.assert_allclose(a[:5], [0.1, 0.2, 0.6, 2.4, 12.0])
    np.testing.assert_allclose(from_couplings(a).padded(6)[:5], p.coeffs, rtol=1e-15)


def test_two_particle_examples():
    free = make_two_particle_potential(0.2, "linear", 0.0)
    assert set(free.coeffs) == {(2, 0), (4, 0), (0, 2), (0, 4)}
    quad = make_two_particle_potential(0.2, "quadratic", 0.05)
    assert quad.coefficient(1, 1) == pytest.approx(-0.1)
    quart = make_two_particle_potential(0.2, "quartic", 0.01)
    assert quart(1.0, -1.0) == pytest.approx(-0.44)


def test_normal_coordinate_coefficients():
    lam, c = 0.2, 0.05
    lin = rotate_to_normal_coordinates(make_two_particle_potential(lam, "linear", c))
    assert lin.coefficient(2, 0) == pytest.approx(0.5 * (-1 - c))
    assert lin.coefficient(0, 2) == pytest.approx(0.5 * (-1 + c))
    assert lin.coefficient(2, 2) == pytest.approx(3 * lam)
    quad = rotate_to_normal_coordinates(make_two_particle_potential(lam, "quadratic", c))
    assert quad.coefficient(2, 0) == pytest.approx(0.5 * (-1 + 4 * c))
    quart = rotate_to_normal_coordinates(make_two_particle_potential(lam, "quartic", 0.01))
    assert quart.coefficient(4, 0) == pytest.approx(lam / 2 + 4 * 0.01)


def test_rotation_degree_bound():
    p = make_two_particle_potential(0.2, "quartic", 0.01)
    with pytest.raises(PotentialError):
        rotate_to_normal_coordinates(p, max_degree=3)


@given(
    st.sampled_from(["linear", "quadratic", "quartic"]),
    st.floats(-0.2, 0.2),
    st.lists(st.tuples(finite, finite), min_size=1, max_size=100),
)
def test_rotation_preserves_values(interaction, strength, points):
    p = make_two_particle_potential(0.2, interaction, strength)
    r = rotate_to_normal_coordinates(p)
    s = 1 / math.sqrt(2)
    for x1, x2 in points:
        want = p((x1 + x2) * s, (x2 - x1) * s)
        assert r(x1, x2) == pytest.approx(want, rel=1e-12, abs=1e-12)


@given(st.dictionaries(st.tuples(st.integers(0, 4), st.integers(0, 4)), finite, max_size=10), finite, finite)
def test_bivariate_evaluation_ignores_insertion_order(terms, x1, x2):
    forward = BivariatePolynomial(dict(terms))
    backward = BivariatePolynomial(dict(reversed(list(terms.items()))))
    assert forward(x1, x2) == backward(x1, x2)


def test_bivariate_degree_bound():
    with pytest.raises(PotentialError):
        BivariatePolynomial({(3, 2): 1.0}, max_degree=4)


def test_polynomial_record_round_trip():
    p = make_standard_potential("asym_double_well", 0.3, 0.2)
    q = Polynomial1D.from_record(p.to_record())
    np.testing.assert_array_equal(p.coeffs, q.coeffs)
    b = make_two_particle_potential(0.2, "quartic", 0.01)
    assert BivariatePolynomial.from_record(b.to_record()).coeffs == b.coeffs
