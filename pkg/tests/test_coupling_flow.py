import math

import numpy as np
import pytest
from hand_beta import beta_discrepancy, random_states
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from whflow.coupling_flow import CouplingVector, MassPoleError, beta_couplings, beta_couplings_jacobian, evolve_couplings
from whflow.dimensionless import (
    DimlessCouplingVector,
    beta_dimensionless,
    find_fixed_points,
    integrate_dimensionless,
    to_dimensionful,
    to_dimensionless,
)
from whflow.flowconfig import FlowConfig
from whflow.observables import observables_from_trajectory
from whflow.potentials import Polynomial1D, make_standard_potential, shift_to_minimum
from whflow.series import TruncatedSeries2
from whflow.two_field import beta_two_field

TWO_PI = 2 * math.pi


@pytest.mark.parametrize("order", [2, 3, 4])
def test_generated_beta_matches_hand_expansion(order):
    assert beta_discrepancy(order, seed=order) < 1e-12


def test_quartic_feeds_mass_beta():
    beta = beta_couplings(CouplingVector(1.0, [0, 0, 0, 0, 1]))
    assert beta[2] == pytest.approx(-1 / TWO_PI, rel=1e-14)


def test_harmonic_beta_only_moves_vacuum_energy():
    m2 = 1.7
    beta = beta_couplings(CouplingVector(1.0, [0, 0, m2, 0, 0, 0]))
    assert beta[0] == pytest.approx(-math.log1p(m2) / TWO_PI, rel=1e-14)
    np.testing.assert_array_equal(beta[1:], 0.0)


@given(arrays(float, 9, elements=st.floats(-1.0, 1.0)))
def test_even_input_gives_structurally_zero_odd_betas(a):
    a = a.copy()
    a[1::2] = 0.0
    beta = beta_couplings(CouplingVector(1.3, a))
    assert np.all(beta[1::2] == 0.0)


def test_mass_pole_rejected():
    with pytest.raises(MassPoleError):
        beta_couplings(CouplingVector(1.0, [0, 0, -1.0, 0, 1.0]))


def test_jacobian_matches_finite_differences():
    lam, a = next(random_states(1, 8, seed=5))
    J = beta_couplings_jacobian(CouplingVector(lam, a))
    eps = 1e-6
    for j in range(a.size):
        up, dn = a.copy(), a.copy()
        up[j] += eps
        dn[j] -= eps
        col = (beta_couplings(CouplingVector(lam, up)) - beta_couplings(CouplingVector(lam, dn))) / (2 * eps)
        np.testing.assert_allclose(J[:, j], col, rtol=1e-6, atol=1e-7)


def test_harmonic_coupling_flow_zero_point_energy():
    traj = evolve_couplings(Polynomial1D([0, 0, 0.5]), FlowConfig(), order=2)
    assert traj.completed
    assert traj.effective_potential().taylor(0.0)[0] == pytest.approx(0.5, abs=1e-3)
    assert np.all(np.diff(traj.lambdas) < 0)


def test_truncation_orders_agree_for_single_well():
    V = make_standard_potential("single_well", 1.0)
    gaps = [observables_from_trajectory(evolve_couplings(V, order=n)).m_eff for n in (8, 12)]
    assert abs(gaps[1] / gaps[0] - 1) < 0.01


def test_weak_double_well_hits_mass_pole():
    traj = evolve_couplings(make_standard_potential("double_well", 0.02), order=10)
    assert traj.termination.kind == "spinodal"
    assert "mass pole" in traj.termination.message
    last = traj.final
    assert 1 + last.a[2] / last.lam**2 < 1e-3


def test_expansion_at_minimum_records_centre():
    V = make_standard_potential("asym_double_well", 0.01, 0.2)
    traj = evolve_couplings(V, order=12, expand_at_minimum=True)
    assert traj.completed
    assert traj.center == shift_to_minimum(V).x_min
    assert observables_from_trajectory(traj).m1 == pytest.approx(traj.center, abs=0.5)


# -------------------------------------------------------- dimensionless flow


def test_gaussian_point_is_stationary():
    np.testing.assert_array_equal(beta_dimensionless(np.zeros(7)), 0.0)


@given(st.floats(0.05, 20.0), arrays(float, 7, elements=st.floats(-0.5, 0.5)))
def test_dimensionless_round_trip(lam, a):
    c = CouplingVector(lam, a)
    back = to_dimensionful(to_dimensionless(c, 10.0), 10.0)
    assert back.lam == pytest.approx(lam, rel=1e-12)
    np.testing.assert_allclose(back.a, a, rtol=1e-12, atol=1e-14)


def test_round_trip_at_specific_cutoff():
    a = np.array([0.1, -0.2, 0.3, 0.4, -0.5])
    back = to_dimensionful(to_dimensionless(CouplingVector(0.37, a), 1.0), 1.0)
    np.testing.assert_allclose(back.a, a, rtol=1e-12)


def test_dimensionless_beta_matches_scaling_relation():
    # d ahat_n/dt = (n+2)/2 ahat_n - Lambda^{-(n+2)/2} (Lambda d a_n/dLambda)
    lam, a = next(random_states(1, 6, seed=3))
    c = CouplingVector(lam, a)
    d = to_dimensionless(c, 1.0)
    n = np.arange(7)
    want = (n + 2) / 2 * d.ahat - lam ** (-(n + 2) / 2) * beta_couplings(c)
    np.testing.assert_allclose(beta_dimensionless(d), want, rtol=1e-12, atol=1e-14)


def test_quartic_fixed_point_location():
    fps = find_fixed_points(4)
    kinds = [f.classification for f in fps]
    assert "gaussian" in kinds
    nontrivial = [f for f in fps if f.classification == "nontrivial"]
    assert len(nontrivial) == 1
    np.testing.assert_allclose(nontrivial[0].ahat[[2, 4]], [-1 / 3, 8 * math.pi / 9], rtol=1e-10)
    assert np.max(np.abs(beta_dimensionless(nontrivial[0].ahat))) < 1e-10


def test_fixed_point_box_must_avoid_pole():
    with pytest.raises(ValueError):
        find_fixed_points(4, {2: (-1.5, 0.0), 4: (0.1, 1.0)})


def test_strong_mass_flows_to_symmetric_phase():
    seed = np.zeros(5)
    seed[2], seed[4] = 0.4, 0.3
    assert integrate_dimensionless(seed).outcome == "symmetric"


def test_seed_on_pole_rejected():
    with pytest.raises(MassPoleError):
        integrate_dimensionless(np.array([0, 0, -1.0, 0, 1.0]))


def test_dimensionless_vector_requires_quadratic_term():
    with pytest.raises(ValueError):
        DimlessCouplingVector(0.0, [0.0, 1.0])


# ------------------------------------------------------------ two-field flow


def test_two_field_constant_hessian():
    for c in (0.0, 0.3):
        V = TruncatedSeries2.from_dict({(2, 0): 0.5, (0, 2): 0.5, (1, 1): c}, 4)
        beta = beta_two_field(V, 1.0)
        assert beta.coeffs[0, 0] == pytest.approx(-math.log(4 - c * c) / TWO_PI, rel=1e-13)
