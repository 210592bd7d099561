import math

import numpy as np
import pytest
from scipy.integrate import quad

from whflow.references import (
    ReferenceEstimate,
    harmonic_a0_exact,
    harmonic_estimate,
    instanton_estimate,
    instanton_gap,
    instanton_profile,
    perturbation_estimate,
    perturbative_energy,
    susy_perturbative_energy,
    susy_perturbative_terms,
    valley_susy_energy,
    valley_susy_estimate,
)


def test_harmonic_infrared_limit():
    assert harmonic_a0_exact(1.0, 0.0, math.inf) == pytest.approx(0.5, abs=1e-15)


def test_harmonic_finite_window():
    assert harmonic_a0_exact(1.0, 0.1, 10.0) == pytest.approx(0.37891, abs=1e-4)


def test_harmonic_empty_window():
    assert harmonic_a0_exact(1.3, 4.0, 4.0) == 0.0


def test_harmonic_matches_quadrature():
    rng = np.random.default_rng(11)
    for _ in range(20):
        lam, lam0 = np.sort(rng.uniform(0.01, 50.0, 2))
        m = rng.uniform(0.3, 3.0)
        want, _ = quad(lambda L: math.log1p(m * m / (L * L)) / (2 * math.pi), lam, lam0, epsabs=1e-14, epsrel=1e-13)
        assert harmonic_a0_exact(m, lam, lam0) == pytest.approx(want, abs=1e-10)


def test_harmonic_domain():
    with pytest.raises(ValueError):
        harmonic_a0_exact(1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        harmonic_a0_exact(0.0, 0.0, 1.0)


def test_perturbative_series():
    assert perturbative_energy(0, 0.1) == pytest.approx(0.54875, abs=1e-15)
    assert perturbative_energy(0, 0.0) == 0.5
    assert perturbative_energy(1, 0.0) == 1.5


def test_susy_second_order_terms_cancel_for_ground_state():
    _, g2_term, _ = susy_perturbative_terms(0, 0.37)
    assert g2_term == pytest.approx(0.0, abs=1e-15)
    assert susy_perturbative_terms(1, 0.37)[1] != 0.0
    assert susy_perturbative_energy(1, 0.0) == 1.0


def test_instanton_gap_value():
    assert instanton_gap(0.05) == pytest.approx(0.0761, abs=1e-4)
    assert instanton_gap(0.05) == pytest.approx(2 * math.sqrt(2 * math.sqrt(2) / (math.pi * 0.05)) * math.exp(-1 / (3 * math.sqrt(2) * 0.05)), rel=1e-14)


def test_instanton_gap_increases_with_coupling():
    lams = np.linspace(0.005, 0.3, 400)
    assert np.all(np.diff([instanton_gap(l) for l in lams]) > 0)


def test_instanton_profile_limits_and_equation_of_motion():
    lam = 0.1
    edge = 1 / (2 * math.sqrt(lam))
    assert instanton_profile(lam, 1e3) == pytest.approx(edge)
    assert instanton_profile(lam, -1e3) == pytest.approx(-edge)
    taus = np.linspace(-4, 4, 20)
    x = instanton_profile(lam, taus)
    sech2 = 1 / np.cosh(taus / math.sqrt(2)) ** 2
    xdd = -edge * sech2 * np.tanh(taus / math.sqrt(2))  # analytic second derivative
    force = 4 * lam * x**3 - x
    np.testing.assert_allclose(xdd, force, atol=1e-8)


def test_valley_energy():
    assert valley_susy_energy(0.2) == pytest.approx(math.exp(-1 / (3 * 0.04)) / (2 * math.pi), rel=1e-14)
    assert valley_susy_energy(0.2) == pytest.approx(3.82e-5, rel=0.01)
    assert valley_susy_energy(1e-3) == 0.0
    with pytest.raises(ValueError):
        valley_susy_energy(0.0)


def test_valley_validity_note():
    assert valley_susy_estimate(0.2).validity_note == ""
    assert "beyond" in valley_susy_estimate(0.4).validity_note


def test_estimate_records():
    assert instanton_estimate(0.05).method == "instanton"
    assert perturbation_estimate(0, 0.1).value == pytest.approx(0.54875)
    assert harmonic_estimate(1.0, 0.0, math.inf).value == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ReferenceEstimate("unknown", 1.0)
    with pytest.raises(ValueError):
        ReferenceEstimate("instanton", math.nan)
