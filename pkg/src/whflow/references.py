"""Closed-form and series reference values.

Harmonic flow in closed form, Rayleigh-Schrödinger series for the quartic
oscillator and the SUSY partner potential, the dilute instanton-gas gap of
the symmetric double well and the valley estimate for the SUSY vacuum
energy.  Everything here is a plain function of its parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUSY_SINGLE_WELL_THRESHOLD = (1.0 / 108.0) ** 0.25  # ~0.31: V+ has one minimum above this g


@dataclass(frozen=True)
class ReferenceEstimate:
    method: str
    value: float
    validity_note: str = ""

    def __post_init__(self):
        if self.method not in ("harmonic_exact", "perturbation2", "instanton", "valley_susy"):
            raise ValueError(f"unknown reference method {self.method!r}")
        if not math.isfinite(self.value):
            raise ValueError("reference value must be finite")


def _harmonic_primitive(p: float) -> float:
    # p log((1 + p^2)/p^2) + 2 atan p, with the limits at p = 0 and p = inf
    if p == 0.0:
        return 0.0
    if math.isinf(p):
        return math.pi
    return p * math.log1p(1.0 / (p * p)) + 2.0 * math.atan(p)


def harmonic_a0_exact(m: float, lam: float, lam0: float) -> float:
    """Vacuum constant ``a_0(Lambda)`` of the harmonic flow started at ``a_0(lam0) = 0``.

    ``lam0`` may be ``inf``; ``lam = 0`` gives the infrared value.
    """
    if not m > 0:
        raise ValueError("mass must be positive")
    if not 0.0 <= lam <= lam0:
        raise ValueError("need 0 <= lam <= lam0")
    return m / (2.0 * math.pi) * (_harmonic_primitive(lam0 / m) - _harmonic_primitive(lam / m))


def perturbative_energy(n: int, lambda0: float) -> float:
    """Second-order series for ``lambda0 x^4 + x^2/2``, never resummed."""
    return (
        (n + 0.5)
        + 0.75 * lambda0 * (2 * n**2 + 2 * n + 1)
        - 0.125 * lambda0**2 * (34 * n**3 + 51 * n**2 + 59 * n + 21)
    )


def susy_perturbative_terms(n: int, g: float) -> tuple:
    """``(order 0, order g^2 pair, order g^4)`` of the SUSY partner series, as printed."""
    g2 = (3.0 / 8.0) * g**2 * (2 * n**2 + 2 * n + 1) - (3.0 / 8.0) * g**2 * (10 * n**2 + 2 * n + 1)
    g4 = -(1.0 / 32.0) * g**4 * (34 * n**3 + 51 * n**2 + 59 * n + 21)
    return float(n), g2, g4


def susy_perturbative_energy(n: int, g: float) -> float:
    return sum(susy_perturbative_terms(n, g))


def instanton_gap(lambda0: float) -> float:
    """Dilute-gas splitting ``2 sqrt(2 sqrt2 / (pi lambda0)) exp(-1 / (3 sqrt2 lambda0))``."""
    if not lambda0 > 0:
        raise ValueError("lambda0 must be positive")
    return 2.0 * math.sqrt(2.0 * math.sqrt(2.0) / (math.pi * lambda0)) * math.exp(-1.0 / (3.0 * math.sqrt(2.0) * lambda0))


def instanton_profile(lambda0: float, tau, tau0: float = 0.0, sign: int = 1):
    """Kink ``x(tau) = sign * tanh((tau - tau0)/sqrt2) / (2 sqrt(lambda0))``."""
    if not lambda0 > 0:
        raise ValueError("lambda0 must be positive")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return sign * np.tanh((np.asarray(tau, dtype=float) - tau0) / math.sqrt(2.0)) / (2.0 * math.sqrt(lambda0))


def valley_susy_energy(g: float) -> float:
    """``exp(-1/(3 g^2)) / (2 pi)``."""
    if not g > 0:
        raise ValueError("g must be positive")
    return math.exp(-1.0 / (3.0 * g * g)) / (2.0 * math.pi)


def valley_susy_estimate(g: float) -> ReferenceEstimate:
    note = ""
    if g > SUSY_SINGLE_WELL_THRESHOLD:
        note = f"g = {g:g} is beyond the valley regime (V+ is single-welled for g > {SUSY_SINGLE_WELL_THRESHOLD:.4f})"
    return ReferenceEstimate("valley_susy", valley_susy_energy(g), note)


def instanton_estimate(lambda0: float) -> ReferenceEstimate:
    return ReferenceEstimate("instanton", instanton_gap(lambda0), "dilute gas; exact as lambda0 -> 0")


def perturbation_estimate(n: int, lambda0: float) -> ReferenceEstimate:
    return ReferenceEstimate("perturbation2", perturbative_energy(n, lambda0), "asymptotic series, second order")


def harmonic_estimate(m: float, lam: float, lam0: float) -> ReferenceEstimate:
    return ReferenceEstimate("harmonic_exact", harmonic_a0_exact(m, lam, lam0))
