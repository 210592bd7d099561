"""Bare potentials: construction, evaluation and transformations.

Units are fixed throughout the package: hbar = 1 and unit mass, so the
kinetic term is ``p**2 / 2``.  Coefficients are stored in the monomial
basis ``V(x) = sum_n c_n x**n``; the factorial-weighted couplings used by
the operator-expansion flow are produced by :func:`to_couplings`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.polynomial import polynomial as P

STANDARD_KINDS = ("single_well", "double_well", "asym_double_well", "harmonic")
INTERACTIONS = ("linear", "quadratic", "quartic")


class PotentialError(ValueError):
    """Invalid potential configuration (e.g. unbounded below)."""


class DegenerateMinimumError(PotentialError):
    """Two or more global minima with equal value.

    The candidate minimizers are kept in ``minima`` so the caller can pick a
    branch explicitly with ``shift_to_minimum(p, branch=...)``.
    """

    def __init__(self, minima):
        self.minima = tuple(sorted(minima))
        super().__init__(f"degenerate global minima at x = {self.minima}")


@dataclass(frozen=True, eq=False)
class Polynomial1D:
    """One-variable polynomial potential ``sum_n coeffs[n] * x**n``."""

    coeffs: np.ndarray
    kind: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.coeffs, dtype=float))
        if c.ndim != 1:
            raise PotentialError("coefficients must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise PotentialError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    @property
    def leading(self) -> float:
        return float(self.coeffs[self.degree])

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def derivative(self, m: int = 1) -> "Polynomial1D":
        return Polynomial1D(P.polyder(self.coeffs, m) if m <= self.degree else [0.0])

    def padded(self, order: int) -> np.ndarray:
        """Coefficients zero-padded (or checked) to length ``order + 1``."""
        if self.degree > order:
            raise PotentialError(f"degree {self.degree} exceeds truncation order {order}")
        out = np.zeros(order + 1)
        n = min(order + 1, self.coeffs.size)
        out[:n] = self.coeffs[:n]
        return out

    def is_bounded_below(self) -> bool:
        return self.degree >= 2 and self.degree % 2 == 0 and self.leading > 0

    def check_flow_ready(self) -> None:
        if self.degree < 2:
            raise PotentialError("potential degree must be at least 2")
        if not self.is_bounded_below():
            raise PotentialError("potential is unbounded below (need even degree, positive leading coefficient)")

    def shifted(self, dx: float, de: float = 0.0) -> "Polynomial1D":
        """Return ``q(y) = p(y + dx) + de``."""
        c = _taylor_shift(self.coeffs, dx)
        c[0] += de
        return Polynomial1D(c)

    def to_record(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "coeffs": [float(v) for v in self.coeffs]}

    @classmethod
    def from_record(cls, record: Mapping) -> "Polynomial1D":
        kind = record.get("kind", "custom")
        params = dict(record.get("params", {}))
        if "coeffs" in record and record["coeffs"] is not None:
            return cls(record["coeffs"], kind=kind, params=params)
        if kind == "susy_plus":
            return susy_partner_potentials(SusyPotentialW(params["g"]))[0]
        return make_standard_potential(kind, params.get("lambda0", 0.0), params.get("h0", 0.0), m=params.get("m", 1.0))

    def __repr__(self) -> str:
        return f"Polynomial1D({list(self.coeffs)!r}, kind={self.kind!r})"


def _taylor_shift(coeffs, dx: float) -> np.ndarray:
    """Coefficients of ``p(y + dx)`` via Horner composition."""
    c = np.asarray(coeffs, dtype=float)
    out = np.zeros(c.size)
    for a in c[::-1]:
        # out <- out * (y + dx) + a
        shifted = np.zeros(c.size)
        shifted[1:] = out[:-1]
        out = shifted + dx * out
        out[0] += a
    return out


def to_couplings(p: Polynomial1D, order: int) -> np.ndarray:
    """Couplings ``a_n = n! c_n`` of the factorial-weighted expansion."""
    fact = np.array([math.factorial(n) for n in range(order + 1)], dtype=float)
    return p.padded(order) * fact


def from_couplings(a) -> Polynomial1D:
    a = np.asarray(a, dtype=float)
    fact = np.array([math.factorial(n) for n in range(a.size)], dtype=float)
    return Polynomial1D(a / fact)


def make_standard_potential(kind: str, lambda0: float, h0: float = 0.0, *, m: float = 1.0) -> Polynomial1D:
    """Build one of the standard bare potentials.

    ``single_well``: ``lambda0 x^4 + x^2/2``; ``double_well``:
    ``lambda0 x^4 - x^2/2``; ``asym_double_well``: double well plus
    ``h0 x``.  ``harmonic`` ignores ``lambda0`` and returns ``m^2 x^2 / 2``.
    """
    if kind == "harmonic":
        if not m > 0:
            raise PotentialError("harmonic mass must be positive")
        return Polynomial1D([0.0, 0.0, 0.5 * m * m], kind=kind, params={"m": m})
    if kind not in STANDARD_KINDS:
        raise PotentialError(f"unknown potential kind {kind!r}")
    if not lambda0 > 0:
        raise PotentialError(f"lambda0 must be positive, got {lambda0!r}")
    sign = 0.5 if kind == "single_well" else -0.5
    c = [0.0, 0.0, sign, 0.0, float(lambda0)]
    params = {"lambda0": float(lambda0)}
    if kind == "asym_double_well":
        c[1] = float(h0)
        params["h0"] = float(h0)
    return Polynomial1D(c, kind=kind, params=params)


@dataclass(frozen=True)
class SusyPotentialW:
    """Superpotential ``W(x) = g x^2 - x``."""

    g: float

    def as_polynomial(self) -> Polynomial1D:
        return Polynomial1D([0.0, -1.0, self.g])

    def __call__(self, x):
        return self.g * np.asarray(x) ** 2 - x


def susy_partner_potentials(w: SusyPotentialW) -> tuple[Polynomial1D, Polynomial1D]:
    """Partner potentials ``V_pm = W^2/2 pm W'/2``."""
    wc = w.as_polynomial().coeffs
    half_sq = 0.5 * P.polymul(wc, wc)
    half_d = 0.5 * P.polyder(wc)
    plus = P.polyadd(half_sq, half_d)
    minus = P.polysub(half_sq, half_d)
    params = {"g": float(w.g)}
    return (
        Polynomial1D(plus, kind="susy_plus", params=params),
        Polynomial1D(minus, kind="susy_minus", params=params),
    )


def real_critical_points(p: Polynomial1D, tol: float = 1e-12) -> np.ndarray:
    """All real roots of ``p'`` located by a bracketing sweep plus bisection.

    The sweep interval is ``[-X, X]`` with the Cauchy-type bound
    ``X = 2 max_n (|c_n| / |c_N|)^(1/(N-n))`` on the roots of ``p'``.
    Double roots (no sign change) are caught by also scanning ``p''``
    sign changes and testing ``|p'|`` there.
    """
    d = p.derivative().coeffs
    d = np.trim_zeros(d, "b")
    if d.size <= 1:
        return np.array([])
    lead = abs(d[-1])
    deg = d.size - 1
    bound = max((abs(d[k]) / lead) ** (1.0 / (deg - k)) for k in range(deg)) if deg else 0.0
    X = 2.0 * bound + 1.0
    xs = np.linspace(-X, X, 20001)
    f = P.polyval(xs, d)
    roots = []

    def fprime(x):
        return P.polyval(x, d)

    for i in np.nonzero(f == 0.0)[0]:
        roots.append(xs[i])
    for i in np.nonzero(np.sign(f[:-1]) * np.sign(f[1:]) < 0)[0]:
        lo, hi = xs[i], xs[i + 1]
        flo = f[i]
        while hi - lo > tol * max(1.0, abs(lo)):
            mid = 0.5 * (lo + hi)
            fm = fprime(mid)
            if fm == 0.0:
                lo = hi = mid
                break
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    # even-multiplicity roots of p': extrema of p' touching zero
    dd = P.polyder(d)
    g = P.polyval(xs, dd)
    scale = np.max(np.abs(f)) + 1.0
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        lo, hi = xs[i], xs[i + 1]
        glo = g[i]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = P.polyval(mid, dd)
            if np.sign(gm) == np.sign(glo):
                lo, glo = mid, gm
            else:
                hi = mid
        x = 0.5 * (lo + hi)
        if abs(fprime(x)) < 1e-10 * scale:
            roots.append(x)
    roots = np.sort(np.array(roots))
    if roots.size:
        keep = np.concatenate([[True], np.diff(roots) > 1e-9])
        roots = roots[keep]
    return roots


@dataclass(frozen=True)
class MinimumShift:
    x_min: float
    shifted: Polynomial1D


def shift_to_minimum(p: Polynomial1D, branch: str | None = None, rel_tie: float = 1e-12) -> MinimumShift:
    """Re-expand ``p`` around its global minimizer.

    Returns ``x_min`` and ``q(y) = p(x_min + y)``.  When several critical
    points share the minimal value (within ``rel_tie``) a
    :class:`DegenerateMinimumError` is raised unless ``branch`` is
    ``"left"`` or ``"right"``.
    """
    p.check_flow_ready()
    crit = real_critical_points(p)
    vals = p(crit)
    vmin = vals.min()
    scale = max(1.0, abs(vmin))
    ties = crit[np.abs(vals - vmin) <= rel_tie * scale]
    if ties.size > 1:
        if branch == "left":
            x0 = float(ties[0])
        elif branch == "right":
            x0 = float(ties[-1])
        else:
            raise DegenerateMinimumError(ties)
    else:
        x0 = float(ties[0])
    q = p.shifted(x0)
    c = np.array(q.coeffs)
    c[1] = 0.0  # stationarity holds to root tolerance; remove the residue
    return MinimumShift(x0, Polynomial1D(c, kind=p.kind, params={**p.params, "x_min": x0}))


@dataclass(frozen=True, eq=False)
class BivariatePolynomial:
    """Two-variable polynomial stored as ``{(i, j): c_ij}`` for ``x1^i x2^j``."""

    coeffs: Mapping[tuple, float]
    max_degree: int | None = None

    def __post_init__(self):
        clean = {}
        for (i, j), v in dict(self.coeffs).items():
            i, j = int(i), int(j)
            if i < 0 or j < 0:
                raise PotentialError("exponents must be non-negative")
            if v != 0.0:
                clean[(i, j)] = clean.get((i, j), 0.0) + float(v)
        if self.max_degree is not None and clean and max(i + j for i, j in clean) > self.max_degree:
            raise PotentialError(f"total degree exceeds bound {self.max_degree}")
        object.__setattr__(self, "coeffs", clean)

    @property
    def degree(self) -> int:
        return max((i + j for i, j in self.coeffs), default=0)

    def coefficient(self, i: int, j: int) -> float:
        return self.coeffs.get((i, j), 0.0)

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        total = np.zeros(np.broadcast(x1, x2).shape)
        for (i, j), v in sorted(self.coeffs.items()):
            total = total + v * x1**i * x2**j
        return total

    def to_array(self, order: int) -> np.ndarray:
        c = np.zeros((order + 1, order + 1))
        for (i, j), v in self.coeffs.items():
            if i + j > order:
                raise PotentialError(f"term x1^{i} x2^{j} exceeds truncation order {order}")
            c[i, j] = v
        return c

    def to_record(self) -> dict:
        return {"coeffs": [[i, j, v] for (i, j), v in sorted(self.coeffs.items())]}

    @classmethod
    def from_record(cls, record: Mapping) -> "BivariatePolynomial":
        return cls({(int(i), int(j)): float(v) for i, j, v in record["coeffs"]})


def _binomial_power(a: float, b: float, n: int) -> dict:
    """Terms of ``(a x1 + b x2)^n``."""
    return {(k, n - k): math.comb(n, k) * a**k * b ** (n - k) for k in range(n + 1)}


def make_two_particle_potential(lambda0: float, interaction: str, strength: float) -> BivariatePolynomial:
    """Two coupled double wells in the particle coordinates ``(phi1, phi2)``.

    ``interaction`` selects ``C phi1 phi2`` (``"linear"``),
    ``C2 (phi1 - phi2)^2`` (``"quadratic"``) or ``C4 (phi1 - phi2)^4``
    (``"quartic"``); ``strength`` is the corresponding constant.
    """
    if not lambda0 > 0:
        raise PotentialError(f"lambda0 must be positive, got {lambda0!r}")
    terms = {(2, 0): -0.5, (4, 0): lambda0, (0, 2): -0.5, (0, 4): lambda0}
    if interaction == "linear":
        extra = {(1, 1): strength}
    elif interaction == "quadratic":
        extra = {k: strength * v for k, v in _binomial_power(1.0, -1.0, 2).items()}
    elif interaction == "quartic":
        extra = {k: strength * v for k, v in _binomial_power(1.0, -1.0, 4).items()}
    else:
        raise PotentialError(f"unknown interaction {interaction!r}")
    for k, v in extra.items():
        terms[k] = terms.get(k, 0.0) + v
    return BivariatePolynomial(terms)


def rotate_to_normal_coordinates(p: BivariatePolynomial, max_degree: int | None = None) -> BivariatePolynomial:
    """Substitute ``phi1 = (x1 + x2)/sqrt2``, ``phi2 = (x2 - x1)/sqrt2``."""
    if max_degree is not None and p.degree > max_degree:
        raise PotentialError(f"total degree {p.degree} exceeds truncation bound {max_degree}")
    s = 1.0 / math.sqrt(2.0)
    out: dict = {}
    for (i, j), v in p.coeffs.items():
        left = _binomial_power(s, s, i)  # phi1^i in (x1, x2)
        right = _binomial_power(-s, s, j)  # phi2^j
        for (a1, a2), u in left.items():
            for (b1, b2), w in right.items():
                key = (a1 + b1, a2 + b2)
                out[key] = out.get(key, 0.0) + v * u * w
    # exact cancellations land at ~1e-17; drop them so parity is structural
    scale = max((abs(v) for v in p.coeffs.values()), default=1.0)
    return BivariatePolynomial({k: v for k, v in out.items() if abs(v) > 1e-14 * scale}, max_degree=max_degree)
