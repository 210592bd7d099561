"""Physical quantities read off the infrared effective potential.

Ground-state energy is the value at the minimum, the gap is the square
root of the curvature there, and moments follow from the single-pole
propagator ``1/(E^2 + m_eff^2)``.  The connected four-point function uses
``lambda_eff = V''''(<x>)``: with one quartic vertex ``lambda_eff/4!`` and
four propagators ``exp(-m|tau|)/(2m)`` it equals
``-lambda_eff / (32 m_eff^5)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.polynomial import polynomial as P


class DomainTooSmallError(ValueError):
    """The minimum sits on (or too close to) the edge of the domain."""


class InvalidExtractionError(ValueError):
    """Curvature at the located minimum is negative."""


class IncompleteFlowError(RuntimeError):
    """Refused to extract from a flow that stopped too early."""


@dataclass(frozen=True)
class ObservableSet:
    x_vev: float
    e0: float
    m_eff: float
    lambda_eff: float
    m1: float
    m2: float
    m4: float
    moments_defined: bool = True
    partial: bool = False

    @property
    def m4_connected(self) -> float:
        return self.m4 - 3.0 * self.m2**2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ObservableSet":
        return cls(**d)


def connected_four_point(lambda_eff: float, m_eff: float) -> float:
    return -lambda_eff / (32.0 * m_eff**5)


class GridEffectivePotential:
    """Effective potential sampled on a uniform grid.

    Derivatives are taken from a least-squares quartic over a symmetric
    ``window``-node stencil around the nearest node.  ``offset`` is a
    constant added to the samples; keeping it separate leaves the fitted
    derivatives bit-identical under an energy shift.
    """

    kind = "grid"

    def __init__(self, grid, values, lam: float, completed: bool = True, window: int = 11, offset: float = 0.0):
        self.grid = grid
        self.x = grid.x
        self.values = np.asarray(values, dtype=float)
        self.lam = float(lam)
        self.completed = completed
        if window % 2 == 0 or window < 5:
            raise ValueError("window must be odd and >= 5")
        self.window = window
        self.offset = float(offset)

    @property
    def domain(self) -> tuple:
        return (self.grid.x_min, self.grid.x_max)

    def __call__(self, x):
        return np.interp(x, self.x, self.values) + self.offset

    def shifted(self, dx: float, de: float = 0.0) -> "GridEffectivePotential":
        """``V(x - dx) + de`` (moves the abscissa, keeps the samples)."""
        from .grid_flow import Grid1D

        g = Grid1D(self.grid.x_min + dx, self.grid.x_max + dx, self.grid.points)
        return GridEffectivePotential(g, self.values, self.lam, self.completed, self.window, self.offset + de)

    def _fit_at_node(self, i: int) -> np.ndarray:
        """Quartic in ``x - x_i`` (offset excluded), fitted relative to the centre sample."""
        half = self.window // 2
        if i < half or i > self.x.size - 1 - half:
            raise DomainTooSmallError(f"node {i} is within {half} nodes of the grid edge")
        h = self.grid.h
        y = np.arange(-half, half + 1, dtype=float)
        centre = self.values[i]
        c = P.polyfit(y, self.values[i - half : i + half + 1] - centre, 4)
        c[0] += centre
        return c / h ** np.arange(5)

    def _nearest(self, x: float) -> int:
        return int(np.clip(round((x - self.grid.x_min) / self.grid.h), 0, self.x.size - 1))

    def taylor(self, x: float) -> tuple:
        """``(V, V', V'', V''', V'''')`` at ``x``."""
        i = self._nearest(x)
        c = self._fit_at_node(i)
        y = x - self.x[i]
        return tuple(float(P.polyval(y, P.polyder(c, m))) if m else float(P.polyval(y, c)) + self.offset for m in range(5))

    def derivative(self, x: float, m: int) -> float:
        return self.taylor(x)[m]

    def locate_vacuum(self) -> float:
        i = int(np.argmin(self.values))
        half = self.window // 2
        if i <= half or i >= self.x.size - 1 - half:
            raise DomainTooSmallError(f"minimum at x = {self.x[i]:.4g} lies on the domain boundary")
        for _ in range(3):
            c = self._fit_at_node(i)
            roots = P.polyroots(P.polyder(c))
            real = roots[np.abs(roots.imag) < 1e-9 * (1 + np.abs(roots.real))].real
            curv = P.polyval(real, P.polyder(c, 2))
            cand = real[curv >= 0]
            if cand.size == 0:
                return float(self.x[i])
            y = float(cand[np.argmin(np.abs(cand))])
            if abs(y) <= 0.5 * self.grid.h:
                return float(self.x[i] + y)
            j = self._nearest(self.x[i] + y)
            if j == i:
                return float(self.x[i] + y)
            i = j
        return float(self.x[i] + y)


class SeriesEffectivePotential:
    """Polynomial effective potential ``sum c_n (x - center)^n``.

    Only trusted within ``radius`` of the expansion point.
    """

    kind = "series"

    def __init__(self, coeffs, center: float = 0.0, radius: float = 1.0, lam: float = 0.0, completed: bool = True):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.center = float(center)
        self.radius = float(radius)
        self.lam = float(lam)
        self.completed = completed

    @property
    def domain(self) -> tuple:
        return (self.center - self.radius, self.center + self.radius)

    def __call__(self, x):
        return P.polyval(np.asarray(x, dtype=float) - self.center, self.coeffs)

    def shifted(self, dx: float, de: float = 0.0) -> "SeriesEffectivePotential":
        c = self.coeffs.copy()
        c[0] += de
        return SeriesEffectivePotential(c, self.center + dx, self.radius, self.lam, self.completed)

    def derivative(self, x: float, m: int) -> float:
        if m == 0:
            return float(self(x))
        d = P.polyder(self.coeffs, m) if m < self.coeffs.size else np.zeros(1)
        return float(P.polyval(x - self.center, d))

    def taylor(self, x: float) -> tuple:
        return tuple(self.derivative(x, m) for m in range(5))

    def locate_vacuum(self) -> float:
        d = np.trim_zeros(P.polyder(self.coeffs), "b")
        lo, hi = -self.radius, self.radius
        if d.size == 0:
            raise InvalidExtractionError("flat potential has no isolated minimum")
        roots = P.polyroots(d) if d.size > 1 else np.array([])
        real = roots[np.abs(roots.imag) < 1e-9 * (1 + np.abs(roots.real))].real
        real = real[(real > lo) & (real < hi)]
        if real.size == 0:
            raise DomainTooSmallError("no stationary point inside the series validity radius")
        vals = P.polyval(real, self.coeffs)
        y = float(real[np.argmin(vals)])
        edge = min(P.polyval(lo, self.coeffs), P.polyval(hi, self.coeffs))
        if edge < vals.min():
            raise DomainTooSmallError("series minimum lies on the edge of its validity radius")
        # polish the root
        for _ in range(3):
            g1 = P.polyval(y, d)
            g2 = P.polyval(y, P.polyder(d))
            if g2 == 0:
                break
            y -= g1 / g2
        return self.center + y


def locate_vacuum(V) -> float:
    return V.locate_vacuum()


def extract_observables(V, x_vev: float | None = None) -> ObservableSet:
    """Vacuum, ground-state energy, gap and moments from ``V``."""
    if x_vev is None:
        x_vev = V.locate_vacuum()
    v0, _, v2, _, v4 = V.taylor(x_vev)
    if v2 < 0:
        raise InvalidExtractionError(f"negative curvature {v2:.3g} at the minimum x = {x_vev:.4g}")
    m_eff = math.sqrt(v2)
    if m_eff == 0.0:
        nan = float("nan")
        return ObservableSet(x_vev, v0, 0.0, v4, x_vev, nan, nan, moments_defined=False)
    m2 = 1.0 / (2.0 * m_eff)
    m4 = connected_four_point(v4, m_eff) + 3.0 * m2**2
    return ObservableSet(
        x_vev=float(x_vev),
        e0=float(v0),
        m_eff=m_eff,
        lambda_eff=float(v4),
        m1=float(x_vev),
        m2=m2,
        m4=m4,
        partial=not getattr(V, "completed", True),
    )


def observables_from_trajectory(traj, partial_factor: float = 0.05) -> ObservableSet:
    """Extract from a trajectory, accepting an early stop only below ``partial_factor * m_eff``.

    Only a spinodal stop qualifies: after a step-size collapse the last
    snapshot is the product of a failing integration and is never used.
    """
    if traj.completed:
        return extract_observables(traj.effective_potential())
    if traj.termination.kind != "spinodal":
        raise IncompleteFlowError(
            f"flow broke down at Lambda = {traj.termination.lam} ({traj.termination.kind}: {traj.termination.message})"
        )
    V = traj.effective_potential(allow_partial=True)
    lam_stop = traj.termination.lam
    try:
        obs = extract_observables(V)
    except (InvalidExtractionError, DomainTooSmallError) as exc:
        raise IncompleteFlowError(
            f"flow stopped at Lambda = {lam_stop} ({traj.termination.kind}) and its last snapshot "
            f"has no usable minimum: {exc}"
        ) from exc
    if lam_stop is None or not lam_stop < partial_factor * obs.m_eff:
        raise IncompleteFlowError(
            f"flow stopped at Lambda = {lam_stop} ({traj.termination.kind}); "
            f"too early for m_eff ~ {obs.m_eff:.4g}"
        )
    return obs


class TwoFieldEffectivePotential:
    """Two-variable polynomial effective potential from the series flow."""

    def __init__(self, coeffs, lam: float = 0.0, radius: float = 1.0, completed: bool = True):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.lam = float(lam)
        self.radius = float(radius)
        self.completed = completed

    def __call__(self, x1, x2):
        return P.polyval2d(x1, x2, self.coeffs)

    def _d(self, a: int, b: int) -> np.ndarray:
        c = self.coeffs
        if a:
            c = P.polyder(c, a, axis=0)
        if b:
            c = P.polyder(c, b, axis=1)
        return c

    def gradient(self, x):
        return np.array([P.polyval2d(x[0], x[1], self._d(1, 0)), P.polyval2d(x[0], x[1], self._d(0, 1))])

    def hessian(self, x):
        h11 = P.polyval2d(x[0], x[1], self._d(2, 0))
        h12 = P.polyval2d(x[0], x[1], self._d(1, 1))
        h22 = P.polyval2d(x[0], x[1], self._d(0, 2))
        return np.array([[h11, h12], [h12, h22]])

    def locate_vacuum(self, start=(0.0, 0.0)) -> np.ndarray:
        x = np.array(start, dtype=float)
        for _ in range(100):
            g = self.gradient(x)
            if np.max(np.abs(g)) < 1e-13:
                break
            step = np.linalg.solve(self.hessian(x), g)
            x = x - step
            if np.max(np.abs(step)) < 1e-15:
                break
        if np.linalg.norm(x) > self.radius:
            raise DomainTooSmallError("two-field vacuum outside the series validity radius")
        return x


def two_field_gap(V2: TwoFieldEffectivePotential, vacuum=None) -> float:
    """Symmetric-state splitting: ``sqrt(d^2 V / dx2^2)`` at the vacuum."""
    x = V2.locate_vacuum() if vacuum is None else np.asarray(vacuum, dtype=float)
    H = V2.hessian(x)
    eig = np.linalg.eigvalsh(H)
    if eig.min() < -1e-12 * max(1.0, abs(eig).max()):
        raise InvalidExtractionError(f"saddle at the candidate vacuum (Hessian eigenvalues {eig})")
    return math.sqrt(max(H[1, 1], 0.0))
