"""Truncated series flow for two coupled variables.

``Lambda dV/dLambda = -(Lambda/2pi) log det(I + H/Lambda^2)`` with ``H`` the
Hessian of ``V(x1, x2)``; ``V`` is a :class:`TruncatedSeries2` in monomial
coefficients, truncated at total degree ``N``.  The determinant is expanded
as ``(1 + H11~)(1 + H22~) - H12~^2`` with ``H~ = H/Lambda^2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.signal import convolve2d

from .coupling_flow import MassPoleError
from .flowconfig import TWO_PI, FlowConfig, Termination
from .observables import TwoFieldEffectivePotential
from .potentials import BivariatePolynomial

from .series import SeriesDomainError, TruncatedSeries2, _tri_mask, log_coeffs_2d, series_log

log = logging.getLogger(__name__)


def hessian_series(V: TruncatedSeries2) -> tuple:
    """``(H11, H12, H22)`` as series."""
    return V.derivative(0, 2), V.derivative(0).derivative(1), V.derivative(1, 2)


def _det_series(V: TruncatedSeries2, lam: float, floor: float | None = None) -> TruncatedSeries2:
    h11, h12, h22 = hessian_series(V)
    s = 1.0 / (lam * lam)
    t11, t12, t22 = h11 * s + 1.0, h12 * s, h22 * s + 1.0
    det = t11 * t22 - t12 * t12
    if floor is not None:
        # trial stages may probe past the pole; the event stops the flow
        if det.coeffs[0, 0] < floor or t11.coeffs[0, 0] <= 0:
            c = np.array(det.coeffs)
            c[0, 0] = max(c[0, 0], floor)
            return TruncatedSeries2(c)
        return det
    if not (t11.coeffs[0, 0] > 0 and det.coeffs[0, 0] > 0):
        raise MassPoleError(lam, detail=" (two-field determinant constant term <= 0)")
    return det


def _hessian_arrays(c: np.ndarray) -> tuple:
    n = c.shape[0]
    k = np.arange(n, dtype=float)
    h11 = np.zeros_like(c)
    h22 = np.zeros_like(c)
    h12 = np.zeros_like(c)
    h11[:-2, :] = c[2:, :] * (k[2:] * k[1:-1])[:, None]
    h22[:, :-2] = c[:, 2:] * (k[2:] * k[1:-1])[None, :]
    h12[:-1, :-1] = c[1:, 1:] * np.outer(k[1:], k[1:])
    return h11, h12, h22


def _det_array(c: np.ndarray, lam: float, floor: float) -> np.ndarray:
    # array twin of _det_series(..., floor) for the integrator inner loop
    n = c.shape[0]
    h11, h12, h22 = _hessian_arrays(c)
    s = 1.0 / (lam * lam)
    t11, t12, t22 = h11 * s, h12 * s, h22 * s
    t11[0, 0] += 1.0
    t22[0, 0] += 1.0
    det = convolve2d(t11, t22)[:n, :n] - convolve2d(t12, t12)[:n, :n]
    det = np.where(_tri_mask(n - 1), det, 0.0)
    det[0, 0] = max(det[0, 0], floor)
    return det


def beta_two_field(V: TruncatedSeries2, lam: float) -> TruncatedSeries2:
    """``Lambda dV/dLambda`` as a series of the same order."""
    return series_log(_det_series(V, lam)) * (-lam / TWO_PI)


def _shift(c: np.ndarray, i: int, j: int, order: int) -> np.ndarray:
    # multiply by x1^i x2^j and truncate
    out = np.zeros_like(c)
    if i <= order and j <= order:
        out[i:, j:] = c[: order + 1 - i, : order + 1 - j]
    return out


def beta_two_field_jacobian(V: TruncatedSeries2, lam: float, floor: float | None = None) -> np.ndarray:
    """``d(Lambda dV/dLambda)[k] / d c[m]`` over the triangle-packed coefficients.

    Uses ``d log det(I + H~) = Tr((I + H~)^-1 dH~)`` with the inverse
    written as the adjugate over the determinant series.
    """
    order = V.order
    h11, h12, h22 = hessian_series(V)
    s = 1.0 / (lam * lam)
    t11, t12, t22 = h11 * s + 1.0, h12 * s, h22 * s + 1.0
    det = _det_series(V, lam, floor)
    inv_det = det.reciprocal()
    m11, m12, m22 = (t22 * inv_det).coeffs, (-(t12 * inv_det)).coeffs, (t11 * inv_det).coeffs
    mask = _tri_mask(order)
    pairs = list(zip(*np.nonzero(mask)))
    J = np.zeros((len(pairs), len(pairs)))
    for col, (i, j) in enumerate(pairs):
        d = np.zeros((order + 1, order + 1))
        if i >= 2:
            d += i * (i - 1) * _shift(m11, i - 2, j, order)
        if j >= 2:
            d += j * (j - 1) * _shift(m22, i, j - 2, order)
        if i >= 1 and j >= 1:
            d += 2.0 * i * j * _shift(m12, i - 1, j - 1, order)
        J[:, col] = d[mask]
    return -(lam / TWO_PI) * s * J


def _matmul(a: tuple, b: tuple) -> tuple:
    # 2x2 matrices of series as (m11, m12, m21, m22)
    return (
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    )


def _trace_powers(m: tuple, kmax: int):
    power = m
    for k in range(1, kmax + 1):
        yield k, power[0] + power[3]
        power = _matmul(power, m)


def uv_tail_two_field(V: TruncatedSeries2, lam0: float, max_terms: int = 200) -> TruncatedSeries2:
    """``(1/2pi) int_lam0^inf log det(I + H/L^2) dL`` via ``sum_k (-1)^(k+1) Tr H^k / (k (2k-1) lam0^(2k-1))``."""
    h11, h12, h22 = hessian_series(V)
    out = TruncatedSeries2.zeros(V.order)
    for k, tr in _trace_powers((h11, h12, h12, h22), max_terms):
        term = tr * ((-1) ** (k + 1) / (k * (2 * k - 1) * lam0 ** (2 * k - 1)))
        out = out + term
        if np.max(np.abs(term.coeffs)) <= 1e-17 * (1.0 + np.max(np.abs(out.coeffs))):
            return out / TWO_PI
    raise MassPoleError(lam0, detail=" (two-field UV tail did not converge)")


def ir_tail_two_field(V: TruncatedSeries2, lam_ir: float, max_terms: int = 200) -> TruncatedSeries2:
    """``(1/2pi) int_0^lam_ir log det(I + H/L^2) dL``.

    Eigenvalue-wise this is ``L log(1 + c/L^2) + 2 L sum_j (-1)^j (L^2/c)^j/(2j+1)``,
    so the sum over eigenvalues needs ``Tr H^-j``; valid while the Hessian
    at the expansion point exceeds ``lam_ir^2``.
    """
    h11, h12, h22 = hessian_series(V)
    det = h11 * h22 - h12 * h12
    h0 = np.array([[h11.coeffs[0, 0], h12.coeffs[0, 0]], [h12.coeffs[0, 0], h22.coeffs[0, 0]]])
    if not np.linalg.eigvalsh(h0).min() > lam_ir**2:
        raise ValueError("IR tail needs Hessian eigenvalues above lam_ir^2 at the expansion point")
    inv_det = det.reciprocal()
    inv = (h22 * inv_det, -h12 * inv_det, -h12 * inv_det, h11 * inv_det)
    L2 = lam_ir * lam_ir
    acc = TruncatedSeries2.constant(2.0, V.order)  # j = 0 term: Tr I
    for j, tr in _trace_powers(inv, max_terms):
        term = tr * ((-1) ** j * L2**j / (2 * j + 1))
        acc = acc + term
        if np.max(np.abs(term.coeffs)) <= 1e-17:
            break
    logdet = series_log(_det_series(V, lam_ir))
    return (logdet * lam_ir + acc * (2.0 * lam_ir)) / TWO_PI


@dataclass(frozen=True, eq=False)
class TwoFieldSnapshot:
    lam: float
    series: TruncatedSeries2


@dataclass(frozen=True, eq=False)
class TwoFieldTrajectory:
    snapshots: tuple
    termination: Termination
    config: FlowConfig
    radius: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> TwoFieldSnapshot:
        return self.snapshots[-1]

    @property
    def completed(self) -> bool:
        return self.termination.completed

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.snapshots])

    def effective_potential(self, allow_partial: bool = False) -> TwoFieldEffectivePotential:
        if not (self.completed or allow_partial):
            raise MassPoleError(self.termination.lam or float("nan"), detail=" (two-field flow did not complete)")
        snap = self.final
        V = snap.series
        if self.config.ir_completion:
            try:
                V = V + ir_tail_two_field(V, snap.lam)
            except ValueError:
                log.info("two-field IR tail skipped: Hessian at the origin below lam_ir^2")
        return TwoFieldEffectivePotential(V.coeffs, snap.lam, self.radius, completed=self.completed)


def evolve_two_field(
    V0: BivariatePolynomial | TruncatedSeries2,
    cfg: FlowConfig | None = None,
    order: int = 12,
    radius: float = 1.0,
) -> TwoFieldTrajectory:
    """Integrate the two-field series flow from ``cfg.lambda0`` to ``cfg.lambda_ir``."""
    cfg = cfg or FlowConfig()
    if isinstance(V0, BivariatePolynomial):
        start = TruncatedSeries2(V0.to_array(order))
    else:
        start = V0
        order = V0.order
    mask = _tri_mask(order)
    lam0 = cfg.lambda0
    if cfg.uv_completion:
        start = start + uv_tail_two_field(start, lam0)
    _det_series(start, lam0)  # precondition

    def unpack(y):
        c = np.zeros((order + 1, order + 1))
        c[mask] = y
        return TruncatedSeries2(c)

    reached = [0.0]

    def rhs(s, y):
        if not np.all(np.isfinite(y)):
            raise SeriesDomainError("non-finite couplings")
        reached[0] = max(reached[0], s)
        lam = lam0 * math.exp(-s)
        c = np.zeros((order + 1, order + 1))
        c[mask] = y
        return (lam / TWO_PI) * log_coeffs_2d(_det_array(c, lam, cfg.pole_guard))[mask]

    def pole(s, y):
        lam = lam0 * math.exp(-s)
        V = unpack(y)
        h11 = 2.0 * V.coeffs[2, 0] / lam**2
        h22 = 2.0 * V.coeffs[0, 2] / lam**2
        h12 = V.coeffs[1, 1] / lam**2
        return min(1.0 + h11, (1.0 + h11) * (1.0 + h22) - h12 * h12) - cfg.pole_guard

    def jac(s, y):
        lam = lam0 * math.exp(-s)
        return -beta_two_field_jacobian(unpack(y), lam, floor=cfg.pole_guard)

    pole.terminal = True
    pole.direction = -1
    kwargs = {"jac": jac} if cfg.series_method in ("Radau", "BDF", "LSODA") else {}
    try:
        sol = solve_ivp(
            rhs,
            (0.0, cfg.s_final),
            start.coeffs[mask],
            method=cfg.series_method,
            t_eval=cfg.schedule_s(),
            rtol=cfg.rel_tol,
            atol=cfg.abs_tol,
            events=pole,
            **kwargs,
        )
    except SeriesDomainError as exc:
        # the truncated couplings blew up inside a trial stage; no snapshot beyond the start is trusted
        lam_stop = lam0 * math.exp(-reached[0])
        term = Termination("step_underflow", lam_stop, None, f"integration broke down: {exc}")
        return TwoFieldTrajectory((TwoFieldSnapshot(lam0, start),), term, cfg, radius, {"order": order})
    snaps = [TwoFieldSnapshot(float(lam0 * math.exp(-t)), unpack(sol.y[:, k])) for k, t in enumerate(sol.t)]
    if sol.status == 1:
        lam_stop = lam0 * math.exp(-float(sol.t_events[0][0]))
        if not snaps or snaps[-1].lam > lam_stop:
            snaps.append(TwoFieldSnapshot(lam_stop, unpack(sol.y_events[0][0])))
        term = Termination("spinodal", lam_stop, 0.0, "two-field mass pole reached the guard")
    elif sol.status == -1:
        lam_stop = lam0 * math.exp(-float(sol.t[-1])) if sol.t.size else lam0
        term = Termination("step_underflow", lam_stop, None, sol.message)
    else:
        term = Termination("completed", snaps[-1].lam)
    if not snaps:
        snaps = [TwoFieldSnapshot(lam0, start)]
    return TwoFieldTrajectory(tuple(snaps), term, cfg, radius, {"order": order, "nfev": int(sol.nfev)})
