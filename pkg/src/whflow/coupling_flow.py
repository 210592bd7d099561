"""Truncated operator-expansion flow for one variable.

``V_Lambda(phi) = sum_n a_n phi^n / n!`` with ``n <= N``.  The beta
functions are generated mechanically: expand ``log(1 + V''/Lambda^2)`` as
a truncated series and read off ``n!`` times the coefficient of
``phi^n``.  Couplings above ``N`` are taken to vanish.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .flowconfig import TWO_PI, FlowConfig, SpinodalError, Termination
from .observables import SeriesEffectivePotential
from .potentials import Polynomial1D, from_couplings, shift_to_minimum, to_couplings
from .series import TruncatedSeries1, log1p_coeffs, series_log1p

log = logging.getLogger(__name__)

_FACT = np.array([math.factorial(n) for n in range(64)], dtype=float)


class MassPoleError(SpinodalError):
    """``Lambda^2 + a_2 <= 0``: the flow hit the mass pole."""


@dataclass(frozen=True, eq=False)
class CouplingVector:
    lam: float
    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 1 or a.size < 3:
            raise ValueError("need couplings a_0..a_N with N >= 2")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        if not self.lam > 0:
            raise ValueError("cutoff must be positive")

    @property
    def order(self) -> int:
        return self.a.size - 1

    def monomial(self) -> np.ndarray:
        return self.a / _FACT[: self.a.size]


def _curvature_series(a: np.ndarray, lam: float) -> TruncatedSeries1:
    # V''/Lambda^2 = sum_k a_{k+2} phi^k / (k! Lambda^2)
    n = a.size - 1
    u = np.zeros(n + 1)
    u[: n - 1] = a[2:] / (_FACT[: n - 1] * lam * lam)
    return TruncatedSeries1(u)


def _beta_raw(lam: float, a: np.ndarray) -> np.ndarray:
    # array-level twin of beta_couplings for the integrator's inner loop
    n = a.size - 1
    u = np.zeros(n + 1)
    u[: n - 1] = a[2:] / (_FACT[: n - 1] * lam * lam)
    return -(lam / TWO_PI) * log1p_coeffs(u) * _FACT[: n + 1]


def beta_couplings(c: CouplingVector) -> np.ndarray:
    """``Lambda da_n/dLambda`` for ``n = 0..N``."""
    lam, a = c.lam, c.a
    if not lam * lam + a[2] > 0:
        raise MassPoleError(lam, detail=f" (Lambda^2 + a_2 = {lam * lam + a[2]:.3g})")
    logs = series_log1p(_curvature_series(a, lam))
    return -(lam / TWO_PI) * logs.coeffs * _FACT[: a.size]


def beta_couplings_jacobian(c: CouplingVector) -> np.ndarray:
    """``d beta_n / d a_j`` from ``d log(1+u) = du / (1+u)``."""
    lam, a = c.lam, c.a
    n = a.size - 1
    recip = (_curvature_series(a, lam) + 1.0).reciprocal().coeffs
    J = np.zeros((n + 1, n + 1))
    for j in range(2, n + 1):
        k = j - 2
        J[k:, j] = recip[: n + 1 - k] / (_FACT[k] * lam * lam)
    return -(lam / TWO_PI) * _FACT[: n + 1, None] * J


def uv_tail_series(curv: TruncatedSeries1, lam0: float) -> TruncatedSeries1:
    """``(1/2pi) int_lam0^inf log(1 + c/L^2) dL`` for a curvature series ``c``.

    Uses ``sum_k (-1)^(k+1) c^k / (k (2k-1) lam0^(2k-1))``.
    """
    out = np.zeros(curv.order + 1)
    power = TruncatedSeries1.constant(1.0, curv.order)
    for k in range(1, 400):
        power = power * curv
        term = ((-1) ** (k + 1) / (k * (2 * k - 1) * lam0 ** (2 * k - 1))) * power.coeffs
        out += term
        if np.max(np.abs(term)) <= 1e-17 * (1.0 + np.max(np.abs(out))):
            break
    else:
        raise SpinodalError(lam0, detail=" (UV tail series did not converge)")
    return TruncatedSeries1(out / TWO_PI)


def ir_tail_series(curv: TruncatedSeries1, lam_ir: float) -> TruncatedSeries1:
    """``(1/2pi) int_0^lam_ir log(1 + c/L^2) dL`` as a series in ``phi``.

    Written as ``L log(1 + c/L^2) + 2 L sum_j (-1)^j (L^2/c)^j/(2j+1)``,
    which needs ``c_0 > lam_ir^2``.
    """
    c0 = curv.coeffs[0]
    if not c0 > lam_ir * lam_ir:
        raise ValueError("IR tail needs curvature above lam_ir^2 at the expansion point")
    lg = series_log1p(curv / (lam_ir * lam_ir))
    inv = curv.reciprocal() * (lam_ir * lam_ir)
    acc = TruncatedSeries1.constant(1.0, curv.order)
    power = TruncatedSeries1.constant(1.0, curv.order)
    for j in range(1, 400):
        power = power * inv
        term = power * ((-1) ** j / (2 * j + 1))
        acc = acc + term
        if np.max(np.abs(term.coeffs)) <= 1e-17:
            break
    total = lg * lam_ir + acc * (2.0 * lam_ir)
    return total / TWO_PI


@dataclass(frozen=True, eq=False)
class CouplingTrajectory:
    snapshots: tuple
    termination: Termination
    config: FlowConfig
    center: float = 0.0
    radius: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> CouplingVector:
        return self.snapshots[-1]

    @property
    def completed(self) -> bool:
        return self.termination.completed

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.snapshots])

    def couplings(self) -> np.ndarray:
        return np.array([s.a for s in self.snapshots])

    def effective_potential(self, allow_partial: bool = False) -> SeriesEffectivePotential:
        if not (self.completed or allow_partial):
            raise MassPoleError(self.termination.lam or float("nan"), detail=" (flow did not complete)")
        snap = self.final
        c = snap.monomial()
        if self.config.ir_completion:
            curv = TruncatedSeries1(c).derivative(2)
            if curv.coeffs[0] > snap.lam**2:
                c = c + ir_tail_series(curv, snap.lam).coeffs
        return SeriesEffectivePotential(c, self.center, self.radius, snap.lam, completed=self.completed)


def initial_couplings(V0: Polynomial1D, order: int, cfg: FlowConfig) -> CouplingVector:
    a = to_couplings(V0, order)
    if cfg.uv_completion:
        curv = TruncatedSeries1(V0.padded(order)).derivative(2)
        a = a + uv_tail_series(curv, cfg.lambda0).coeffs * _FACT[: order + 1]
    return CouplingVector(cfg.lambda0, a)


def evolve_couplings(
    c0,
    cfg: FlowConfig | None = None,
    order: int | None = None,
    *,
    expand_at_minimum: bool = False,
    branch: str | None = None,
    radius: float = 1.0,
) -> CouplingTrajectory:
    """Integrate the truncated coupling flow down to ``cfg.lambda_ir``.

    ``c0`` is either a :class:`CouplingVector` (used as is, at
    ``cfg.lambda0``) or a bare :class:`Polynomial1D`, in which case
    ``order`` sets the truncation and the UV tail is added if configured.
    With ``expand_at_minimum`` the bare potential is first re-expanded
    around its global minimum.
    """
    cfg = cfg or FlowConfig()
    center = 0.0
    if isinstance(c0, Polynomial1D):
        V0 = c0
        if expand_at_minimum:
            shift = shift_to_minimum(V0, branch=branch)
            center, V0 = shift.x_min, shift.shifted
        order = order if order is not None else max(V0.degree, 12)
        start = initial_couplings(V0, order, cfg)
    else:
        start = CouplingVector(cfg.lambda0, c0.a)
    lam0 = cfg.lambda0
    guard = cfg.pole_guard
    if not 1.0 + start.a[2] / lam0**2 > guard:
        raise MassPoleError(lam0, detail=" (initial couplings)")

    reached = [0.0]  # furthest s evaluated, for the breakdown diagnostic

    def rhs(s, a):
        reached[0] = max(reached[0], s)
        lam = lam0 * math.exp(-s)
        a = np.array(a)
        a[2] = max(a[2], (guard - 1.0) * lam * lam)
        with np.errstate(over="ignore", invalid="ignore"):  # a blow-up ends the integration instead
            return -_beta_raw(lam, a)

    def jac(s, a):
        lam = lam0 * math.exp(-s)
        a = np.array(a)
        a[2] = max(a[2], (guard - 1.0) * lam * lam)
        with np.errstate(over="ignore", invalid="ignore"):
            return -beta_couplings_jacobian(CouplingVector(lam, a))

    def pole(s, a):
        lam = lam0 * math.exp(-s)
        return 1.0 + a[2] / (lam * lam) - guard

    pole.terminal = True
    pole.direction = -1

    kwargs = {"jac": jac} if cfg.series_method in ("Radau", "BDF", "LSODA") else {}
    sol = solve_ivp(
        rhs,
        (0.0, cfg.s_final),
        start.a,
        method=cfg.series_method,
        t_eval=cfg.schedule_s(),
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        events=pole,
        **kwargs,
    )
    snaps = [CouplingVector(float(lam0 * math.exp(-t)), sol.y[:, k]) for k, t in enumerate(sol.t)]
    if sol.status == 1:
        s_stop = float(sol.t_events[0][0])
        lam_stop = lam0 * math.exp(-s_stop)
        if not snaps or snaps[-1].lam > lam_stop:
            snaps.append(CouplingVector(lam_stop, sol.y_events[0][0]))
        term = Termination("spinodal", lam_stop, center, "mass pole: Lambda^2 + a_2 reached the guard")
        log.info("coupling flow (N=%d) hit the mass pole at Lambda=%.4g", start.order, lam_stop)
    elif sol.status == -1:
        lam_stop = lam0 * math.exp(-reached[0])
        term = Termination("step_underflow", lam_stop, None, f"integration broke down: {sol.message}")
    else:
        term = Termination("completed", snaps[-1].lam)
    if not snaps:
        snaps = [start]
    return CouplingTrajectory(tuple(snaps), term, cfg, center, radius, {"order": start.order, "nfev": int(sol.nfev)})


def trajectory_potential(traj: CouplingTrajectory, k: int = -1) -> Polynomial1D:
    """Snapshot ``k`` as a monomial polynomial in the expansion variable."""
    return from_couplings(traj.snapshots[k].a)
