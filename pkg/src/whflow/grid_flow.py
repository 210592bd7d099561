"""Method-of-lines integration of the one-variable LPA flow on a grid.

The PDE ``Lambda dV/dLambda = -(Lambda/2pi) log(1 + V''/Lambda^2)`` is
integrated in ``s = ln(lambda0/Lambda)``.  ``V''`` comes from central
second differences with one-sided 4-point stencils at the two end nodes;
time stepping is delegated to :func:`scipy.integrate.solve_ivp` (Radau by
default, with the sparse analytic Jacobian).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp

from .flowconfig import TWO_PI, FlowConfig, SpinodalError, Termination, cutoff_shell_integral
from .potentials import Polynomial1D

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid1D:
    x_min: float = -8.0
    x_max: float = 8.0
    points: int = 1601

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be below x_max")
        if self.points < 5:
            raise ValueError("a grid needs at least 5 points")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.points)

    def refined(self) -> "Grid1D":
        return Grid1D(self.x_min, self.x_max, 2 * self.points - 1)


@dataclass(frozen=True, eq=False)
class GridPotential:
    grid: Grid1D
    values: np.ndarray
    lam: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.points,):
            raise ValueError(f"expected {self.grid.points} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid potential contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def second_difference_operator(grid: Grid1D) -> sparse.csr_matrix:
    n, h = grid.points, grid.h
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    L = sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    L[0, :4] = [2.0, -5.0, 4.0, -1.0]
    L[n - 1, n - 4 :] = [-1.0, 4.0, -5.0, 2.0]
    return (L / (h * h)).tocsr()


def second_difference(values: np.ndarray, h: float) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (h * h)
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h)
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / (h * h)
    return out


def beta_grid(V: GridPotential, spinodal_guard: float = 1e-10) -> np.ndarray:
    """``Lambda dV/dLambda`` at every node; raises :class:`SpinodalError`."""
    lam = V.lam
    arg = 1.0 + second_difference(V.values, V.grid.h) / lam**2
    bad = np.nonzero(arg <= spinodal_guard)[0]
    if bad.size:
        i = bad[np.argmin(arg[bad])]
        raise SpinodalError(lam, float(V.grid.x[i]))
    return -(lam / TWO_PI) * np.log(arg)


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Snapshots of ``V_Lambda`` ordered by decreasing cutoff."""

    snapshots: tuple
    termination: Termination
    config: FlowConfig
    initial: Polynomial1D | None = None
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> GridPotential:
        return self.snapshots[-1]

    @property
    def completed(self) -> bool:
        return self.termination.completed

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.snapshots])

    def effective_potential(self, allow_partial: bool = False):
        """IR effective potential built from the final snapshot.

        With ``config.ir_completion`` the shell ``0 < Lambda < Lambda_last``
        is added analytically using the final curvature (negative curvature
        is clipped to zero, which only matters away from the vacuum).
        """
        from .observables import GridEffectivePotential

        if not (self.completed or allow_partial):
            raise SpinodalError(self.termination.lam or float("nan"), self.termination.x, " (flow did not complete)")
        snap = self.final
        values = np.array(snap.values)
        if self.config.ir_completion:
            curv = np.maximum(second_difference(values, snap.grid.h), 0.0)
            values = values + cutoff_shell_integral(curv, 0.0, snap.lam) / TWO_PI
        return GridEffectivePotential(snap.grid, values, snap.lam, completed=self.completed)


def _mirror_map(grid: Grid1D) -> sparse.csr_matrix | None:
    """Map from the ``x >= 0`` half of a mirror-symmetric grid to the full grid.

    ``None`` unless the grid is symmetric about a central node.
    """
    n = grid.points
    if grid.x_min != -grid.x_max or n % 2 == 0:
        return None
    m = (n - 1) // 2
    cols = np.abs(np.arange(n) - m)
    return sparse.csr_matrix((np.ones(n), (np.arange(n), cols)), shape=(n, m + 1))


def evolve_grid(V0: Polynomial1D, grid: Grid1D | None = None, cfg: FlowConfig | None = None) -> FlowTrajectory:
    """Integrate the grid flow from ``cfg.lambda0`` to ``cfg.lambda_ir``.

    A spinodal or step-size failure does not raise: the partial trajectory
    is returned with the reason in ``termination``.

    An even ``V0`` on a mirror-symmetric grid is integrated on the
    ``x >= 0`` half with the mirror condition at the origin, so every
    snapshot is exactly even.
    """
    grid = grid or Grid1D()
    cfg = cfg or FlowConfig()
    V0.check_flow_ready()
    x = grid.x
    values = V0(x)
    curv0 = V0.derivative(2)(x)
    lam0 = cfg.lambda0
    if np.any(1.0 + curv0 / lam0**2 <= cfg.spinodal_guard):
        raise SpinodalError(lam0, float(x[np.argmin(curv0)]), " (initial potential)")
    if cfg.uv_completion:
        values = values + cutoff_shell_integral(curv0, lam0, math.inf) / TWO_PI

    L = second_difference_operator(grid)
    mirror = _mirror_map(grid) if not np.any(V0.coeffs[1::2]) else None
    nodes = np.arange(grid.points)
    if mirror is not None:
        nodes = nodes[(grid.points - 1) // 2 :]
        L = (L[nodes] @ mirror).tocsr()
        values = values[nodes]
    x_flow = x[nodes]
    guard = cfg.spinodal_guard

    def full(v):
        return mirror @ v if mirror is not None else v

    def rhs(s, v):
        lam = lam0 * math.exp(-s)
        arg = 1.0 + (L @ v) / lam**2
        # implicit stages may probe past the pole; the event below stops the flow
        return (lam / TWO_PI) * np.log(np.maximum(arg, guard))

    def jac(s, v):
        lam = lam0 * math.exp(-s)
        denom = np.maximum(lam**2 + L @ v, guard * lam**2)
        return (sparse.diags(lam / (TWO_PI * denom)) @ L).tocsc()

    def spinodal(s, v):
        lam = lam0 * math.exp(-s)
        return float(np.min(1.0 + (L @ v) / lam**2)) - guard

    spinodal.terminal = True
    spinodal.direction = -1

    s_eval = cfg.schedule_s()
    kwargs = {"jac": jac} if cfg.method in ("Radau", "BDF") else {}
    sol = solve_ivp(
        rhs,
        (0.0, cfg.s_final),
        values,
        method=cfg.method,
        t_eval=s_eval,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        events=spinodal,
        **kwargs,
    )
    snaps = [GridPotential(grid, full(sol.y[:, k]), float(lam0 * math.exp(-t))) for k, t in enumerate(sol.t)]
    if sol.status == 1:
        s_stop = float(sol.t_events[0][0])
        v_stop = sol.y_events[0][0]
        lam_stop = lam0 * math.exp(-s_stop)
        arg = 1.0 + (L @ v_stop) / lam_stop**2
        x_stop = float(x_flow[int(np.argmin(arg))])
        if not snaps or snaps[-1].lam > lam_stop:
            snaps.append(GridPotential(grid, full(v_stop), lam_stop))
        term = Termination("spinodal", lam_stop, x_stop, "1 + V''/Lambda^2 reached the spinodal guard")
        log.info("grid flow stopped at spinodal: Lambda=%.4g x=%.4g", lam_stop, x_stop)
    elif sol.status == -1:
        lam_stop = lam0 * math.exp(-float(sol.t[-1])) if sol.t.size else lam0
        term = Termination("step_underflow", lam_stop, None, sol.message)
    else:
        term = Termination("completed", snaps[-1].lam)
    if not snaps:
        snaps = [GridPotential(grid, full(values), lam0)]
    meta = {"nfev": int(sol.nfev), "njev": int(sol.njev), "even_sector": mirror is not None}
    return FlowTrajectory(tuple(snaps), term, cfg, V0, meta)
