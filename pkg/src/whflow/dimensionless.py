"""Dimensionless coupling flow, fixed points and flow-diagram classification.

With ``ahat_n = a_n Lambda^{-(n+2)/2}`` and ``t = ln(lambda0/Lambda)`` the
truncated flow becomes autonomous::

    d ahat_n / dt = (n+2)/2 ahat_n + (1/2pi) n! [phi^n] log(1 + uhat),
    uhat_k = ahat_{k+2} / k!

so fixed points and their linearizations can be studied without reference
to a particular cutoff.  Flows are always integrated towards the infrared
(increasing ``t``).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .coupling_flow import CouplingVector, MassPoleError
from .flowconfig import TWO_PI
from .series import TruncatedSeries1, log1p_coeffs

_FACT = np.array([math.factorial(n) for n in range(64)], dtype=float)


@dataclass(frozen=True, eq=False)
class DimlessCouplingVector:
    t: float
    ahat: np.ndarray

    def __post_init__(self):
        a = np.array(self.ahat, dtype=float)
        if a.ndim != 1 or a.size < 3:
            raise ValueError("need ahat_0..ahat_N with N >= 2")
        a.setflags(write=False)
        object.__setattr__(self, "ahat", a)

    @property
    def order(self) -> int:
        return self.ahat.size - 1


def _scaling(order: int) -> np.ndarray:
    return (np.arange(order + 1) + 2.0) / 2.0


_SCALING = _scaling(63)


def to_dimensionless(c: CouplingVector, lam0: float) -> DimlessCouplingVector:
    return DimlessCouplingVector(math.log(lam0 / c.lam), c.a * c.lam ** (-_scaling(c.order)))


def to_dimensionful(d: DimlessCouplingVector, lam0: float) -> CouplingVector:
    lam = lam0 * math.exp(-d.t)
    return CouplingVector(lam, d.ahat * lam ** _scaling(d.order))


def _uhat(ahat: np.ndarray) -> np.ndarray:
    n = ahat.size - 1
    u = np.zeros(n + 1)
    u[: n - 1] = ahat[2:] / _FACT[: n - 1]
    return u


def beta_dimensionless(d) -> np.ndarray:
    """``d ahat / dt``; accepts a :class:`DimlessCouplingVector` or a plain array.

    The ``t`` tag never enters: the output is bit-identical for any tag.
    """
    ahat = d.ahat if isinstance(d, DimlessCouplingVector) else np.asarray(d, dtype=float)
    if not 1.0 + ahat[2] > 0:
        raise MassPoleError(float("nan"), detail=f" (1 + ahat_2 = {1.0 + ahat[2]:.3g})")
    logs = log1p_coeffs(_uhat(ahat))
    return _SCALING[: ahat.size] * ahat + logs * _FACT[: ahat.size] / TWO_PI


def beta_dimensionless_jacobian(d) -> np.ndarray:
    ahat = d.ahat if isinstance(d, DimlessCouplingVector) else np.asarray(d, dtype=float)
    n = ahat.size - 1
    recip = (TruncatedSeries1(_uhat(ahat)) + 1.0).reciprocal().coeffs
    J = np.zeros((n + 1, n + 1))
    for j in range(2, n + 1):
        k = j - 2
        J[k:, j] = recip[: n + 1 - k] / _FACT[k]
    J = _FACT[: n + 1, None] * J / TWO_PI
    J[np.diag_indices(n + 1)] += _scaling(n)
    return J


# ---------------------------------------------------------------- fixed points


@dataclass(frozen=True, eq=False)
class FixedPoint:
    ahat: np.ndarray
    eigenvalues: np.ndarray
    classification: str

    @property
    def relevant_directions(self) -> int:
        return int(np.sum(self.eigenvalues.real > 0))

    def to_dict(self) -> dict:
        return {
            "ahat": [float(v) for v in self.ahat],
            "eigenvalues_real": [float(v) for v in self.eigenvalues.real],
            "eigenvalues_imag": [float(v) for v in self.eigenvalues.imag],
            "classification": self.classification,
            "relevant_directions": self.relevant_directions,
        }


def _sector_indices(order: int, sector: str) -> np.ndarray:
    if sector == "even":
        return np.arange(0, order + 1, 2)
    if sector == "all":
        return np.arange(order + 1)
    raise ValueError(f"unknown sector {sector!r}")


def _damped_newton(x0: np.ndarray, idx: np.ndarray, order: int, max_iter: int, tol: float):
    full = np.zeros(order + 1)

    def residual(y):
        full[:] = 0.0
        full[idx] = y
        return beta_dimensionless(full)[idx]

    y = x0.copy()
    try:
        f = residual(y)
    except MassPoleError:
        return None
    for _ in range(max_iter):
        norm = np.linalg.norm(f)
        if norm < tol:
            return y
        full[:] = 0.0
        full[idx] = y
        J = beta_dimensionless_jacobian(full)[np.ix_(idx, idx)]
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            return None
        alpha = 1.0
        while alpha > 1e-6:
            trial = y - alpha * step
            if 1.0 + trial[list(idx).index(2)] > 0:
                try:
                    ft = residual(trial)
                except MassPoleError:
                    ft = None
                if ft is not None and np.linalg.norm(ft) < norm:
                    y, f = trial, ft
                    break
            alpha *= 0.5
        else:
            return None
    return y if np.linalg.norm(f) < tol else None


def _seed_lattice(box: dict, points: int) -> list:
    axes = [np.linspace(lo, hi, points) for lo, hi in box.values()]
    return [dict(zip(box, combo)) for combo in itertools.product(*axes)]


def find_fixed_points(
    order: int,
    search_box: dict | None = None,
    *,
    sector: str = "even",
    seeds_per_axis: int = 9,
    max_iter: int = 60,
    tol: float = 1e-11,
    dedup_tol: float = 1e-8,
) -> list:
    """Damped-Newton search for zeros of :func:`beta_dimensionless`.

    ``search_box`` maps coupling index to an interval, e.g.
    ``{2: (-0.9, 0.5), 4: (0.1, 5.0)}``; couplings not listed are seeded at
    zero.  Returns deduplicated :class:`FixedPoint` records sorted by
    ``ahat_2``; the Gaussian point is always included.
    """
    search_box = search_box or {2: (-0.9, 0.5), 4: (0.1, 5.0)}
    if any(lo <= -1.0 for k, (lo, _) in search_box.items() if k == 2):
        raise ValueError("search box must stay above the pole ahat_2 = -1")
    idx = _sector_indices(order, sector)
    found = [np.zeros(order + 1)]
    for seed in _seed_lattice(search_box, seeds_per_axis):
        x0 = np.zeros(idx.size)
        for k, v in seed.items():
            if k in idx:
                x0[list(idx).index(k)] = v
        y = _damped_newton(x0, idx, order, max_iter, tol)
        if y is None:
            continue
        full = np.zeros(order + 1)
        full[idx] = y
        if all(np.linalg.norm(full - f) > dedup_tol for f in found):
            found.append(full)
    out = []
    for fp in sorted(found, key=lambda v: (v[2], v[4] if v.size > 4 else 0.0)):
        J = beta_dimensionless_jacobian(fp)[np.ix_(idx, idx)]
        eig = np.linalg.eigvals(J)
        eig = eig[np.lexsort((eig.imag, -eig.real))]
        kind = "gaussian" if np.max(np.abs(fp)) < dedup_tol else "nontrivial"
        out.append(FixedPoint(fp, eig, kind))
    return out


# ------------------------------------------------------- flow-diagram classes

SYMMETRIC = "symmetric"
SPURIOUS_BROKEN = "spurious_broken"
UNDECIDED = "undecided"


@dataclass(frozen=True, eq=False)
class DimlessTrajectory:
    t: np.ndarray
    ahat: np.ndarray  # shape (len(t), N+1)
    outcome: str

    def rows(self):
        for k in range(self.t.size):
            yield (float(self.t[k]), *map(float, self.ahat[k]))


def integrate_dimensionless(
    ahat0,
    *,
    t_max: float = 20.0,
    samples: int = 201,
    massive_threshold: float = 50.0,
    pole_guard: float = 1e-3,
    runaway_bound: float = 1e12,
    method: str = "DOP853",
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> DimlessTrajectory:
    """Flow ``ahat`` towards the infrared and classify the outcome.

    ``symmetric``: ``ahat_2`` grows past ``massive_threshold`` (the
    dimensionful mass freezes while ``Lambda -> 0``).
    ``spurious_broken``: ``1 + ahat_2`` drops to ``pole_guard``; in quantum
    mechanics there is no broken phase, so any such flow is a truncation
    artifact.  Anything else by ``t_max`` is ``undecided``.
    """
    y0 = np.asarray(ahat0, dtype=float)
    if not 1.0 + y0[2] > pole_guard:
        raise MassPoleError(float("nan"), detail=" (seed at or beyond ahat_2 = -1)")

    def rhs(t, y):
        z = np.array(y)
        z[2] = max(z[2], pole_guard - 1.0)
        return beta_dimensionless(z)

    def jac(t, y):
        z = np.array(y)
        z[2] = max(z[2], pole_guard - 1.0)
        return beta_dimensionless_jacobian(z)

    def massive(t, y):
        return y[2] - massive_threshold

    def pole(t, y):
        return 1.0 + y[2] - pole_guard

    def runaway(t, y):
        return runaway_bound - np.max(np.abs(y))

    massive.terminal = pole.terminal = runaway.terminal = True
    massive.direction = 1
    pole.direction = runaway.direction = -1
    implicit = {"jac": jac} if method in ("Radau", "BDF", "LSODA") else {}
    sol = solve_ivp(
        rhs,
        (0.0, t_max),
        y0,
        method=method,
        **implicit,
        t_eval=np.linspace(0.0, t_max, samples),
        events=(massive, pole, runaway),
        rtol=rtol,
        atol=atol,
    )
    t, Y = sol.t, sol.y.T
    outcome = UNDECIDED
    for name, te, ye in zip((SYMMETRIC, SPURIOUS_BROKEN), sol.t_events, sol.y_events):
        if te.size:
            outcome = name
            t = np.append(t, te[0])
            Y = np.vstack([Y, ye[0]])
    return DimlessTrajectory(t, Y, outcome)


def seed_grid(order: int, a2_range=(-0.9, 0.5), a4_range=(0.25, 5.0), points: int = 20) -> list:
    """Fixed ``points x points`` lattice of seeds in (ahat_2, ahat_4), other couplings zero."""
    seeds = []
    for a2 in np.linspace(*a2_range, points):
        for a4 in np.linspace(*a4_range, points):
            s = np.zeros(order + 1)
            s[2], s[4] = a2, a4
            seeds.append(s)
    return seeds


def _classify(seed) -> str:
    try:
        return integrate_dimensionless(seed, samples=2).outcome
    except MassPoleError:
        return SPURIOUS_BROKEN


def classify_seeds(seeds, jobs: int = 1) -> list:
    """Outcome for each seed, in seed order."""
    if jobs <= 1:
        return [_classify(s) for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_classify, seeds, chunksize=8))


def basin_fraction(order: int, *, points: int = 20, jobs: int = 1, **ranges) -> float:
    """Fraction of the fixed seed lattice that ends in the spurious broken phase."""
    seeds = seed_grid(order, points=points, **ranges)
    outcomes = classify_seeds(seeds, jobs)
    return sum(o == SPURIOUS_BROKEN for o in outcomes) / len(outcomes)
