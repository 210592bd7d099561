"""scikit-learn style front ends.

Each estimator maps rows of bare-potential coefficients ``c_0..c_N``
(``V(x) = sum c_n x^n``) to the observables ``OBSERVABLE_NAMES``.  ``fit``
only validates the hyper-parameters and the input width; ``predict`` runs one
flow (or one diagonalization) per row.  A row whose solve fails yields NaNs
and its reason is kept in ``failures_``, so a batch never aborts halfway.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .coupling_flow import evolve_couplings
from .flowconfig import FlowConfig
from .grid_flow import Grid1D, evolve_grid
from .observables import observables_from_trajectory
from .oracle import solve_schrodinger_1d, wavefunction_moment
from .potentials import Polynomial1D

OBSERVABLE_NAMES = ("x_vev", "e0", "m_eff", "lambda_eff", "m1", "m2", "m4")


class _PotentialRowEstimator(BaseEstimator):
    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] < 3:
            raise ValueError("need at least the coefficients c_0, c_1, c_2")
        self._check_params()
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} coefficients per row, got {X.shape[1]}")
        out = np.full((X.shape[0], len(OBSERVABLE_NAMES)), np.nan)
        self.failures_ = {}
        for i, row in enumerate(X):
            try:
                out[i] = self._solve(Polynomial1D(row))
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                self.failures_[i] = f"{type(exc).__name__}: {exc}"
        return out

    def get_feature_names_out(self, input_features=None) -> np.ndarray:
        return np.array(OBSERVABLE_NAMES, dtype=object)

    def _check_params(self) -> None:
        pass

    def _flow_config(self) -> FlowConfig:
        return FlowConfig(lambda0=self.lambda0, lambda_ir=self.lambda_ir, rel_tol=self.rel_tol, abs_tol=self.abs_tol)


def _as_row(obs) -> list:
    return [getattr(obs, name) for name in OBSERVABLE_NAMES]


class GridFlowEstimator(_PotentialRowEstimator):
    """Observables from the grid flow of each bare potential."""

    def __init__(self, lambda0=100.0, lambda_ir=1e-3, x_min=-8.0, x_max=8.0, points=1601, rel_tol=1e-9, abs_tol=1e-11):
        self.lambda0 = lambda0
        self.lambda_ir = lambda_ir
        self.x_min = x_min
        self.x_max = x_max
        self.points = points
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol

    def _check_params(self) -> None:
        self._flow_config()
        Grid1D(self.x_min, self.x_max, self.points)

    def _solve(self, V: Polynomial1D) -> list:
        traj = evolve_grid(V, Grid1D(self.x_min, self.x_max, self.points), self._flow_config())
        return _as_row(observables_from_trajectory(traj))


class CouplingFlowEstimator(_PotentialRowEstimator):
    """Observables from the order-``order`` truncated coupling flow."""

    def __init__(self, order=12, expand_at_minimum=False, lambda0=100.0, lambda_ir=1e-3, rel_tol=1e-9, abs_tol=1e-11, radius=1.0):
        self.order = order
        self.expand_at_minimum = expand_at_minimum
        self.lambda0 = lambda0
        self.lambda_ir = lambda_ir
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.radius = radius

    def _check_params(self) -> None:
        self._flow_config()
        if int(self.order) < 2:
            raise ValueError("order must be at least 2")

    def _solve(self, V: Polynomial1D) -> list:
        traj = evolve_couplings(
            V, self._flow_config(), int(self.order), expand_at_minimum=self.expand_at_minimum, radius=self.radius
        )
        return _as_row(observables_from_trajectory(traj))


class SchrodingerEstimator(_PotentialRowEstimator):
    """Exact counterparts of the flow observables from diagonalization.

    ``m_eff`` is the gap ``E_1 - E_0``, ``e0`` the ground-state energy and
    the moments are ground-state expectation values.  ``lambda_eff`` is
    read back from the connected four-point moment through the same
    single-pole relation the flows use.
    """

    def __init__(self, x_min=-10.0, x_max=10.0, points=2001):
        self.x_min = x_min
        self.x_max = x_max
        self.points = points

    def _check_params(self) -> None:
        Grid1D(self.x_min, self.x_max, self.points)

    def _solve(self, V: Polynomial1D) -> list:
        sol = solve_schrodinger_1d(V, Grid1D(self.x_min, self.x_max, self.points), k=2)
        m1 = wavefunction_moment(sol, 1)
        m2 = wavefunction_moment(sol, 2) - m1 * m1
        m4 = sol.expectation(lambda x: (x - m1) ** 4)
        gap = sol.gap
        lam_eff = -32.0 * gap**5 * (m4 - 3.0 * m2 * m2)
        return [m1, float(sol.energies[0]), gap, lam_eff, m1, m2, m4]
