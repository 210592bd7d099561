"""Wegner-Houghton LPA flows for one- and two-variable quantum mechanics.

Submodules:

* :mod:`whflow.potentials` builds and transforms bare potentials.
* :mod:`whflow.grid_flow` integrates the flow as a PDE on a spatial grid.
* :mod:`whflow.coupling_flow`, :mod:`whflow.dimensionless` and
  :mod:`whflow.two_field` integrate truncated polynomial flows.
* :mod:`whflow.observables` reads physics off the effective potential.
* :mod:`whflow.oracle` diagonalizes the Schrödinger operator for reference.
* :mod:`whflow.references` holds closed forms and series estimates.
* :mod:`whflow.cli` runs configured studies and writes CSV plus manifests.
"""

from importlib.metadata import PackageNotFoundError, version

from .coupling_flow import CouplingVector, MassPoleError, beta_couplings, evolve_couplings
from .flowconfig import FlowConfig, SpinodalError, Termination
from .grid_flow import Grid1D, GridPotential, beta_grid, evolve_grid
from .observables import ObservableSet, extract_observables, observables_from_trajectory, two_field_gap
from .oracle import pole_coefficients, solve_schrodinger_1d, wavefunction_moment
from .potentials import (
    BivariatePolynomial,
    Polynomial1D,
    SusyPotentialW,
    make_standard_potential,
    make_two_particle_potential,
    rotate_to_normal_coordinates,
    shift_to_minimum,
    susy_partner_potentials,
)

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - running from a bare checkout
    __version__ = "0.0.0"

__all__ = [
    "BivariatePolynomial",
    "CouplingVector",
    "FlowConfig",
    "Grid1D",
    "GridPotential",
    "MassPoleError",
    "ObservableSet",
    "Polynomial1D",
    "SpinodalError",
    "SusyPotentialW",
    "Termination",
    "beta_couplings",
    "beta_grid",
    "evolve_couplings",
    "evolve_grid",
    "extract_observables",
    "make_standard_potential",
    "make_two_particle_potential",
    "observables_from_trajectory",
    "pole_coefficients",
    "rotate_to_normal_coordinates",
    "shift_to_minimum",
    "solve_schrodinger_1d",
    "susy_partner_potentials",
    "two_field_gap",
    "wavefunction_moment",
    "__version__",
]
