"""Study definitions: config schema, work points and per-point solvers.

A study expands its config into independent points ``(key, solver)``.
:func:`run_point` evaluates one point and never raises: failures come back
as a record with ``status = "failed"`` and the reason, which is what lets a
sweep survive a single bad point.  Every record is plain data so it can
cross a process boundary.
"""

from __future__ import annotations

import math
import time
from dataclasses import fields

import numpy as np

from . import dimensionless as dl
from .coupling_flow import evolve_couplings
from .flowconfig import FlowConfig
from .grid_flow import Grid1D, evolve_grid
from .observables import observables_from_trajectory, two_field_gap
from .oracle import pole_coefficients, solve_schrodinger_1d, two_particle_first_order_gap
from .potentials import (
    INTERACTIONS,
    Polynomial1D,
    SusyPotentialW,
    make_standard_potential,
    make_two_particle_potential,
    rotate_to_normal_coordinates,
    susy_partner_potentials,
)
from .references import (
    harmonic_a0_exact,
    instanton_gap,
    perturbative_energy,
    susy_perturbative_energy,
    valley_susy_energy,
)
from .two_field import evolve_two_field

OBSERVABLES = ("x_vev", "e0", "m_eff", "lambda_eff", "m1", "m2", "m4")

# ------------------------------------------------------------------ schema

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_RANGE = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

_FLOW_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lambda0": _POS,
        "lambda_ir": _POS,
        "rel_tol": _POS,
        "abs_tol": _POS,
        "snapshot_schedule": {"type": "array", "items": _POS},
        "snapshots_per_decade": {"type": "integer", "minimum": 1},
        "spinodal_guard": _POS,
        "pole_guard": _POS,
        "method": {"enum": ["Radau", "BDF", "LSODA", "RK45", "DOP853"]},
        "series_method": {"enum": ["Radau", "BDF", "LSODA", "RK45", "DOP853"]},
        "uv_completion": {"type": "boolean"},
        "ir_completion": {"type": "boolean"},
    },
}

_GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["x_min", "x_max", "points"],
    "properties": {"x_min": _NUM, "x_max": _NUM, "points": {"type": "integer", "minimum": 5}},
}

_POTENTIAL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {
            "enum": ["single_well", "double_well", "asym_double_well", "harmonic", "susy_plus", "susy_minus", "custom"]
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lambda0": _NUM, "h0": _NUM, "m": _NUM, "g": _NUM},
        },
        "coeffs": {"type": "array", "items": _NUM, "minItems": 3},
    },
}

ONE_FIELD_METHODS = ("grid", "couplings", "oracle", "perturbation2", "instanton", "valley_susy", "harmonic_exact")
TWO_FIELD_METHODS = ("two_field", "perturbation1")

_SOLVER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["method"],
    "properties": {
        "method": {"enum": list(ONE_FIELD_METHODS + TWO_FIELD_METHODS)},
        "label": {"type": "string", "minLength": 1},
        "order": {"type": "integer", "minimum": 2, "maximum": 40},
        "expand_at_minimum": {"type": "boolean"},
        "branch": {"enum": ["left", "right"]},
        "radius": _POS,
        "states": {"type": "integer", "minimum": 2},
    },
}

_SWEEP_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["parameter", "values"],
    "properties": {
        "parameter": {"enum": ["lambda0", "h0", "m", "g"]},
        "values": {"type": "array", "items": _NUM, "minItems": 1},
    },
}

_COMMON = {
    "study": {"enum": ["flow", "sweep", "flow_diagram", "fixed_points", "susy", "two_particle", "poles"]},
    "description": {"type": "string"},
    "flow": _FLOW_SCHEMA,
    "grid": _GRID_SCHEMA,
    "oracle_grid": _GRID_SCHEMA,
    "expected_failures": {
        "type": "array",
        "items": {
            "type": "object",
            "additionalProperties": False,
            "required": ["solver"],
            "properties": {"solver": {"type": "string"}, "key": {"type": "array"}},
        },
    },
}

_STUDY_PROPERTIES = {
    "flow": {
        "potential": _POTENTIAL_SCHEMA,
        "solvers": {"type": "array", "items": _SOLVER_SCHEMA, "minItems": 1},
    },
    "sweep": {
        "potential": _POTENTIAL_SCHEMA,
        "sweep": _SWEEP_SCHEMA,
        "solvers": {"type": "array", "items": _SOLVER_SCHEMA, "minItems": 1},
    },
    "susy": {
        "potential": _POTENTIAL_SCHEMA,
        "sweep": _SWEEP_SCHEMA,
        "solvers": {"type": "array", "items": _SOLVER_SCHEMA, "minItems": 1},
    },
    "poles": {
        "potential": _POTENTIAL_SCHEMA,
        "sweep": _SWEEP_SCHEMA,
        "states": {"type": "integer", "minimum": 2},
    },
    "two_particle": {
        "lambda0": _POS,
        "cases": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["interaction", "strength"],
                "properties": {"interaction": {"enum": list(INTERACTIONS)}, "strength": _NUM},
            },
        },
        "solvers": {"type": "array", "items": _SOLVER_SCHEMA, "minItems": 1},
    },
    "flow_diagram": {
        "orders": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1},
        "seed_grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"a2_range": _RANGE, "a4_range": _RANGE, "points": {"type": "integer", "minimum": 2}},
        },
        "t_max": _POS,
        "samples": {"type": "integer", "minimum": 2},
        "massive_threshold": _POS,
        "pole_guard": _POS,
        "runaway_bound": _POS,
        "write_trajectories": {"type": "boolean"},
    },
    "fixed_points": {
        "orders": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1},
        "search_box": {
            "type": "object",
            "additionalProperties": False,
            "patternProperties": {"^[0-9]+$": _RANGE},
        },
        "sector": {"enum": ["even", "all"]},
        "seeds_per_axis": {"type": "integer", "minimum": 1},
    },
}

_REQUIRED = {
    "flow": ["potential", "solvers"],
    "sweep": ["potential", "sweep", "solvers"],
    "susy": ["potential", "sweep", "solvers"],
    "poles": ["potential", "sweep"],
    "two_particle": ["lambda0", "cases", "solvers"],
    "flow_diagram": ["orders"],
    "fixed_points": ["orders"],
}


def config_schema() -> dict:
    """JSON schema for experiment configs; unknown keys are rejected per study."""
    all_props = dict(_COMMON)
    for props in _STUDY_PROPERTIES.values():
        all_props.update(props)
    branches = []
    for study, props in _STUDY_PROPERTIES.items():
        allowed = sorted(set(_COMMON) | set(props))
        branches.append(
            {
                "if": {"properties": {"study": {"const": study}}},
                "then": {"required": _REQUIRED[study], "propertyNames": {"enum": allowed}},
            }
        )
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["study"],
        "additionalProperties": False,
        "properties": all_props,
        "allOf": branches,
    }


# ------------------------------------------------------------- helpers


def flow_config(cfg: dict) -> FlowConfig:
    known = {f.name for f in fields(FlowConfig)}
    return FlowConfig(**{k: v for k, v in cfg.get("flow", {}).items() if k in known})


def _grid(spec: dict | None, default: Grid1D | None = None) -> Grid1D | None:
    if spec is None:
        return default
    return Grid1D(spec["x_min"], spec["x_max"], spec["points"])


def build_potential(spec: dict, overrides: dict | None = None) -> Polynomial1D:
    params = {**spec.get("params", {}), **(overrides or {})}
    kind = spec["kind"]
    if kind == "custom":
        if "coeffs" not in spec:
            raise ValueError("custom potentials need 'coeffs'")
        return Polynomial1D(spec["coeffs"], kind="custom", params=params)
    if kind in ("susy_plus", "susy_minus"):
        plus, minus = susy_partner_potentials(SusyPotentialW(float(params.get("g", 0.0))))
        return plus if kind == "susy_plus" else minus
    if kind == "harmonic":
        return make_standard_potential("harmonic", 0.0, m=float(params.get("m", 1.0)))
    return make_standard_potential(kind, float(params.get("lambda0", 0.0)), float(params.get("h0", 0.0)))


def solver_label(solver: dict) -> str:
    if "label" in solver:
        return solver["label"]
    method = solver["method"]
    if method in ("couplings", "two_field"):
        label = f"{method}{solver.get('order', 12)}"
        return label + ("_min" if solver.get("expand_at_minimum") else "")
    return method


def study_keys(cfg: dict) -> tuple:
    """Key column names of the results table."""
    study = cfg["study"]
    if study in ("sweep", "susy", "poles"):
        return (cfg["sweep"]["parameter"],)
    if study == "two_particle":
        return ("interaction", "strength")
    if study == "flow_diagram":
        return ("order", "seed")
    if study == "fixed_points":
        return ("order",)
    return ()


def study_quantities(study: str) -> tuple:
    if study == "two_particle":
        return ("gap",)
    if study == "poles":
        return ("e0", "gap", "d1", "sum_rule_residual")
    if study == "flow_diagram":
        return ("ahat2", "ahat4", "t_end")
    if study == "fixed_points":
        return ("count", "nontrivial")
    return OBSERVABLES


def expand_points(cfg: dict) -> list:
    """All ``(key, solver)`` work items of a study, in deterministic order."""
    study = cfg["study"]
    if study == "flow":
        return [((), s) for s in cfg["solvers"]]
    if study in ("sweep", "susy"):
        return [((v,), s) for v in cfg["sweep"]["values"] for s in cfg["solvers"]]
    if study == "poles":
        solver = {"method": "oracle", "states": cfg.get("states", 40)}
        return [((v,), solver) for v in cfg["sweep"]["values"]]
    if study == "two_particle":
        return [((c["interaction"], c["strength"]), s) for c in cfg["cases"] for s in cfg["solvers"]]
    if study == "flow_diagram":
        sg = cfg.get("seed_grid", {})
        pts = []
        for order in cfg["orders"]:
            seeds = dl.seed_grid(
                order,
                tuple(sg.get("a2_range", (-0.9, 0.5))),
                tuple(sg.get("a4_range", (0.25, 5.0))),
                sg.get("points", 20),
            )
            pts += [((order, i), {"method": "flow_diagram", "seed": [float(v) for v in s]}) for i, s in enumerate(seeds)]
        return pts
    if study == "fixed_points":
        return [((order,), {"method": "fixed_points"}) for order in cfg["orders"]]
    raise ValueError(f"unknown study {study!r}")


# --------------------------------------------------------- point solvers


def _record(status="completed", values=None, termination=None, message="", tables=None) -> dict:
    return {
        "status": status,
        "values": values or {},
        "termination": termination,
        "message": message,
        "tables": tables or {},
    }


def _observable_values(obs) -> dict:
    return {name: float(getattr(obs, name)) for name in OBSERVABLES}


def _trajectory_status(traj) -> str:
    return "completed" if traj.completed else "partial"


def _flow_record(traj, term: dict, tables: dict) -> dict:
    """Observables of a finished flow, or a failed record that keeps its termination."""
    try:
        obs = observables_from_trajectory(traj)
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return _record("failed", termination=term, message=f"{type(exc).__name__}: {exc}", tables=tables)
    return _record(_trajectory_status(traj), _observable_values(obs), term, tables=tables)


def _one_field(cfg: dict, key: tuple, solver: dict) -> dict:
    study = cfg["study"]
    overrides = {cfg["sweep"]["parameter"]: key[0]} if study in ("sweep", "susy", "poles") else {}
    V = build_potential(cfg["potential"], overrides)
    params = {**cfg["potential"].get("params", {}), **overrides}
    method = solver["method"]
    label = solver_label(solver)
    fc = flow_config(cfg)
    tables = {}
    if method == "grid":
        traj = evolve_grid(V, _grid(cfg.get("grid"), Grid1D()), fc)
        term = traj.termination.to_dict()
        if study == "flow":
            rows = [(s.lam, float(x), float(v)) for s in traj.snapshots for x, v in zip(s.grid.x, s.values)]
            tables[f"trajectory_{label}.csv"] = {"header": ["lambda", "x", "V"], "rows": rows}
        return _flow_record(traj, term, tables)
    if method == "couplings":
        order = solver.get("order", 12)
        traj = evolve_couplings(
            V,
            fc,
            order,
            expand_at_minimum=solver.get("expand_at_minimum", False),
            branch=solver.get("branch"),
            radius=solver.get("radius", 1.0),
        )
        term = traj.termination.to_dict()
        if study == "flow":
            rows = [(s.lam, *map(float, s.a)) for s in traj.snapshots]
            header = ["lambda"] + [f"a_{n}" for n in range(order + 1)]
            tables[f"trajectory_{label}.csv"] = {"header": header, "rows": rows}
        return _flow_record(traj, term, tables)
    if method == "oracle":
        states = solver.get("states", 2)
        sol = solve_schrodinger_1d(V, _grid(cfg.get("oracle_grid")), k=states)
        m1 = sol.expectation(lambda x: x)
        m2 = sol.expectation(lambda x: (x - m1) ** 2)
        m4 = sol.expectation(lambda x: (x - m1) ** 4)
        gap = sol.gap
        values = {
            "x_vev": m1,
            "e0": float(sol.energies[0]),
            "m_eff": gap,
            "lambda_eff": -32.0 * gap**5 * (m4 - 3.0 * m2 * m2),
            "m1": m1,
            "m2": m2,
            "m4": m4,
        }
        if study == "poles":
            dec = pole_coefficients(sol)
            partial = dec.partial_sums()
            rows = [
                (key[0], n, float(sol.energies[n]), float(dec.c[n]), float(dec.d[n]), float(partial[n]))
                for n in range(sol.k)
            ]
            header = [cfg["sweep"]["parameter"], "n", "E_n", "C_n", "D_n", "partial_sum"]
            tables["poles.csv"] = {"header": header, "rows": rows}
            values = {"e0": values["e0"], "gap": gap, "d1": dec.d1, "sum_rule_residual": dec.residual}
        if study == "flow":
            tables["spectrum.csv"] = {"header": ["n", "E_n"], "rows": [(n, float(e)) for n, e in enumerate(sol.energies)]}
        return _record(values=values, tables=tables)
    nan = float("nan")
    values = dict.fromkeys(OBSERVABLES, nan)
    kind = cfg["potential"]["kind"]
    if method == "perturbation2":
        if kind == "single_well":
            lam = float(params["lambda0"])
            e0, e1 = perturbative_energy(0, lam), perturbative_energy(1, lam)
        elif kind == "susy_plus":
            g = float(params["g"])
            e0, e1 = susy_perturbative_energy(0, g), susy_perturbative_energy(1, g)
        else:
            raise ValueError(f"no perturbative series for potential kind {kind!r}")
        values.update(e0=e0, m_eff=e1 - e0)
    elif method == "instanton":
        if kind != "double_well":
            raise ValueError("instanton gap applies to the symmetric double well only")
        values.update(m_eff=instanton_gap(float(params["lambda0"])))
    elif method == "valley_susy":
        if kind != "susy_plus":
            raise ValueError("valley estimate applies to the SUSY V+ only")
        values.update(e0=valley_susy_energy(float(params["g"])))
    elif method == "harmonic_exact":
        if kind != "harmonic":
            raise ValueError("closed form applies to the harmonic potential only")
        m = float(params.get("m", 1.0))
        values.update(x_vev=0.0, e0=harmonic_a0_exact(m, 0.0, math.inf), m_eff=m, lambda_eff=0.0, m1=0.0)
        values.update(m2=1.0 / (2.0 * m), m4=3.0 / (4.0 * m * m))
    else:
        raise ValueError(f"solver {method!r} does not apply to study {study!r}")
    return _record(values=values)


def _two_particle(cfg: dict, key: tuple, solver: dict) -> dict:
    interaction, strength = key
    lam0 = float(cfg["lambda0"])
    method = solver["method"]
    if method == "perturbation1":
        return _record(values={"gap": two_particle_first_order_gap(lam0, interaction, strength, _grid(cfg.get("oracle_grid")))})
    if method != "two_field":
        raise ValueError(f"solver {method!r} does not apply to the two-particle study")
    P = rotate_to_normal_coordinates(make_two_particle_potential(lam0, interaction, strength))
    traj = evolve_two_field(P, flow_config(cfg), solver.get("order", 12), solver.get("radius", 1.0))
    term = traj.termination.to_dict()
    if not traj.completed:
        return _record("failed", termination=term, message=f"two-field flow stopped: {traj.termination.message}")
    return _record(values={"gap": two_field_gap(traj.effective_potential())}, termination=term)


def _flow_diagram(cfg: dict, key: tuple, solver: dict) -> dict:
    order, index = key
    traj = dl.integrate_dimensionless(
        np.array(solver["seed"]),
        t_max=cfg.get("t_max", 20.0),
        samples=cfg.get("samples", 201),
        massive_threshold=cfg.get("massive_threshold", 50.0),
        pole_guard=cfg.get("pole_guard", 1e-3),
        runaway_bound=cfg.get("runaway_bound", 1e12),
    )
    tables = {}
    if cfg.get("write_trajectories", True):
        header = ["t"] + [f"ahat_{n}" for n in range(order + 1)]
        tables[f"flow_diagram/N{order:02d}/seed_{index:04d}.csv"] = {"header": header, "rows": list(traj.rows())}
    values = {"ahat2": float(traj.ahat[0, 2]), "ahat4": float(traj.ahat[0, 4]), "t_end": float(traj.t[-1])}
    return _record(values=values, termination={"kind": traj.outcome}, tables=tables)


def _fixed_points(cfg: dict, key: tuple, solver: dict) -> dict:
    (order,) = key
    box = cfg.get("search_box")
    box = {int(k): tuple(v) for k, v in box.items()} if box else None
    fps = dl.find_fixed_points(
        order, box, sector=cfg.get("sector", "even"), seeds_per_axis=cfg.get("seeds_per_axis", 9)
    )
    rows = []
    for i, fp in enumerate(fps):
        for n, lam in enumerate(fp.eigenvalues):
            rows.append((order, i, fp.classification, fp.relevant_directions, n, float(lam.real), float(lam.imag)))
    coords = [(order, i, n, float(v)) for i, fp in enumerate(fps) for n, v in enumerate(fp.ahat)]
    tables = {
        "fixed_point_eigenvalues.csv": {
            "header": ["order", "index", "classification", "relevant_directions", "n", "re", "im"],
            "rows": rows,
        },
        "fixed_point_locations.csv": {"header": ["order", "index", "n", "ahat"], "rows": coords},
    }
    values = {"count": len(fps), "nontrivial": sum(fp.classification == "nontrivial" for fp in fps)}
    return _record(values=values, tables=tables)


def run_point(cfg: dict, key: tuple, solver: dict) -> dict:
    """Evaluate one work item; exceptions become ``failed`` records."""
    t0 = time.perf_counter()
    study = cfg["study"]
    try:
        if study == "two_particle":
            rec = _two_particle(cfg, key, solver)
        elif study == "flow_diagram":
            rec = _flow_diagram(cfg, key, solver)
        elif study == "fixed_points":
            rec = _fixed_points(cfg, key, solver)
        else:
            rec = _one_field(cfg, key, solver)
    except Exception as exc:  # fault isolation: one point never takes down a sweep
        rec = _record("failed", message=f"{type(exc).__name__}: {exc}")
    rec["seconds"] = time.perf_counter() - t0
    return rec


def summary_tables(cfg: dict, points: list) -> dict:
    """Study-level aggregates built from the merged point records."""
    if cfg["study"] != "flow_diagram":
        return {}
    counts = {}
    for p in points:
        order = p["key"][0]
        outcome = (p.get("termination") or {}).get("kind", "failed") if p["status"] == "completed" else "failed"
        c = counts.setdefault(order, {"symmetric": 0, "spurious_broken": 0, "undecided": 0, "failed": 0})
        c[outcome] = c.get(outcome, 0) + 1
    rows = []
    for order in sorted(counts):
        c = counts[order]
        total = sum(c.values())
        rows.append((order, total, c["symmetric"], c["spurious_broken"], c["undecided"], c["failed"], c["spurious_broken"] / total))
    header = ["order", "seeds", "symmetric", "spurious_broken", "undecided", "failed", "spurious_fraction"]
    return {"basin_fractions.csv": {"header": header, "rows": rows}}
