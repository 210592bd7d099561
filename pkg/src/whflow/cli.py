"""Command-line runner for configured studies.

``whflow <verb> --config study.json --out results/ [--jobs N]`` runs every
work point of the study (in a process pool when ``N > 1``), merges the
records in sorted key order and writes ``results.csv``, any per-point
tables, and ``manifest.json`` (config echo, version, statuses, timings and
a sha256 for every file).  ``whflow compare m1.json m2.json ...`` joins the
results of several manifests on their shared key columns.

Exit status is 0 only when every point completed or was listed under
``expected_failures``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema

from . import __version__
from .studies import config_schema, expand_points, run_point, solver_label, study_keys, study_quantities, summary_tables
from .tables import parse_cell, read_csv, sha256_file, write_csv, write_json

log = logging.getLogger("whflow")

VERBS = {
    "flow": "flow",
    "sweep": "sweep",
    "flow-diagram": "flow_diagram",
    "fixed-points": "fixed_points",
    "susy": "susy",
    "two-particle": "two_particle",
    "poles": "poles",
}

SUCCESS = ("completed", "partial", "expected_failure")


class ConfigError(ValueError):
    """The configuration file is malformed or does not fit the verb."""


class AxisMismatchError(ValueError):
    """Manifests handed to ``compare`` do not share a parameter axis."""


def load_config(path: Path, study: str | None = None) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    validate_config(cfg, study)
    return cfg


def validate_config(cfg: dict, study: str | None = None) -> None:
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msg = "; ".join(f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors)
        raise ConfigError(f"config rejected: {msg}")
    if study is not None and cfg["study"] != study:
        raise ConfigError(f"config is for study {cfg['study']!r}, not {study!r}")
    flow = cfg.get("flow", {})
    if flow.get("lambda_ir", 1e-3) >= flow.get("lambda0", 100.0):
        raise ConfigError("flow.lambda_ir must be below flow.lambda0")


def _key_matches(pattern, key) -> bool:
    if len(pattern) != len(key):
        return False
    for a, b in zip(pattern, key):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)):
            if not math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-15):
                return False
        elif a != b:
            return False
    return True


def _expected_failure(cfg: dict, label: str, key: tuple) -> bool:
    for item in cfg.get("expected_failures", []):
        if item["solver"] == label and ("key" not in item or _key_matches(item["key"], key)):
            return True
    return False


def _run_all(cfg: dict, points: list, jobs: int) -> list:
    if jobs <= 1 or len(points) <= 1:
        return [run_point(cfg, key, solver) for key, solver in points]
    results = [None] * len(points)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_point, cfg, key, solver) for key, solver in points]
        for i, fut in enumerate(futures):
            try:
                results[i] = fut.result()
            except Exception as exc:  # worker died (e.g. killed); isolate the point
                results[i] = {
                    "status": "failed",
                    "values": {},
                    "termination": None,
                    "message": f"worker crashed: {type(exc).__name__}: {exc}",
                    "tables": {},
                    "seconds": float("nan"),
                }
    return results


def _sort_key(key: tuple):
    return tuple((0, v, "") if isinstance(v, (int, float)) else (1, 0.0, str(v)) for v in key)


def run_study(cfg: dict, out: Path, jobs: int = 1) -> dict:
    """Run a validated config, write its outputs under ``out`` and return the manifest."""
    t_start = time.perf_counter()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    points = expand_points(cfg)
    records = _run_all(cfg, points, jobs)
    order = {}
    for _, solver in points:
        order.setdefault(solver_label(solver), len(order))
    merged = []
    for (key, solver), rec in zip(points, records):
        label = solver_label(solver)
        status = rec["status"]
        if status == "failed" and _expected_failure(cfg, label, key):
            status = "expected_failure"
        merged.append({**rec, "key": list(key), "solver": label, "status": status})
    merged.sort(key=lambda r: (_sort_key(tuple(r["key"])), order.get(r["solver"], 0)))

    keys = study_keys(cfg)
    quantities = study_quantities(cfg["study"])
    header = list(keys) + ["solver", "status"] + list(quantities) + ["termination", "lambda_stop"]
    rows = []
    for r in merged:
        term = r.get("termination") or {}
        vals = [r["values"].get(q, float("nan")) for q in quantities]
        rows.append([*r["key"], r["solver"], r["status"], *vals, term.get("kind", ""), term.get("lambda")])
    files = {"results.csv": write_csv(out / "results.csv", header, rows)}

    extra = {}
    for r in merged:
        for name, table in r["tables"].items():
            slot = extra.setdefault(name, {"header": table["header"], "rows": []})
            slot["rows"].extend(table["rows"])
    extra.update(summary_tables(cfg, merged))
    for name in sorted(extra):
        files[name] = write_csv(out / name, extra[name]["header"], extra[name]["rows"])

    counts = {}
    for r in merged:
        counts[r["status"]] = counts.get(r["status"], 0) + 1
    ok = all(r["status"] in SUCCESS for r in merged)
    manifest = {
        "artifact": "artifact",
        "version": __version__,
        "study": cfg["study"],
        "config": cfg,
        "keys": list(keys),
        "quantities": list(quantities),
        "results": "results.csv",
        "files": [{"path": name, **meta} for name, meta in sorted(files.items())],
        "points": [
            {
                "key": r["key"],
                "solver": r["solver"],
                "status": r["status"],
                "termination": r.get("termination"),
                "message": r["message"],
                "seconds": r["seconds"],
            }
            for r in merged
        ],
        "status_counts": counts,
        "success": ok,
        "timings": {"total_seconds": time.perf_counter() - t_start, "jobs": jobs},
    }
    write_json(out / "manifest.json", manifest)
    return manifest


# ----------------------------------------------------------------- compare


def _load_results(manifest_path: Path) -> tuple:
    manifest_path = Path(manifest_path)
    m = json.loads(manifest_path.read_text(encoding="utf-8"))
    table = manifest_path.parent / m["results"]
    recorded = {f["path"]: f["sha256"] for f in m["files"]}
    if recorded.get(m["results"]) != sha256_file(table):
        raise ValueError(f"{table}: checksum does not match its manifest")
    header, rows = read_csv(table)
    return m, header, rows


def compare(manifest_paths, quantity: str | None = None, reference: str | None = None) -> tuple:
    """Join the results of several manifests on their key columns.

    Returns ``(header, rows)``: the key columns, one column per
    ``(manifest, solver)`` holding ``quantity`` and, for each of those, the
    relative deviation from the reference column (the first ``oracle``
    column unless ``reference`` names another one).
    """
    loaded = [_load_results(p) for p in manifest_paths]
    keys = loaded[0][0]["keys"]
    if not keys:
        raise AxisMismatchError("first manifest has no parameter axis to join on")
    for m, _, _ in loaded[1:]:
        if m["keys"] != keys:
            raise AxisMismatchError(f"key columns differ: {keys} vs {m['keys']}")
    quantity = quantity or loaded[0][0]["quantities"][0]
    nk = len(keys)
    columns = {}
    key_sets = []
    for idx, (m, header, rows) in enumerate(loaded):
        if quantity not in header:
            raise ValueError(f"quantity {quantity!r} not in manifest {idx}")
        qi, si = header.index(quantity), header.index("solver")
        seen = set()
        for row in rows:
            key = tuple(parse_cell(c) for c in row[:nk])
            seen.add(key)
            name = row[si] if len(loaded) == 1 else f"m{idx}:{row[si]}"
            columns.setdefault(name, {})[key] = parse_cell(row[qi])
        key_sets.append(seen)
    if any(ks != key_sets[0] for ks in key_sets[1:]):
        raise AxisMismatchError("manifests cover different parameter values")
    names = list(columns)
    if reference is None:
        reference = next((n for n in names if n.split(":")[-1] == "oracle"), names[0])
    if reference not in columns:
        raise ValueError(f"reference column {reference!r} not found among {names}")
    out_header = list(keys) + names + [f"reldev:{n}" for n in names]
    out_rows = []
    for key in sorted(key_sets[0], key=_sort_key):
        vals = [columns[n].get(key) for n in names]
        ref = columns[reference].get(key)
        devs = []
        for v in vals:
            if isinstance(v, float) and isinstance(ref, float) and ref != 0 and not math.isnan(ref):
                devs.append((v - ref) / abs(ref))
            else:
                devs.append(float("nan"))
        out_rows.append([*key, *[float("nan") if v is None else v for v in vals], *devs])
    return out_header, out_rows


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="whflow", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        sp = sub.add_parser(verb, help=f"run a {VERBS[verb]} study")
        sp.add_argument("--config", required=True, type=Path, help="JSON experiment config")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    cp = sub.add_parser("compare", help="join the results of several manifests")
    cp.add_argument("manifests", nargs="+", type=Path)
    cp.add_argument("--out", required=True, type=Path)
    cp.add_argument("--quantity", default=None, help="column to compare (default: first quantity)")
    cp.add_argument("--reference", default=None, help="reference column (default: first oracle column)")
    cp.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    cp.add_argument("--config", type=Path, default=None, help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    if args.verb == "compare":
        t0 = time.perf_counter()
        try:
            header, rows = compare(args.manifests, args.quantity, args.reference)
        except (AxisMismatchError, ValueError, OSError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        args.out.mkdir(parents=True, exist_ok=True)
        meta = write_csv(args.out / "comparison.csv", header, rows)
        write_json(
            args.out / "manifest.json",
            {
                "artifact": "artifact",
                "version": __version__,
                "study": "compare",
                "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in args.manifests],
                "quantity": args.quantity,
                "files": [{"path": "comparison.csv", **meta}],
                "timings": {"total_seconds": time.perf_counter() - t0},
            },
        )
        return 0
    try:
        cfg = load_config(args.config, VERBS[args.verb])
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    manifest = run_study(cfg, args.out, args.jobs)
    for p in manifest["points"]:
        if p["status"] not in SUCCESS:
            print(f"point {p['key']} [{p['solver']}] {p['status']}: {p['message']}", file=sys.stderr)
    return 0 if manifest["success"] else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
