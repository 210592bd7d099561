import json
import math
import subprocess
import sys

import pytest

from whflow.cli import AxisMismatchError, ConfigError, compare, load_config, main, validate_config
from whflow.tables import format_number, parse_cell, read_csv, sha256_file

SWEEP = {
    "study": "sweep",
    "potential": {"kind": "single_well"},
    "sweep": {"parameter": "lambda0", "values": [0.5, 0.1]},
    "solvers": [{"method": "grid"}, {"method": "couplings", "order": 8}, {"method": "perturbation2"}, {"method": "oracle"}],
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def run(tmp_path, verb, cfg, out="out", jobs=1):
    code = main([verb, "--config", str(write(tmp_path, cfg, f"{out}.json")), "--out", str(tmp_path / out), "--jobs", str(jobs)])
    manifest_path = tmp_path / out / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else None
    return code, manifest


# ------------------------------------------------------------ validation


@pytest.mark.parametrize(
    "patch",
    [
        {"unknown": 1},
        {"flow": {"lambda0": 10.0, "bogus": 1}},
        {"potential": {"kind": "single_well", "colour": "red"}},
        {"solvers": [{"method": "grid", "extra": True}]},
        {"sweep": {"parameter": "lambda0", "values": [1.0], "step": 2}},
        {"states": 4},  # valid key for another study only
    ],
    ids=["top", "flow", "potential", "solver", "sweep", "foreign-study-key"],
)
def test_unknown_keys_rejected(patch):
    with pytest.raises(ConfigError):
        validate_config({**SWEEP, **patch})


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        validate_config({**SWEEP, "solvers": [{"method": "magic"}]})
    with pytest.raises(ConfigError):
        validate_config({**SWEEP, "flow": {"lambda0": 1.0, "lambda_ir": 2.0}})
    with pytest.raises(ConfigError):
        validate_config({"study": "sweep"})


def test_verb_must_match_study(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, SWEEP), "poles")
    assert main(["poles", "--config", str(write(tmp_path, SWEEP)), "--out", str(tmp_path / "x")]) == 2


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["sweep", "--config", str(path), "--out", str(tmp_path / "x")]) == 2


@pytest.mark.parametrize("name", ["flow_harmonic", "sweep_single_well", "sweep_double_well", "susy", "two_particle", "flow_diagram", "fixed_points", "poles_double_well"])
def test_shipped_configs_validate(name):
    from pathlib import Path

    load_config(Path(__file__).parent.parent / "configs" / f"{name}.json")


# ------------------------------------------------------------ outputs


def test_sweep_outputs_and_manifest(tmp_path):
    code, manifest = run(tmp_path, "sweep", SWEEP)
    assert code == 0
    assert manifest["success"] and manifest["version"]
    assert manifest["config"] == SWEEP
    assert manifest["status_counts"] == {"completed": 8}
    for entry in manifest["files"]:
        assert sha256_file(tmp_path / "out" / entry["path"]) == entry["sha256"]
    header, rows = read_csv(tmp_path / "out" / "results.csv")
    assert header[:3] == ["lambda0", "solver", "status"]
    # merged in sorted parameter order, solvers in config order
    assert [(r[0], r[1]) for r in rows[:4]] == [("0.10000000000000001", s) for s in ("grid", "couplings8", "perturbation2", "oracle")]
    assert all(p["seconds"] >= 0 for p in manifest["points"])


def test_numbers_round_trip_with_seventeen_digits():
    for v in (0.1, 1 / 3, math.pi * 1e-300, -2.5e17, 1e-5):
        text = format_number(v)
        assert parse_cell(text) == v
    assert format_number(0.1) == "0.10000000000000001"
    assert format_number(float("nan")) == "nan" and format_number(None) == ""


def test_runs_are_byte_identical(tmp_path):
    _, first = run(tmp_path, "sweep", SWEEP, out="a")
    _, second = run(tmp_path, "sweep", SWEEP, out="b", jobs=2)
    assert [f["sha256"] for f in first["files"]] == [f["sha256"] for f in second["files"]]
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()


def test_failing_point_is_isolated(tmp_path):
    cfg = {
        "study": "sweep",
        "potential": {"kind": "double_well"},
        "sweep": {"parameter": "lambda0", "values": [0.02, 0.3]},
        "solvers": [{"method": "grid"}],
    }
    code, manifest = run(tmp_path, "sweep", cfg)
    assert code == 1
    status = {p["key"][0]: p for p in manifest["points"]}
    assert status[0.02]["status"] == "failed" and "IncompleteFlowError" in status[0.02]["message"]
    assert status[0.02]["termination"]["kind"] == "spinodal"
    assert status[0.3]["status"] == "completed"
    _, rows = read_csv(tmp_path / "out" / "results.csv")
    good = [r for r in rows if r[0] == "0.29999999999999999"][0]
    assert all(not math.isnan(float(v)) for v in good[3:10])

    code, manifest = run(tmp_path, "sweep", {**cfg, "expected_failures": [{"solver": "grid", "key": [0.02]}]}, out="ok")
    assert code == 0
    assert manifest["status_counts"] == {"completed": 1, "expected_failure": 1}


def test_expected_failure_without_key_covers_solver(tmp_path):
    cfg = {
        "study": "sweep",
        "potential": {"kind": "double_well"},
        "sweep": {"parameter": "lambda0", "values": [0.02]},
        "solvers": [{"method": "grid"}],
        "expected_failures": [{"solver": "grid"}],
    }
    assert run(tmp_path, "sweep", cfg)[0] == 0


@pytest.mark.parametrize(
    "verb,cfg,table",
    [
        ("flow", {"study": "flow", "potential": {"kind": "harmonic"}, "solvers": [{"method": "grid"}, {"method": "harmonic_exact"}, {"method": "oracle", "states": 3}]}, "spectrum.csv"),
        ("fixed-points", {"study": "fixed_points", "orders": [4]}, "fixed_point_locations.csv"),
        ("flow-diagram", {"study": "flow_diagram", "orders": [4], "seed_grid": {"a2_range": [-0.5, 0.5], "a4_range": [0.5, 2.0], "points": 2}, "samples": 5}, "basin_fractions.csv"),
        ("poles", {"study": "poles", "potential": {"kind": "harmonic"}, "sweep": {"parameter": "m", "values": [1.0]}, "states": 6}, "poles.csv"),
        ("susy", {"study": "susy", "potential": {"kind": "susy_plus"}, "sweep": {"parameter": "g", "values": [0.0, 0.2]}, "solvers": [{"method": "oracle"}, {"method": "valley_susy"}], "expected_failures": [{"solver": "valley_susy", "key": [0.0]}]}, None),
        ("two-particle", {"study": "two_particle", "lambda0": 0.2, "cases": [{"interaction": "linear", "strength": 0.0}], "solvers": [{"method": "perturbation1"}]}, None),
    ],
)
def test_every_verb_runs(tmp_path, verb, cfg, table):
    code, manifest = run(tmp_path, verb, cfg)
    assert code == 0, manifest["points"]
    names = [f["path"] for f in manifest["files"]]
    assert "results.csv" in names
    if table:
        assert table in names


def test_console_script(tmp_path):
    cfg = write(tmp_path, {"study": "fixed_points", "orders": [4]})
    proc = subprocess.run(
        [sys.executable, "-m", "whflow.cli", "fixed-points", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "manifest.json").exists()


# ------------------------------------------------------------ compare


def test_compare_identical_manifests_gives_zero_deviation(tmp_path):
    run(tmp_path, "sweep", SWEEP, out="a")
    run(tmp_path, "sweep", SWEEP, out="b")
    header, rows = compare([tmp_path / "a" / "manifest.json", tmp_path / "b" / "manifest.json"], "m_eff", "m0:oracle")
    dev = [i for i, h in enumerate(header) if h.startswith("reldev:m1:")]
    same = {h.split(":", 2)[-1]: i for i, h in enumerate(header) if h.startswith("reldev:m0:")}
    assert len(rows) == 2 and dev
    for row in rows:
        for i in dev:
            name = header[i].split(":", 2)[-1]
            if not math.isnan(row[i]):
                assert row[i] == row[same[name]]
        assert row[header.index("reldev:m1:oracle")] == 0.0


def test_compare_cli_writes_table(tmp_path):
    run(tmp_path, "sweep", SWEEP, out="a")
    code = main(["compare", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "cmp"), "--quantity", "e0"])
    assert code == 0
    header, rows = read_csv(tmp_path / "cmp" / "comparison.csv")
    assert header[0] == "lambda0" and "reldev:oracle" in header
    assert all(float(r[header.index("reldev:oracle")]) == 0.0 for r in rows)


def test_compare_rejects_axis_mismatch(tmp_path):
    run(tmp_path, "sweep", SWEEP, out="a")
    other = {**SWEEP, "sweep": {"parameter": "lambda0", "values": [0.5, 1.0]}}
    run(tmp_path, "sweep", other, out="b")
    run(tmp_path, "fixed-points", {"study": "fixed_points", "orders": [4]}, out="c")
    with pytest.raises(AxisMismatchError):
        compare([tmp_path / "a" / "manifest.json", tmp_path / "b" / "manifest.json"], "m_eff")
    with pytest.raises(AxisMismatchError):
        compare([tmp_path / "a" / "manifest.json", tmp_path / "c" / "manifest.json"], "m_eff")
    assert main(["compare", str(tmp_path / "a" / "manifest.json"), str(tmp_path / "b" / "manifest.json"), "--out", str(tmp_path / "x")]) == 2


def test_compare_detects_tampering(tmp_path):
    run(tmp_path, "sweep", SWEEP, out="a")
    with open(tmp_path / "a" / "results.csv", "a") as fh:
        fh.write("\n")
    with pytest.raises(ValueError, match="checksum"):
        compare([tmp_path / "a" / "manifest.json"])
