import json
import subprocess
import sys

import pytest

from zaremba.cli import EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, check_expectations, main
from zaremba import scenarios as S


def run(argv, capsys):
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def write_config(tmp_path, d, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d), encoding="utf-8")
    return str(p)


TRIANGLE = {
    "name": "rt", "kind": "compare",
    "domain": {"family": "triangle", "params": {"angles": [30, 60]}},
    "partition": {"gamma": ["L"], "gamma_prime": "S"},
    "solver": {"h0": 0.2, "levels": 3},
    "expect": {"verdict": "VERIFIED_STRICT"},
}


def test_list(capsys):
    rc, out, _ = run(["list"], capsys)
    assert rc == EXIT_OK
    assert "circular_cap" in out.split()


def test_check_shipped_config(capsys):
    rc, out, _ = run(["check", "--config", "equilateral_upjump", "--expect"], capsys)
    assert rc == EXIT_OK
    d = json.loads(out)
    assert d["schema"] == 1 and d["classification"] == "none"


def test_expect_mismatch_exit_code(capsys):
    rc, _, err = run(["check", "--config", "equilateral_upjump", "--expect", "classification=complementary"], capsys)
    assert rc == EXIT_MISMATCH
    assert "expected complementary" in err


def test_expect_unknown_key(capsys):
    rc, _, err = run(["check", "--config", "equilateral_upjump", "--expect", "verdict=VERIFIED_STRICT"], capsys)
    assert rc == EXIT_MISMATCH
    assert "not available" in err


def test_error_exit_codes(capsys, tmp_path):
    rc, _, err = run(["compare", "--config", "missing_scenario_name"], capsys)
    assert rc == EXIT_ERROR and "error" in err
    bad = dict(TRIANGLE, partition={"gamma": ["L"], "gamma_prime": "Q"})
    rc, _, err = run(["compare", "--config", write_config(tmp_path, bad)], capsys)
    assert rc == EXIT_ERROR and "unknown arc label" in err
    rc, _, _ = run(["compare", "--config", write_config(tmp_path, TRIANGLE), "--format", "pdf"], capsys)
    assert rc == EXIT_ERROR


def test_compare_outputs(capsys, tmp_path):
    path = write_config(tmp_path, TRIANGLE)
    out_dir = tmp_path / "out"
    rc, _, err = run(["compare", "--config", path, "--out", str(out_dir), "--format", "json,csv,svg", "--expect"], capsys)
    assert rc == EXIT_OK
    files = sorted(p.name for p in out_dir.iterdir())
    assert files == ["rt.csv", "rt.json", "rt.svg"]
    assert (out_dir / "rt.csv").read_bytes().count(b"\r\n") == 5
    d = json.loads((out_dir / "rt.json").read_text())
    assert d["verdict"] == "VERIFIED_STRICT"
    assert d["hypotheses"]["classification"] == "monotone_remainder"
    assert set(d["eigenvalues"]) == {"gamma", "gamma_prime"}
    assert (out_dir / "rt.svg").read_text().lstrip().startswith("<?xml")


def test_flag_overrides(capsys, tmp_path):
    path = write_config(tmp_path, TRIANGLE)
    rc, out, _ = run(["compare", "--config", path, "--levels", "3", "--h0", "0.25", "--grading", "off"], capsys)
    assert rc == EXIT_OK
    d = json.loads(out)
    levels = d["eigenvalues"]["gamma"]["levels"]
    assert [lv["h"] for lv in levels] == pytest.approx([0.25, 0.125, 0.0625])


def test_up_jump_svg_marker(capsys, tmp_path):
    rc, _, _ = run(["check", "--config", "equilateral_upjump", "--format", "svg", "--out", str(tmp_path)], capsys)
    assert rc == EXIT_OK
    svg = (tmp_path / "equilateral_upjump.svg").read_text()
    assert 'id="up-jump-corner-2"' in svg
    assert "up-jump at corner 2" in svg


def test_svg_deterministic(capsys, tmp_path):
    texts = []
    for k in range(2):
        d = tmp_path / str(k)
        assert main(["check", "--config", "delta_quadrilateral_check", "--format", "svg", "--out", str(d)]) == 0
        texts.append((d / "delta_quadrilateral_check.svg").read_bytes())
    capsys.readouterr()
    assert texts[0] == texts[1]


def test_sweep_csv(capsys, tmp_path):
    cfg = {
        "name": "tiny", "kind": "sweep", "domain": {"family": "triangle"},
        "sweep": {"grid": {"largest_angle": [110, 150]}, "pairs": [["L", "S"]]},
        "solver": {"h0": 0.2, "levels": 3},
    }
    rc, out, _ = run(["sweep", "--config", write_config(tmp_path, cfg), "--format", "csv",
                      "--expect", "verdict=VERIFIED_STRICT"], capsys)
    assert rc == EXIT_OK
    lines = out.replace("\r\n", "\n").strip().split("\n")
    assert lines[0].split(",") == S.SWEEP_COLUMNS
    assert len(lines) == 3


def test_identity_and_inclusion_commands(capsys):
    assert run(["identity", "--config", "identity_square_cos", "--expect"], capsys)[0] == EXIT_OK
    assert run(["inclusion", "--config", "square_inclusion_equal", "--expect"], capsys)[0] == EXIT_OK


def test_check_expectations_lists_sweep_points():
    class Fake:
        points = [{"report": None}, {"report": None}]

        def to_dict(self):
            return {"kind": "sweep"}

    problems = check_expectations(Fake(), {"verdict": "VERIFIED_STRICT"})
    assert problems == ["verdict[0]: expected VERIFIED_STRICT, got ERROR", "verdict[1]: expected VERIFIED_STRICT, got ERROR"]


def test_console_script_entry_point():
    r = subprocess.run([sys.executable, "-m", "zaremba.cli", "list"], capture_output=True, text=True)
    assert r.returncode == 0 and "square_dirichlet" in r.stdout
