import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zaremba import scenarios as S
from zaremba.report import report_csv, report_json, report_svg
from zaremba.scenarios import (
    EQUAL_WITHIN_TOL,
    INCONCLUSIVE,
    VERIFIED_STRICT,
    ScenarioConfig,
    SolverConfig,
    builtin_configs,
    load_config,
    verdict,
)

FAST = {"h0": 0.2, "levels": 3}


# ---------------------------------------------------------------------------
# verdict rule


@given(st.floats(-1, 1), st.floats(0, 0.1), st.floats(0, 0.1), st.booleans())
def test_verdict_rule(margin, e1, e2, sym):
    v = verdict(margin, e1, e2, sym)
    bound = 3 * (e1 + e2)
    assert (v == VERIFIED_STRICT) == (margin > bound)
    assert (v == EQUAL_WITHIN_TOL) == (abs(margin) <= bound and sym and not margin > bound)
    if margin <= bound:
        assert v != VERIFIED_STRICT


def test_verdict_examples():
    assert verdict(1.0, 0.1, 0.1, False) == VERIFIED_STRICT
    assert verdict(0.6, 0.1, 0.1, False) == INCONCLUSIVE
    assert verdict(0.6, 0.1, 0.1, True) == EQUAL_WITHIN_TOL
    assert verdict(-1.0, 0.1, 0.1, True) == INCONCLUSIVE


# ---------------------------------------------------------------------------
# config parsing


def test_shipped_configs_load():
    names = builtin_configs()
    required = {
        "square_dirichlet", "square_one_side", "rectangle_one_side", "triangles_obtuse", "triangles_right",
        "trapezium_sweep", "circular_cap", "rectangle_symmetry", "delta_sweep_acceptance",
        "identity_square_cos", "identity_disk", "identity_square_polynomial", "square_subset_lattice",
    }
    assert required <= set(names)
    for n in names:
        c = load_config(n)
        assert c.kind in S.KINDS
        assert c.expect, n


@pytest.mark.parametrize(
    "bad, msg",
    [
        ({"kind": "bogus"}, "kind"),
        ({"domain": None}, None),
        ({"partition": {"gamma": ["left"], "gamma_prime": "middle"}}, "unknown arc label"),
        ({"partition": {"gamma": ["left"]}}, "gamma_prime"),
        ({"partition": {"gamma": ["left"], "gamma_prime": "right"}, "solver": {"h0": -1}}, "h0"),
        ({"partition": {"gamma": ["left"], "gamma_prime": "right"}, "solver": {"tol": 0}}, "tol"),
        ({"kind": "sweep"}, "sweep"),
        ({"partition": {"gamma": [0], "gamma_prime": 7}}, "out of range"),
    ],
)
def test_invalid_configs(bad, msg):
    d = {"kind": "compare", "name": "t", "domain": {"family": "square"}}
    d.update(bad)
    if d["domain"] is None:
        del d["domain"]
    with pytest.raises((ValueError, TypeError)) as e:
        ScenarioConfig.from_dict(d)
    if msg:
        assert msg in str(e.value)


def test_unknown_family():
    with pytest.raises(ValueError, match="family"):
        S.build_domain({"family": "heptagon"})


def test_missing_config():
    with pytest.raises(FileNotFoundError):
        load_config("no_such_scenario")


def test_overrides():
    c = load_config("circular_cap").with_overrides(h0=0.5, levels=2, grading=False)
    assert (c.solver.h0, c.solver.levels, c.solver.grading) == (0.5, 2, False)


def test_relative_mesh_size():
    b = S.trapezium(0.5).boundary
    s = SolverConfig(h0=0.5, h0_relative=True)
    assert s.mesh_size(b) == pytest.approx(0.5 * 2 * b.signed_area / b.perimeter)


# ---------------------------------------------------------------------------
# families


@pytest.mark.parametrize("angle", [95, 120, 175])
def test_triangle_family_labels(angle):
    dom = S.triangle(angle, 0.4)
    b = dom.boundary
    L, M, Sh = (b.arcs[dom.arc_id(k)].length for k in "LMS")
    assert L > M > Sh
    angles = np.degrees(b.interior_angles)
    assert max(angles) == pytest.approx(angle, abs=1e-10)
    assert sum(angles) == pytest.approx(180, abs=1e-10)


def test_trapezium_family():
    dom = S.trapezium(0.4)
    b = dom.boundary
    L, Sh = b.arcs[dom.arc_id("L")], b.arcs[dom.arc_id("S")]
    assert Sh.length == pytest.approx(0.4 * L.length)
    # bases are parallel
    u, v = L.b - L.a, Sh.b - Sh.a
    assert abs(u[0] * v[1] - u[1] * v[0]) <= 1e-12
    assert np.degrees(b.interior_angles[0]) == pytest.approx(60.0)


def test_delta_quadrilateral_angle():
    for d in (0.01, 0.1):
        dom = S.delta_quadrilateral(d)
        b = dom.boundary
        # the two sides meeting at the up-jump corner have slopes -1 and -tan(pi/4 - delta)
        t2 = b.arcs[1].tangents([0.0])[0]
        t3 = b.arcs[2].tangents([0.0])[0]
        assert t2[1] / t2[0] == pytest.approx(-1.0, abs=1e-12)
        assert t3[1] / t3[0] == pytest.approx(-math.tan(math.pi / 4 - d), abs=1e-12)


def test_transition_corners():
    assert S._transition_corners(4, [1]) == [1, 2]
    assert S._transition_corners(4, [0, 1, 2, 3]) == []
    assert S._transition_corners(3, [0], [2]) == [0, 1, 2]


# ---------------------------------------------------------------------------
# runners


@pytest.fixture(scope="module")
def triangle_report():
    c = ScenarioConfig.from_dict(
        {"kind": "compare", "name": "rt", "domain": {"family": "triangle", "params": {"angles": [30, 60]}},
         "partition": {"gamma": ["L"], "gamma_prime": "S"}, "solver": FAST}
    )
    return S.compare(c)


def test_compare_report(triangle_report):
    r = triangle_report
    assert r.verdict == VERIFIED_STRICT
    assert r.classification == "monotone_remainder"
    assert r.gamma.positive and r.gamma_prime.positive
    d = r.to_dict()
    assert d["kind"] == "compare" and "timing" in d
    assert len(d["level_margins"]) == 3


def test_report_determinism(triangle_report):
    c = ScenarioConfig.from_dict(
        {"kind": "compare", "name": "rt", "domain": {"family": "triangle", "params": {"angles": [30, 60]}},
         "partition": {"gamma": ["L"], "gamma_prime": "S"}, "solver": FAST}
    )
    again = S.compare(c)
    a = json.loads(report_json(triangle_report))
    b = json.loads(report_json(again))
    a.pop("timing"), b.pop("timing")
    assert a == b
    assert report_svg(triangle_report) == report_svg(again)


def test_json_and_csv_formats(triangle_report):
    text = report_json(triangle_report)
    d = json.loads(text)
    assert next(iter(d)) == "schema" and d["schema"] == 1
    csv = report_csv(triangle_report)
    lines = csv.split("\r\n")
    assert lines[0].startswith("level,h,n_dofs")
    assert lines[-1] == "" and "\n" not in csv.replace("\r\n", "")
    assert len(lines) == 3 + 2 + 1


def test_sweep_records_failures():
    c = ScenarioConfig.from_dict(
        {"kind": "sweep", "name": "s", "domain": {"family": "trapezium"},
         "sweep": {"grid": {"ratio": [0.5, 1.5]}, "pairs": [["L", "S"]]}, "solver": {"h0": 0.3, "levels": 3}}
    )
    rep = S.run_sweep(c)
    assert [p["index"] for p in rep.points] == [0, 1]
    assert rep.verdicts[0] == VERIFIED_STRICT
    assert rep.verdicts[1] == "ERROR" and rep.points[1]["error"]
    rows = rep.csv_rows()
    assert list(rows[0]) == S.SWEEP_COLUMNS
    assert rows[1]["verdict"] == "ERROR"


def test_parallel_sweep_matches_serial(monkeypatch):
    c = ScenarioConfig.from_dict(
        {"kind": "sweep", "name": "s", "domain": {"family": "triangle"},
         "sweep": {"grid": {"largest_angle": [100, 140]}, "pairs": [["L", "M"]]}, "solver": FAST}
    )
    monkeypatch.setenv("ZAREMBA_THREADS", "1")
    serial = S.run_sweep(c)
    monkeypatch.setenv("ZAREMBA_THREADS", "2")
    assert S.max_workers() == 2
    par = S.run_sweep(c)
    for a, b in zip(serial.points, par.points):
        assert a["report"].margin == b["report"].margin


def test_inclusion_identical():
    c = ScenarioConfig.from_dict(
        {"kind": "inclusion", "name": "i", "domain": {"family": "square"},
         "partition": {"gamma": ["left"], "gamma_prime": ["left"]}, "solver": FAST}
    )
    rep = S.run_inclusion(c)
    assert rep.identical and rep.monotone
    assert all(g == 0.0 for g in rep.level_gaps)


def test_inclusion_adjacent_sides_strict():
    c = ScenarioConfig.from_dict(
        {"kind": "inclusion", "name": "i", "domain": {"family": "square"},
         "partition": {"gamma": ["left", "bottom"], "gamma_prime": ["left"]}, "solver": FAST}
    )
    rep = S.run_inclusion(c)
    assert rep.monotone and rep.strict_expected and rep.strict
    assert all(g > 0 for g in rep.level_gaps)


def test_inclusion_requires_subset():
    c = ScenarioConfig.from_dict(
        {"kind": "inclusion", "name": "i", "domain": {"family": "square"},
         "partition": {"gamma": ["left"], "gamma_prime": ["right"]}, "solver": FAST}
    )
    with pytest.raises(ValueError):
        S.run_inclusion(c)


def test_all_sides_versus_one_gap():
    rep = S.run_inclusion(load_config("square_inclusion_all_vs_one"))
    gap = rep.gamma.value - rep.gamma_prime.value
    assert gap == pytest.approx(2 * math.pi**2 - math.pi**2 / 4, rel=2e-3)


def test_check_runner():
    rep = S.run_check(load_config("equilateral_upjump"))
    assert rep.validation["accepted"]
    assert rep.classification == "none"
    kinds = [v["kind"] for v in rep.hypotheses.monotonicity.violations]
    assert kinds == ["corner-up-jump"]
    rows = rep.csv_rows()
    assert {"arc", "s", "t"} == set(rows[0])


def test_solve_runner_reference():
    c = ScenarioConfig.from_dict(
        {"kind": "solve", "name": "s", "domain": {"family": "square"}, "partition": {"gamma": ["right"]},
         "solver": {"h0": 0.1, "levels": 3}, "reference": {"lambda": "pi**2/4", "rtol": 1e-3}}
    )
    rep = S.run_solve(c)
    assert rep.passed
    assert rep.relative_error < 1e-3


@pytest.mark.parametrize("expr, value", [("2*pi**2", 2 * math.pi**2), ("pi**2/16", math.pi**2 / 16), (1.5, 1.5)])
def test_reference_expressions(expr, value):
    assert S._number(expr) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("expr", ["__import__('os')", "pi.real", "[1]"])
def test_reference_expressions_rejected(expr):
    with pytest.raises(ValueError):
        S._number(expr)


def test_identity_runner():
    rep = S.run_identity(load_config("identity_square_cos"))
    d = rep.to_dict()
    assert d["pass"] is True
    assert d["breakdown"]["term_mixed"] == pytest.approx((math.pi / 2) ** 4 / 4, rel=1e-10)
