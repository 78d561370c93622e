"""Acceptance criteria 1-9, one test (and one PASS/FAIL line) per criterion.

The lines are collected in ``conftest.ACCEPTANCE_LINES`` and echoed in the
pytest terminal summary; running this file directly prints them as well.
"""

import math
import time

import numpy as np
import pytest
import scipy.linalg as sla

from zaremba import CircularArc, GraphArc, Segment, assemble, curvature_at, frame_at, generate, solve_smallest
from zaremba import scenarios as S
from zaremba.scenarios import EQUAL_WITHIN_TOL, VERIFIED_STRICT, load_config

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = {}

# min/max entry ratio of the ground state of every solve run in this module (criterion 9)
_POSITIVITY = []


def record(n, ok, title, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title} | {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    return ok


def _track(*tables):
    for t in tables:
        _POSITIVITY.extend(float(r.vector.min() / r.vector.max()) for r in t.levels)


def _sweep_tables(rep):
    for p in rep.points:
        if p.get("report") is not None:
            _track(p["report"].gamma, p["report"].gamma_prime)


# ---------------------------------------------------------------------------


def test_criterion_1_analytic_oracles():
    rows, ok = [], True
    for name, exact, rtol, budget in [
        ("square_dirichlet", 2 * math.pi**2, 1e-3, 60.0),
        ("square_one_side", math.pi**2 / 4, 1e-3, None),
        ("rectangle_one_side", math.pi**2 / 16, 2e-3, None),
    ]:
        cfg = load_config(name)
        assert cfg.solver.levels == 4
        t0 = time.perf_counter()
        rep = S.run_solve(cfg)
        dt = time.perf_counter() - t0
        _track(rep.table)
        rel = abs(rep.table.value - exact) / exact
        good = rel <= rtol and (budget is None or dt <= budget)
        ok &= good
        rows.append(f"{name} lambda={rep.table.value:.6f} rel={rel:.1e} ({dt:.1f}s)")
    assert record(1, ok, "analytic eigenvalue oracles", "; ".join(rows))


def test_criterion_2_triangles():
    ok, n_obtuse, n_right, worst, slow = True, 0, 0, math.inf, 0.0
    for name in ("triangles_obtuse", "triangles_right"):
        rep = S.run_sweep(load_config(name))
        _sweep_tables(rep)
        shapes = {str(p["params"]) for p in rep.points}
        if name == "triangles_obtuse":
            n_obtuse = len(shapes)
        else:
            n_right = len(shapes)
        assert {tuple(p["pair"]) for p in rep.points} == {("L", "S"), ("L", "M")}
        for p in rep.points:
            r = p.get("report")
            ok &= r is not None and r.verdict == VERIFIED_STRICT
            if r is not None:
                worst = min(worst, r.margin / max(r.threshold, 1e-300))
                slow = max(slow, r.elapsed)
    ok &= n_obtuse >= 9 and n_right >= 3 and slow <= 90.0
    assert record(2, ok, "obtuse and right triangles, S and M vs L",
                  f"{n_obtuse} obtuse + {n_right} right, min margin/threshold={worst:.3g}, slowest run {slow:.1f}s")


def test_criterion_3_trapezium():
    rep = S.run_sweep(load_config("trapezium_sweep"))
    _sweep_tables(rep)
    ratios = sorted({p["params"]["ratio"] for p in rep.points})
    ok = len(ratios) >= 5 and all(v == VERIFIED_STRICT for v in rep.verdicts)
    margins = [f"{p['params']['ratio']}:{p['report'].margin:.3g}" for p in rep.points if p.get("report")]
    assert record(3, ok, "acute trapezium, S vs L", f"ratios {ratios}; margins {', '.join(margins)}")


def test_criterion_4_curved_domain():
    cfg = load_config("circular_cap")
    dom = S.build_domain(cfg.domain)
    assert isinstance(dom.boundary.arcs[dom.arc_id("chord")], Segment)
    assert isinstance(dom.boundary.arcs[dom.arc_id("arc")], CircularArc)
    rep = S.compare(cfg)
    _track(rep.gamma, rep.gamma_prime)
    h = rep.hypotheses
    ok = h.complementary and h.angle_pass and rep.classification == "complementary" and rep.verdict == VERIFIED_STRICT
    assert record(4, ok, "curved domain, straight Gamma' vs convex arc Gamma",
                  f"classification={rep.classification}, endpoint angles "
                  f"{math.degrees(h.angle_at_start):.2f}/{math.degrees(h.angle_at_end):.2f} deg, "
                  f"margin={rep.margin:.4g} > threshold={rep.threshold:.3g}, verdict={rep.verdict}")


def test_criterion_5_rectangle_symmetry():
    rep = S.compare(load_config("rectangle_symmetry"))
    _track(rep.gamma, rep.gamma_prime)
    worst = max(abs(m) for m in rep.level_margins)
    ok = worst <= rep.threshold and abs(rep.margin) <= rep.threshold and rep.verdict == EQUAL_WITHIN_TOL
    assert record(5, ok, "rectangle opposite sides",
                  f"max |level margin|={worst:.2e}, |margin|={abs(rep.margin):.2e}, "
                  f"threshold={rep.threshold:.2e}, verdict={rep.verdict}")


def test_criterion_6_counterexample_family():
    rep = S.run_sweep(load_config("delta_sweep_acceptance"))
    _sweep_tables(rep)
    deltas, ok, parts = [], True, []
    for p in rep.points:
        r = p["report"]
        d = p["params"]["delta"]
        deltas.append(d)
        mono = r.hypotheses.monotonicity
        jumps = [v for v in mono.violations if v["kind"] == "corner-up-jump"]
        at_p2 = [v["location"]["corner"] for v in jumps] == [2]
        ok &= (not mono.passed) and at_p2 and r.classification == "none" and r.verdict == VERIFIED_STRICT
        parts.append(f"delta={d}: up-jump {jumps[0]['magnitude']:.2e} at corner 2, margin={r.margin:.3g} {r.verdict}")
    ok &= sorted(deltas) == [0.01, 0.05, 0.1]
    assert record(6, ok, "condition fails, inequality holds", "; ".join(parts))


def test_criterion_7_identity():
    reps = {n: S.run_identity(load_config(n)) for n in
            ("identity_square_cos", "identity_disk", "identity_square_polynomial", "identity_triangle_polynomial")}
    sq = reps["identity_square_cos"].breakdown
    q = (math.pi / 2) ** 4 / 4
    ok_sq = abs(sq.residual) < 1e-10 and abs(sq.term_mixed - q) <= 1e-10 and abs(sq.term_cross - q) <= 1e-10
    dk = reps["identity_disk"].breakdown
    ok_dk = (
        dk.quad_order == 8 and dk.h == 0.01
        and abs(dk.term_mixed - 4 * math.pi) <= 1e-6 * 4 * math.pi
        and abs(dk.term_cross) <= 1e-6 * 4 * math.pi
        and abs(dk.term_curv + 8 * math.pi) <= 1e-6 * 8 * math.pi
    )
    polys = [reps[n].breakdown for n in ("identity_square_polynomial", "identity_triangle_polynomial")]
    ok_poly = all(abs(b.residual) < 1e-9 for b in polys)
    ok = ok_sq and ok_dk and ok_poly and all(r.passed for r in reps.values())
    assert record(7, ok, "curvature integral identity",
                  f"square residual={sq.residual:.1e}; disk terms ({dk.term_mixed:.9f}, {dk.term_cross:.1e}, "
                  f"{dk.term_curv:.9f}); polygon residuals {[f'{b.residual:.1e}' for b in polys]}")


def test_criterion_8_subset_lattice():
    rep = S.run_inclusion(load_config("square_subset_lattice"))
    ok = len(rep.subsets) == 15 and rep.monotone and rep.strict
    # every strict inclusion of side subsets adds at least one full side
    n_pairs = sum(1 for a in rep.subsets for b in rep.subsets if set(a) < set(b))
    ok &= n_pairs == len(rep.pairs) == 3**4 - 2**4 - 15  # A < B, A nonempty
    smallest = min(p["gap"] for p in rep.pairs)
    assert record(8, ok, "discrete monotonicity over all 15 side subsets",
                  f"{len(rep.pairs)} inclusions on one mesh ({rep.n_dofs} vertices), smallest gap={smallest:.4g}")


def test_criterion_9_property_suites():
    rng = np.random.default_rng(20240601)
    # dense oracle on small meshes
    sq = S.square().boundary
    cases = [
        (sq, {1}, 0.2), (sq, {0, 1, 2, 3}, 0.15), (S.triangle(130, 0.4).boundary, {0}, 0.1),
        (S.circular_cap().boundary, {1}, 0.5), (S.trapezium(0.5).boundary, {2}, 0.1),
        (S.delta_quadrilateral(0.05).boundary, {3}, 0.6),
    ]
    dense_err = 0.0
    for b, D, h in cases:
        K, M, _ = assemble(generate(b, h), D)
        assert K.shape[0] <= 300
        lam = solve_smallest(K, M, 1e-10, inner="cg").eigenvalue
        w = sla.eigh(K.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
        dense_err = max(dense_err, abs(lam - w) / w)
    # scaling law on mapped meshes
    m = generate(S.triangle(120, 0.4).boundary, 0.15)
    K, M, _ = assemble(m, {1})
    base = solve_smallest(K, M, 1e-12, inner="lu").eigenvalue
    scale_err = 0.0
    for c in (0.1, 0.5, 3.0, 17.0):
        mm = m.moved(rotation=rng.uniform(0, 2 * math.pi), shift=rng.uniform(-5, 5, 2), scale=c)
        K, M, _ = assemble(mm, {1})
        scale_err = max(scale_err, abs(solve_smallest(K, M, 1e-12, inner="lu").eigenvalue * c * c / base - 1))
    # frame and curvature finite differences on sampled arcs
    arcs = [CircularArc((0.3, -0.2), 1.7, 0.2, 2.9), GraphArc([0, 0, 1], (0, 1)),
            GraphArc([0.1, -0.5, 0.8, 0.3], (0, 1.2), rotation=0.7, translation=(1, 2), reverse=True),
            Segment((0, 0), (2, 1))]
    fd_err, unit_err, eps = 0.0, 0.0, 1e-5
    for arc in arcs:
        for s in rng.uniform(0.05, 0.95, 20) * arc.length:
            f = frame_at(arc, s)
            unit_err = max(unit_err, abs(np.linalg.norm(f.tau) - 1), abs(np.linalg.norm(f.nu) - 1))
            d = (frame_at(arc, s + eps).tau - frame_at(arc, s - eps).tau) / (2 * eps)
            k = curvature_at(arc, s)
            fd_err = max(fd_err, abs(d @ f.nu - k) / (abs(k) + 1))
    n_pos = sum(q > 0 for q in _POSITIVITY)
    positive = n_pos == len(_POSITIVITY) if _POSITIVITY else None
    worst = min(_POSITIVITY, default=math.nan)
    ok = dense_err <= 1e-9 and scale_err <= 1e-12 and fd_err <= 1e-6 and unit_err <= 1e-12 and positive is not False
    assert record(9, ok, "property suites",
                  f"dense rel err={dense_err:.1e}; scaling rel err={scale_err:.1e}; "
                  f"ground states strictly positive on {n_pos}/{len(_POSITIVITY)} solves "
                  f"(worst min/max entry {worst:.1e}); fd curvature err={fd_err:.1e}")


if __name__ == "__main__":
    import sys

    failed = 0
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
