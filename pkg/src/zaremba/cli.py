"""Command line entry point: ``zaremba <subcommand> --config FILE``.

Exit status is 0 when the run completed (and any ``--expect`` checks held),
2 when an expectation did not hold and 1 on errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import scenarios
from .report import FORMATS, emit_report

EXIT_OK, EXIT_ERROR, EXIT_MISMATCH = 0, 1, 2

RUNNERS = {
    "check": scenarios.run_check,
    "solve": scenarios.run_solve,
    "compare": scenarios.compare,
    "sweep": scenarios.run_sweep,
    "identity": scenarios.run_identity,
    "inclusion": scenarios.run_inclusion,
}

HELP = {
    "check": "validate the boundary and evaluate the geometric hypotheses",
    "solve": "lowest eigenvalue for the Dirichlet arcs in partition.gamma",
    "compare": "hypotheses plus eigenvalues for Gamma and Gamma' with a verdict",
    "sweep": "one comparison per grid point of a domain family",
    "identity": "curvature integral identity for a manufactured function",
    "inclusion": "monotonicity under enlargement of the Dirichlet set",
}


def _text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return "null" if v is None else str(v)


def outcomes(report) -> dict:
    """Checkable outcomes of a report as ``{key: [values]}`` (one value per sweep point)."""
    d = report.to_dict()
    kind = d["kind"]
    if kind == "sweep":
        out = {"verdict": [], "classification": [], "monotonicity": []}
        for p in report.points:
            r = p.get("report")
            out["verdict"].append(r.verdict if r else "ERROR")
            out["classification"].append(r.classification if r else "ERROR")
            mono = r.hypotheses.monotonicity.passed if r and r.hypotheses else None
            out["monotonicity"].append(_text(mono))
        return out
    if kind == "compare":
        mono = report.hypotheses.monotonicity if report.hypotheses else None
        return {
            "verdict": [report.verdict],
            "classification": [report.classification],
            "monotonicity": [_text(mono.passed if mono else None)],
            "violation": [";".join(sorted({v["kind"] for v in mono.violations})) if mono else ""],
        }
    if kind == "check":
        mono = report.hypotheses.monotonicity if report.hypotheses else None
        return {
            "classification": [report.classification],
            "valid": [_text(d["validation"]["accepted"])],
            "monotonicity": [_text(mono.passed if mono else None)],
            "violation": [";".join(sorted({v["kind"] for v in mono.violations})) if mono else ""],
        }
    if kind == "inclusion":
        return {"monotone": [_text(report.monotone)], "strict": [_text(report.strict)],
                "identical": [_text(report.identical)]}
    return {"pass": [_text(d.get("pass"))]}


def check_expectations(report, expected: dict) -> list:
    """Mismatch messages for ``expected`` (``{key: value}``) against the report."""
    got = outcomes(report)
    problems = []
    for key, want in expected.items():
        if key not in got:
            problems.append(f"{key}: not available for this report (have {sorted(got)})")
            continue
        want_s = _text(want)
        for i, g in enumerate(got[key]):
            if g.lower() != want_s.lower():
                where = f"[{i}]" if len(got[key]) > 1 else ""
                problems.append(f"{key}{where}: expected {want_s}, got {g}")
    return problems


def _parse_expect(tokens, config_expect: dict) -> Optional[dict]:
    if tokens is None:
        return None
    exp = dict(config_expect)
    for t in tokens:
        if "=" not in t:
            raise ValueError(f"--expect takes KEY=VALUE pairs, got {t!r}")
        k, v = t.split("=", 1)
        exp[k.strip()] = v.strip()
    if not exp:
        raise ValueError("--expect given but neither the command line nor the config names an expectation")
    return exp


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="zaremba",
        description="Verify eigenvalue inequalities for the mixed Dirichlet-Neumann Laplacian.",
    )
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        s = sub.add_parser(name, help=HELP[name])
        s.add_argument("--config", required=True, help="scenario JSON file or the name of a shipped config")
        s.add_argument("--out", help="output directory (default: standard output)")
        s.add_argument("--format", default="json", help=f"comma separated list from {', '.join(FORMATS)}")
        s.add_argument("--h0", type=float, help="initial mesh size")
        s.add_argument("--levels", type=int, help="number of mesh levels")
        s.add_argument("--tol", type=float, help="eigen solver tolerance")
        s.add_argument("--grading", choices=("on", "off"), help="corner grading of the meshes")
        s.add_argument("--expect", nargs="*", metavar="KEY=VALUE",
                       help="check outcomes; without pairs the config's 'expect' block is used")
    sub.add_parser("list", help="list the shipped scenario configs")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "list":
        for name in sorted(scenarios.builtin_configs()):
            print(name)
        return EXIT_OK
    try:
        cfg = scenarios.load_config(args.config)
        grading = None if args.grading is None else args.grading == "on"
        if any(v is not None for v in (args.h0, args.levels, args.tol, grading)):
            cfg = cfg.with_overrides(h0=args.h0, levels=args.levels, tol=args.tol, grading=grading)
        expected = _parse_expect(args.expect, cfg.expect)
        report = RUNNERS[args.command](cfg)
        paths = emit_report(report, args.format, args.out, cfg.name)
        for path in paths:
            print(path, file=sys.stderr)
    except Exception as e:  # noqa: BLE001 - every failure maps to exit status 1
        logging.getLogger("zaremba").debug("failure", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    if expected:
        problems = check_expectations(report, expected)
        if problems:
            for msg in problems:
                print(f"expectation mismatch: {msg}", file=sys.stderr)
            return EXIT_MISMATCH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
