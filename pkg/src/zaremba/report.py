"""JSON, CSV and SVG output for scenario reports."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = ["SCHEMA_VERSION", "report_json", "report_csv", "report_svg", "emit_report"]

SCHEMA_VERSION = 1
FORMATS = ("json", "csv", "svg")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to ``None``."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def report_json(report) -> str:
    d = {"schema": SCHEMA_VERSION}
    d.update(report.to_dict())
    return json.dumps(_clean(d), indent=2, ensure_ascii=False) + "\n"


def report_csv(report) -> str:
    """RFC-4180 CSV (CRLF line ends, minimal quoting) of ``report.csv_rows()``."""
    rows = report.csv_rows()
    fields = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\r\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _csv_value(r.get(k, "")) for k in fields})
    return buf.getvalue()


def _csv_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# ---------------------------------------------------------------------------
# plots


def _figure(ncols: int):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "zaremba"
    plt.rcParams["svg.fonttype"] = "none"
    fig, axes = plt.subplots(1, ncols, figsize=(5.5 * ncols, 4.2), squeeze=False)
    return fig, axes[0]


def _plot_levels(ax, tables: dict):
    for label, tab in tables.items():
        h = [r.h for r in tab.levels]
        lam = [r.eigenvalue for r in tab.levels]
        line = ax.plot(h, lam, "o-", label=f"{label}")[0]
        if tab.extrapolation is not None:
            ax.axhline(tab.extrapolation.value, color=line.get_color(), ls="--", lw=0.8,
                       label=f"{label} extrapolated")
    ax.set_xscale("log")
    ax.set_xlabel("h")
    ax.set_ylabel("lowest eigenvalue")
    ax.legend(fontsize=8)


def _plot_profile(ax, profile):
    """t(s) along the remainder, with corner jumps marked (up-jumps in red)."""
    offset = 0.0
    ends = []
    for j, s, t in zip(profile.arcs, profile.s, profile.values):
        ax.plot(offset + s, t, "-", color="C0")
        ends.append(offset + s[-1])
        offset += s[-1]
    for c, x in zip(profile.corners, ends[:-1]):
        up = c["right"] - c["left"] > 1e-10
        color = "red" if up else "0.5"
        ax.axvline(x, color=color, ls=":", lw=1.0)
        ax.plot([x, x], [c["left"], c["right"]], color=color, lw=2.0 if up else 1.0,
                gid=f"{'up-jump' if up else 'jump'}-corner-{c['corner']}")
        ax.plot([x], [c["left"]], "o", mfc="white", color=color, ms=5)
        ax.plot([x], [c["right"]], "o", color=color, ms=5)
        if up:
            ax.annotate(f"up-jump at corner {c['corner']}", (x, c["right"]), textcoords="offset points",
                        xytext=(5, 8), color="red", fontsize=8)
    ax.set_xlabel("arclength from the end of Gamma")
    ax.set_ylabel("(b . tau)(b . nu)")


def report_svg(report) -> str:
    kind = report.to_dict().get("kind")
    if kind == "compare":
        fig, (a1, a2) = _figure(2)
        _plot_levels(a1, {"Gamma": report.gamma, "Gamma'": report.gamma_prime})
        a1.set_title(f"{report.name}: {report.verdict}", fontsize=9)
        if report.profile is not None:
            _plot_profile(a2, report.profile)
        a2.set_title(f"classification: {report.classification}", fontsize=9)
    elif kind == "check":
        fig, (a1,) = _figure(1)
        if report.profile is not None:
            _plot_profile(a1, report.profile)
        a1.set_title(f"{report.name}: {report.classification}", fontsize=9)
    elif kind == "inclusion" and hasattr(report, "subsets"):
        fig, (a1,) = _figure(1)
        names = ["{" + ",".join(map(str, a)) + "}" for a in report.subsets]
        a1.bar(range(len(names)), report.eigenvalues, color="C0")
        a1.set_xticks(range(len(names)), names, rotation=60, fontsize=7)
        a1.set_ylabel("lowest eigenvalue")
        a1.set_title(f"{report.name}: monotone={report.monotone}, strict={report.strict}", fontsize=9)
    elif kind in ("solve", "inclusion"):
        fig, (a1,) = _figure(1)
        tabs = {"Dirichlet set": report.table} if kind == "solve" else {
            "Gamma": report.gamma, "Gamma'": report.gamma_prime}
        _plot_levels(a1, tabs)
        a1.set_title(report.name, fontsize=9)
    elif kind == "sweep":
        fig, (a1,) = _figure(1)
        rows = report.csv_rows()
        colors = {"VERIFIED_STRICT": "C2", "EQUAL_WITHIN_TOL": "C0", "INCONCLUSIVE": "C1", "ERROR": "C3"}
        for r in rows:
            if r["verdict"] == "ERROR":
                a1.plot(r["index"], 1.0, "x", color=colors["ERROR"])
                continue
            a1.plot(r["index"], abs(r["margin"]), "o", color=colors.get(r["verdict"], "k"))
            a1.plot(r["index"], max(r["threshold"], 1e-300), "_", color="k", ms=12)
        a1.set_yscale("log")
        a1.set_xlabel("grid index")
        a1.set_ylabel("|margin| (dots) and threshold (bars)")
        a1.set_title(report.name, fontsize=9)
    elif kind == "identity":
        fig, (a1,) = _figure(1)
        b = report.breakdown
        names = ["mixed", "cross", "curv/2", "residual"]
        vals = [b.term_mixed, b.term_cross, 0.5 * b.term_curv, b.residual]
        a1.bar(names, vals, color=["C0", "C1", "C2", "C3"])
        a1.set_title(f"{report.name}: residual {b.residual:.3e}", fontsize=9)
    else:
        raise ValueError(f"no plot for report kind {kind!r}")
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    import matplotlib.pyplot as plt

    plt.close(fig)
    return buf.getvalue()


_RENDER = {"json": report_json, "csv": report_csv, "svg": report_svg}


def emit_report(report, fmt: str = "json", out_dir: Optional[str] = None, stem: Optional[str] = None) -> list:
    """Write ``report`` in each requested format.

    ``fmt`` may list several formats separated by commas. Without ``out_dir``
    the text goes to standard output. Returns the written paths.
    """
    fmts = [f.strip().lower() for f in str(fmt).split(",") if f.strip()]
    for f in fmts:
        if f not in FORMATS:
            raise ValueError(f"unknown format {f!r}; use one of {FORMATS}")
    stem = stem or getattr(report, "name", None) or "report"
    paths = []
    for f in fmts:
        text = _RENDER[f](report)
        if out_dir is None:
            sys.stdout.write(text)
            continue
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        p = d / f"{stem}.{f}"
        p.write_text(text, encoding="utf-8", newline="")
        paths.append(p)
    return paths
