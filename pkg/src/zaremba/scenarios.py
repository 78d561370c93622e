"""Scenario configs, domain families and the comparison / sweep / inclusion runners."""

from __future__ import annotations

import copy
import itertools
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .fem import EigenResult, Extrapolation, assemble, extrapolate, solve_levels, solve_smallest
from .geometry import CircularArc, DomainBoundary, Segment, validate
from .hypotheses import (
    BoundaryPartition,
    Classification,
    HypothesisReport,
    check_hypotheses,
    monotonicity_profile,
)
from .identity import ManufacturedFunction, identity_residual
from .mesh import Grading, mesh_family

logger = logging.getLogger(__name__)

__all__ = [
    "Domain",
    "SolverConfig",
    "ScenarioConfig",
    "EigenTable",
    "ComparisonReport",
    "InclusionReport",
    "SweepReport",
    "verdict",
    "build_domain",
    "load_config",
    "builtin_configs",
    "compare",
    "run_sweep",
    "run_inclusion",
    "run_lattice",
    "run_identity",
    "run_check",
    "run_solve",
    "VERIFIED_STRICT",
    "EQUAL_WITHIN_TOL",
    "INCONCLUSIVE",
]

VERIFIED_STRICT = "VERIFIED_STRICT"
EQUAL_WITHIN_TOL = "EQUAL_WITHIN_TOL"
INCONCLUSIVE = "INCONCLUSIVE"
VERDICT_FACTOR = 3.0
KINDS = ("compare", "sweep", "identity", "inclusion", "check", "solve")


# ---------------------------------------------------------------------------
# domain families


@dataclass
class Domain:
    """A boundary together with optional names for its arcs."""

    boundary: DomainBoundary
    labels: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def arc_id(self, ref) -> int:
        if isinstance(ref, str):
            if ref not in self.labels:
                raise ValueError(f"unknown arc label {ref!r}; known: {sorted(self.labels)}")
            return self.labels[ref]
        j = int(ref)
        if not 0 <= j < len(self.boundary.arcs):
            raise ValueError(f"arc id {j} out of range")
        return j


def triangle(largest_angle: float = None, split: float = 0.5, angles=None) -> Domain:
    """Triangle with longest side ``L`` from (0, 0) to (1, 0).

    Give either the angles at the two ends of ``L`` (degrees) or the largest
    angle together with the fraction of the remaining angle taken at (0, 0).
    Arc labels: ``L``, ``S`` (shortest side) and ``M`` (middle side).
    """
    if angles is None:
        if largest_angle is None:
            raise ValueError("triangle needs 'angles' or 'largest_angle'")
        rest = 180.0 - float(largest_angle)
        angles = (rest * split, rest * (1.0 - split))
    a, b = (math.radians(float(x)) for x in angles)
    c = math.pi - a - b
    if not (a > 0 and b > 0 and c > 0):
        raise ValueError(f"invalid triangle angles {angles}")
    if c < max(a, b):
        raise ValueError("the angle opposite L must be the largest")
    ac = math.sin(b) / math.sin(c)
    C = (ac * math.cos(a), ac * math.sin(a))
    bd = DomainBoundary.polygon([(0.0, 0.0), (1.0, 0.0), C])
    # arc 1 = BC has length sin(a)/sin(c), arc 2 = CA has length sin(b)/sin(c)
    s, m = (1, 2) if a <= b else (2, 1)
    return Domain(bd, {"L": 0, "S": s, "M": m}, {"angles_deg": [math.degrees(a), math.degrees(b), math.degrees(c)]})


def trapezium(ratio: float, base_angle: float = 60.0, second_angle: float = None) -> Domain:
    """Acute trapezium with longer base ``L`` = [0, 1] x {0} and shorter base ratio ``ratio``.

    The base angles at the longer base are ``base_angle`` (left) and
    ``second_angle`` (right, defaults to ``base_angle``), in degrees.
    """
    ratio = float(ratio)
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    a1 = math.radians(base_angle)
    a2 = math.radians(second_angle if second_angle is not None else base_angle)
    if not (0 < a1 < math.pi / 2 and 0 < a2 < math.pi / 2):
        raise ValueError("base angles must be acute")
    # top length = 1 - H (cot a1 + cot a2) = ratio
    H = (1.0 - ratio) / (1 / math.tan(a1) + 1 / math.tan(a2))
    x0 = H / math.tan(a1)
    pts = [(0.0, 0.0), (1.0, 0.0), (x0 + ratio, H), (x0, H)]
    return Domain(DomainBoundary.polygon(pts), {"L": 0, "right": 1, "S": 2, "left": 3}, {"height": H})


def delta_quadrilateral(delta: float, scale: float = 1.0) -> Domain:
    """Quadrilateral with a slope -1 side followed by a slope -tan(pi/4 - delta) side.

    Corners ``P0 = (0, 2.5)``, ``P1 = (0, 0)``, ``P2 = (1.8, -1.8)`` and ``P3``;
    ``Gamma'`` = P0P1 (label ``gamma_prime``), ``Gamma`` = P3P0 (label ``gamma``).
    The angle at P2 is ``pi - delta``.
    """
    delta = float(delta)
    if not 0 < delta < math.pi / 4:
        raise ValueError("delta must lie in (0, pi/4)")
    P0, P1, P2 = np.array([0.0, 2.5]), np.array([0.0, 0.0]), np.array([1.8, -1.8])
    th = -(math.pi / 4 - delta)
    P3 = P2 + 3.8 * np.array([math.cos(th), math.sin(th)])
    pts = [p * scale for p in (P0, P1, P2, P3)]
    return Domain(
        DomainBoundary.polygon(pts),
        {"gamma_prime": 0, "sigma2": 1, "sigma3": 2, "gamma": 3},
        {"P2_corner": 2},
    )


def rectangle(width: float = 2.0, height: float = 1.0) -> Domain:
    bd = DomainBoundary.polygon([(0, 0), (width, 0), (width, height), (0, height)])
    return Domain(bd, {"bottom": 0, "right": 1, "top": 2, "left": 3})


def square(side: float = 1.0) -> Domain:
    return rectangle(side, side)


def circular_cap(half_angle: float = None, chord: float = 4.0) -> Domain:
    """Circular segment cut off by a vertical chord, bulging to the right.

    The chord (label ``chord``) runs downward from ``(0, chord/2)``; the arc
    (label ``arc``) returns counterclockwise around ``(-R cos a, 0)`` with
    ``R = chord / (2 sin a)``. Both interior angles at the chord ends equal
    the half opening angle ``a`` (radians, default ``atan(2)``).
    """
    if half_angle is None:
        half_angle = math.atan2(2.0, 1.0)
    a = float(half_angle)
    if not 0 < a < math.pi:
        raise ValueError("half_angle must lie in (0, pi)")
    R = chord / 2 / math.sin(a)
    arc = CircularArc((-R * math.cos(a), 0.0), R, -a, a)
    bd = DomainBoundary([Segment((0.0, chord / 2), (0.0, -chord / 2)), arc])
    return Domain(bd, {"chord": 0, "arc": 1})


def disk(radius: float = 1.0) -> Domain:
    return Domain(DomainBoundary([CircularArc((0.0, 0.0), radius, 0.0, 2 * math.pi)]), {"circle": 0})


FAMILIES = {
    "triangle": triangle,
    "trapezium": trapezium,
    "delta_quadrilateral": delta_quadrilateral,
    "rectangle": rectangle,
    "square": square,
    "circular_cap": circular_cap,
    "disk": disk,
}


def build_domain(spec: dict) -> Domain:
    """Domain from a config block: ``{"family": name, "params": {...}}`` or explicit arcs."""
    if "family" in spec:
        name = spec["family"]
        if name not in FAMILIES:
            raise ValueError(f"unknown domain family {name!r}; known: {sorted(FAMILIES)}")
        dom = FAMILIES[name](**spec.get("params", {}))
    else:
        dom = Domain(DomainBoundary.from_dict(spec))
    dom.labels.update(spec.get("labels", {}))
    return dom


# ---------------------------------------------------------------------------
# configs


@dataclass
class SolverConfig:
    h0: float = 0.1
    levels: int = 4
    tol: float = 1e-10
    grading: bool = True
    grading_factor: float = 0.15
    grading_levels: int = 3
    inner: str = "lu"
    h0_relative: bool = False

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("solver.h0 must be positive")
        if int(self.levels) < 1:
            raise ValueError("solver.levels must be at least 1")
        if not self.tol > 0:
            raise ValueError("solver.tol must be positive")
        if not 0 < self.grading_factor < 1:
            raise ValueError("solver.grading_factor must lie in (0, 1)")
        self.levels = int(self.levels)

    def mesh_size(self, boundary: DomainBoundary) -> float:
        """``h0``, or ``h0`` times the inradius-like width ``2 * area / perimeter``."""
        if self.h0_relative:
            return self.h0 * 2 * boundary.signed_area / boundary.perimeter
        return self.h0


@dataclass
class ScenarioConfig:
    """Parsed scenario file; see the README for the JSON layout."""

    kind: str
    name: str
    domain: dict
    gamma: list = field(default_factory=list)
    gamma_prime: list = field(default_factory=list)
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: Optional[dict] = None
    identity: Optional[dict] = None
    reference: Optional[dict] = None
    symmetric: Optional[bool] = None
    expect: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        kind = d.get("kind", "compare")
        if kind not in KINDS:
            raise ValueError(f"scenario kind must be one of {KINDS}, got {kind!r}")
        if "domain" not in d:
            raise ValueError("config needs a 'domain' block")
        part = d.get("partition", {})

        def ids(v):
            if v is None:
                return []
            return list(v) if isinstance(v, (list, tuple)) else [v]

        cfg = cls(
            kind=kind,
            name=d.get("name", kind),
            domain=d["domain"],
            gamma=ids(part.get("gamma")),
            gamma_prime=ids(part.get("gamma_prime")),
            solver=SolverConfig(**d.get("solver", {})),
            sweep=d.get("sweep"),
            identity=d.get("identity"),
            reference=d.get("reference"),
            symmetric=d.get("symmetric"),
            expect=d.get("expect", {}),
            raw=copy.deepcopy(d),
        )
        if kind == "sweep" and not cfg.sweep:
            raise ValueError("sweep scenario needs a non-empty 'sweep' block")
        lattice = kind == "inclusion" and d.get("inclusion", {}).get("lattice")
        if kind in ("compare", "inclusion") and not lattice and (not cfg.gamma or not cfg.gamma_prime):
            raise ValueError(f"{kind} scenario needs partition.gamma and partition.gamma_prime")
        if kind == "compare" and len(cfg.gamma_prime) != 1:
            raise ValueError("partition.gamma_prime must name a single arc for a comparison")
        # references must resolve (sweeps are resolved per grid point)
        if kind != "sweep":
            dom = build_domain(cfg.domain)
            for r in cfg.gamma + cfg.gamma_prime:
                dom.arc_id(r)
        return cfg

    def with_overrides(self, **kw) -> "ScenarioConfig":
        d = copy.deepcopy(self.raw)
        s = d.setdefault("solver", {})
        for k, v in kw.items():
            if v is not None:
                s[k] = v
        return ScenarioConfig.from_dict(d)


def builtin_configs() -> dict:
    """Shipped scenario files by name."""
    root = resources.files("zaremba") / "configs"
    return {p.name[:-5]: p for p in root.iterdir() if p.name.endswith(".json")}


def load_config(path) -> ScenarioConfig:
    """Load a scenario from a path or the name of a shipped config."""
    p = Path(path)
    if p.exists():
        text = p.read_text(encoding="utf-8")
    else:
        shipped = builtin_configs()
        name = str(path).removeprefix("builtin:")
        if name not in shipped:
            raise FileNotFoundError(f"no config file {path!r} and no shipped config of that name")
        text = shipped[name].read_text(encoding="utf-8")
    return ScenarioConfig.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# eigenvalue tables


@dataclass
class EigenTable:
    """Eigenvalues on every level for one Dirichlet set, plus the extrapolation."""

    dirichlet: list
    levels: list
    extrapolation: Optional[Extrapolation]
    positive: bool

    @property
    def value(self) -> float:
        return self.extrapolation.value if self.extrapolation else self.levels[-1].eigenvalue

    @property
    def error(self) -> float:
        return self.extrapolation.error if self.extrapolation else math.inf

    def to_dict(self) -> dict:
        return {
            "dirichlet_arcs": list(self.dirichlet),
            "levels": [r.to_dict() for r in self.levels],
            "extrapolation": self.extrapolation.to_dict() if self.extrapolation else None,
            "ground_state_positive": self.positive,
        }


def _positive(r: EigenResult) -> bool:
    v = r.vector
    return bool(v.min() >= -1e-8 * np.abs(v).max())


def eigen_table(meshes, dirichlet, solver: SolverConfig) -> EigenTable:
    res = solve_levels(meshes, dirichlet, solver.tol, inner=solver.inner)
    ext = extrapolate(res) if len(res) >= 3 else None
    return EigenTable(sorted(dirichlet), res, ext, all(_positive(r) for r in res))


def _transition_corners(n: int, *sets) -> list:
    out = set()
    for d in sets:
        d = set(d)
        for c in range(n):
            if ((c - 1) % n in d) != (c in d):
                out.add(c)
    return sorted(out)


def _meshes(dom: Domain, solver: SolverConfig, *dirichlet_sets):
    bd = dom.boundary
    grading = None
    if solver.grading:
        corners = _transition_corners(len(bd.arcs), *dirichlet_sets)
        if corners:
            grading = Grading(tuple(corners), solver.grading_factor, solver.grading_levels)
    return mesh_family(bd, solver.mesh_size(bd), solver.levels, grading)


def verdict(margin: float, err_gamma: float, err_gamma_prime: float, symmetric: bool) -> str:
    """Strict if the margin exceeds three times the combined error estimate."""
    bound = VERDICT_FACTOR * (err_gamma + err_gamma_prime)
    if margin > bound:
        return VERIFIED_STRICT
    if abs(margin) <= bound and symmetric:
        return EQUAL_WITHIN_TOL
    return INCONCLUSIVE


# ---------------------------------------------------------------------------
# reports


@dataclass
class ComparisonReport:
    name: str
    params: dict
    hypotheses: Optional[HypothesisReport]
    hypothesis_error: Optional[str]
    gamma: EigenTable
    gamma_prime: EigenTable
    margin: float
    threshold: float
    verdict: str
    symmetric: bool
    level_margins: list
    level_h: list
    elapsed: float = 0.0
    profile: object = None
    boundary: object = None

    @property
    def classification(self) -> str:
        return self.hypotheses.classification.value if self.hypotheses else Classification.NONE.value

    def to_dict(self) -> dict:
        return {
            "kind": "compare",
            "name": self.name,
            "params": self.params,
            "hypotheses": self.hypotheses.to_dict() if self.hypotheses else None,
            "hypothesis_error": self.hypothesis_error,
            "classification": self.classification,
            "eigenvalues": {"gamma": self.gamma.to_dict(), "gamma_prime": self.gamma_prime.to_dict()},
            "margin": self.margin,
            "threshold": self.threshold,
            "verdict": self.verdict,
            "symmetric": self.symmetric,
            "level_margins": [{"h": h, "margin": m} for h, m in zip(self.level_h, self.level_margins)],
            "timing": {"elapsed_s": self.elapsed},
        }

    def csv_rows(self) -> list:
        rows = []
        for k, (a, b) in enumerate(zip(self.gamma.levels, self.gamma_prime.levels)):
            rows.append(
                {"level": k, "h": a.h, "n_dofs": a.n_dofs, "lambda_gamma": a.eigenvalue,
                 "lambda_gamma_prime": b.eigenvalue, "margin": a.eigenvalue - b.eigenvalue}
            )
        rows.append(
            {"level": "extrapolated", "h": 0.0, "n_dofs": "", "lambda_gamma": self.gamma.value,
             "lambda_gamma_prime": self.gamma_prime.value, "margin": self.margin}
        )
        return rows


SWEEP_COLUMNS = [
    "index", "pair", "params", "classification", "lambda_gamma", "err_gamma", "lambda_gamma_prime",
    "err_gamma_prime", "margin", "threshold", "verdict", "monotonicity_pass", "violation_kinds", "error",
]


@dataclass
class SweepReport:
    name: str
    points: list  # dicts: index, params, pair, report or error

    def to_dict(self) -> dict:
        out = []
        for p in self.points:
            d = {"index": p["index"], "params": p["params"], "pair": p["pair"]}
            if p.get("report") is not None:
                d["report"] = p["report"].to_dict()
            else:
                d["error"] = p["error"]
            out.append(d)
        return {"kind": "sweep", "name": self.name, "points": out}

    @property
    def verdicts(self) -> list:
        return [p["report"].verdict if p.get("report") else "ERROR" for p in self.points]

    def csv_rows(self) -> list:
        rows = []
        for p in self.points:
            r = p.get("report")
            row = {c: "" for c in SWEEP_COLUMNS}
            row.update(index=p["index"], pair="/".join(map(str, p["pair"])), params=json.dumps(p["params"], sort_keys=True))
            if r is None:
                row.update(verdict="ERROR", error=p["error"])
            else:
                mono = r.hypotheses.monotonicity if r.hypotheses else None
                row.update(
                    classification=r.classification,
                    lambda_gamma=r.gamma.value, err_gamma=r.gamma.error,
                    lambda_gamma_prime=r.gamma_prime.value, err_gamma_prime=r.gamma_prime.error,
                    margin=r.margin, threshold=r.threshold, verdict=r.verdict,
                    monotonicity_pass="" if mono is None else mono.passed,
                    violation_kinds="" if mono is None else ";".join(v["kind"] for v in mono.violations),
                )
            rows.append(row)
        return rows


@dataclass
class InclusionReport:
    name: str
    gamma: EigenTable
    gamma_prime: EigenTable
    level_gaps: list
    monotone: bool
    strict_expected: bool
    strict: Optional[bool]
    identical: bool
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "inclusion",
            "name": self.name,
            "eigenvalues": {"gamma": self.gamma.to_dict(), "gamma_prime": self.gamma_prime.to_dict()},
            "level_gaps": self.level_gaps,
            "monotone_every_level": self.monotone,
            "identical": self.identical,
            "strict_expected": self.strict_expected,
            "strict": self.strict,
            "timing": {"elapsed_s": self.elapsed},
        }

    def csv_rows(self) -> list:
        return [
            {"level": k, "h": a.h, "lambda_gamma": a.eigenvalue, "lambda_gamma_prime": b.eigenvalue, "gap": g}
            for k, (a, b, g) in enumerate(zip(self.gamma.levels, self.gamma_prime.levels, self.level_gaps))
        ]


# ---------------------------------------------------------------------------
# runners


def _partition(dom: Domain, gamma, gamma_prime):
    g = [dom.arc_id(r) for r in gamma]
    gp = dom.arc_id(gamma_prime[0] if isinstance(gamma_prime, (list, tuple)) else gamma_prime)
    return g, gp


def compare_domain(dom: Domain, gamma, gamma_prime, solver: SolverConfig, name: str = "",
                   symmetric: Optional[bool] = None) -> ComparisonReport:
    """Hypotheses plus both eigenvalue problems on one mesh family."""
    t0 = time.perf_counter()
    g, gp = _partition(dom, gamma, gamma_prime)
    bd = dom.boundary
    hyp, herr, profile = None, None, None
    try:
        part = BoundaryPartition.from_arcs(bd, g, gp)
        hyp = check_hypotheses(bd, part)
        profile = monotonicity_profile(bd, part)
    except ValueError as e:
        herr = str(e)
    meshes = _meshes(dom, solver, g, [gp])
    tg = eigen_table(meshes, g, solver)
    tgp = eigen_table(meshes, [gp], solver)
    sym = bool(symmetric) if symmetric is not None else bool(hyp is not None and hyp.symmetric)
    margin = tg.value - tgp.value
    thr = VERDICT_FACTOR * (tg.error + tgp.error)
    v = verdict(margin, tg.error, tgp.error, sym)
    lm = [a.eigenvalue - b.eigenvalue for a, b in zip(tg.levels, tgp.levels)]
    return ComparisonReport(
        name=name, params=dict(dom.params), hypotheses=hyp, hypothesis_error=herr,
        gamma=tg, gamma_prime=tgp, margin=margin, threshold=thr, verdict=v, symmetric=sym,
        level_margins=lm, level_h=[r.h for r in tg.levels], elapsed=time.perf_counter() - t0,
        profile=profile, boundary=bd,
    )


def compare(config: ScenarioConfig) -> ComparisonReport:
    dom = build_domain(config.domain)
    return compare_domain(dom, config.gamma, config.gamma_prime, config.solver, config.name, config.symmetric)


def _grid(sweep: dict) -> list:
    if "points" in sweep:
        return [dict(p) for p in sweep["points"]]
    grid = sweep.get("grid", {})
    if not grid:
        raise ValueError("sweep needs 'points' or a non-empty 'grid'")
    keys = list(grid)
    fixed = sweep.get("fixed", {})
    return [dict(fixed, **dict(zip(keys, vals))) for vals in itertools.product(*(grid[k] for k in keys))]


def _sweep_point(args):
    index, family, params, pair, solver, base_labels = args
    try:
        dom = build_domain({"family": family, "params": params, "labels": base_labels})
        rep = compare_domain(dom, [pair[0]], [pair[1]], solver, name=f"{family}#{index}")
        return {"index": index, "params": params, "pair": list(pair), "report": rep}
    except Exception as e:  # recorded per point, the sweep continues
        logger.warning("sweep point %d failed: %s", index, e)
        return {"index": index, "params": params, "pair": list(pair), "report": None, "error": f"{type(e).__name__}: {e}"}


def max_workers() -> int:
    """Worker cap from ``ZAREMBA_THREADS`` (default 1, i.e. serial)."""
    try:
        return max(1, int(os.environ.get("ZAREMBA_THREADS", "1")))
    except ValueError:
        return 1


def run_sweep(config: ScenarioConfig) -> SweepReport:
    """One comparison per grid point and Gamma/Gamma' pair; output ordered by grid index."""
    sw = config.sweep
    family = sw.get("family", config.domain.get("family"))
    if family is None:
        raise ValueError("sweep needs a domain family")
    base = dict(config.domain.get("params", {}))
    pairs = sw.get("pairs") or [[config.gamma[0], config.gamma_prime[0]]]
    grid = _grid(sw)
    if not grid:
        raise ValueError("sweep grid is empty")
    jobs = []
    for params in grid:
        for pair in pairs:
            jobs.append((len(jobs), family, dict(base, **params), tuple(pair), config.solver,
                         config.domain.get("labels", {})))
    n = min(max_workers(), len(jobs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as ex:
            points = list(ex.map(_sweep_point, jobs))
    else:
        points = [_sweep_point(j) for j in jobs]
    points.sort(key=lambda p: p["index"])
    return SweepReport(config.name, points)


@dataclass
class LatticeReport:
    """Eigenvalues for every nonempty subset of arcs on one fixed mesh."""

    name: str
    subsets: list
    eigenvalues: list
    pairs: list
    monotone: bool
    strict: bool
    n_dofs: int
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kind": "inclusion",
            "name": self.name,
            "lattice": [{"dirichlet_arcs": list(a), "lambda": lam} for a, lam in zip(self.subsets, self.eigenvalues)],
            "pairs_checked": len(self.pairs),
            "violations": [p for p in self.pairs if not p["ok"]],
            "monotone_every_level": self.monotone,
            "strict": self.strict,
            "identical": False,
            "n_dofs": self.n_dofs,
            "timing": {"elapsed_s": self.elapsed},
        }

    def csv_rows(self) -> list:
        return [{"dirichlet_arcs": " ".join(map(str, a)), "lambda": lam}
                for a, lam in zip(self.subsets, self.eigenvalues)]

    # for the expectation checks in the CLI
    @property
    def identical(self) -> bool:
        return False


def run_lattice(dom: Domain, solver: SolverConfig, name: str = "", mesh=None) -> LatticeReport:
    """All nonempty Dirichlet subsets on one ungraded mesh; every strict inclusion is checked.

    Enlarging the Dirichlet set shrinks the discrete space, so the discrete
    eigenvalue cannot decrease; it must increase strictly when a whole arc is
    added.
    """
    t0 = time.perf_counter()
    n = len(dom.boundary.arcs)
    if mesh is None:
        mesh = mesh_family(dom.boundary, solver.mesh_size(dom.boundary), 1)[0]
    subsets = [tuple(c) for k in range(1, n + 1) for c in itertools.combinations(range(n), k)]
    lams = []
    for a in subsets:
        K, M, _ = assemble(mesh, a)
        lams.append(solve_smallest(K, M, solver.tol, inner=solver.inner).eigenvalue)
    pairs = []
    for i, a in enumerate(subsets):
        for j, b in enumerate(subsets):
            if set(a) < set(b):
                gap = lams[j] - lams[i]
                slack = 1e-10 * lams[j]
                pairs.append({"smaller": list(a), "larger": list(b), "gap": gap,
                              "ok": bool(gap > slack), "monotone": bool(gap >= -slack)})
    monotone = all(p["monotone"] for p in pairs)
    strict = all(p["ok"] for p in pairs)
    return LatticeReport(name, subsets, lams, pairs, monotone, strict, int(mesh.n_vertices),
                         time.perf_counter() - t0)


def run_inclusion(config: ScenarioConfig):
    """Check lambda(Gamma') <= lambda(Gamma) on every level for Gamma' contained in Gamma.

    With ``"inclusion": {"lattice": true}`` in the config every nonempty subset
    of arcs is solved on one mesh instead (see :func:`run_lattice`).
    """
    t0 = time.perf_counter()
    dom = build_domain(config.domain)
    if config.raw.get("inclusion", {}).get("lattice"):
        return run_lattice(dom, config.solver, config.name)
    g = sorted({dom.arc_id(r) for r in config.gamma})
    gp = sorted({dom.arc_id(r) for r in config.gamma_prime})
    if not set(gp) <= set(g):
        raise ValueError("inclusion scenario needs gamma_prime to be a subset of gamma")
    meshes = _meshes(dom, config.solver, g, gp)
    tg = eigen_table(meshes, g, config.solver)
    tgp = tg if gp == g else eigen_table(meshes, gp, config.solver)
    gaps = [a.eigenvalue - b.eigenvalue for a, b in zip(tg.levels, tgp.levels)]
    slack = [1e-10 * a.eigenvalue for a in tg.levels]
    monotone = all(x >= -s for x, s in zip(gaps, slack))
    strict_expected = len(g) > len(gp)
    strict = None
    if tg.extrapolation is not None:
        margin = tg.value - tgp.value
        strict = bool(margin > VERDICT_FACTOR * (tg.error + tgp.error))
    return InclusionReport(config.name, tg, tgp, gaps, monotone, strict_expected, strict, gp == g,
                           time.perf_counter() - t0)


@dataclass
class CheckReport:
    name: str
    validation: dict
    hypotheses: Optional[HypothesisReport]
    hypothesis_error: Optional[str]
    profile: object = None
    boundary: object = None

    @property
    def classification(self) -> str:
        return self.hypotheses.classification.value if self.hypotheses else Classification.NONE.value

    def to_dict(self) -> dict:
        d = {"kind": "check", "name": self.name, "validation": self.validation,
             "hypotheses": self.hypotheses.to_dict() if self.hypotheses else None,
             "hypothesis_error": self.hypothesis_error, "classification": self.classification}
        if self.profile is not None:
            d["profile"] = self.profile.to_dict()
        return d

    def csv_rows(self) -> list:
        rows = []
        if self.profile is None:
            return rows
        for j, s, t in zip(self.profile.arcs, self.profile.s, self.profile.values):
            rows.extend({"arc": j, "s": float(a), "t": float(b)} for a, b in zip(s, t))
        return rows


def run_check(config: ScenarioConfig) -> CheckReport:
    dom = build_domain(config.domain)
    bd = dom.boundary
    rep = validate(bd)
    hyp, herr, prof = None, None, None
    if rep.accepted and config.gamma and config.gamma_prime:
        try:
            g, gp = _partition(dom, config.gamma, config.gamma_prime)
            part = BoundaryPartition.from_arcs(bd, g, gp)
            hyp = check_hypotheses(bd, part)
            prof = monotonicity_profile(bd, part)
        except ValueError as e:
            herr = str(e)
    return CheckReport(config.name, rep.to_dict(), hyp, herr, prof, bd)


@dataclass
class SolveReport:
    name: str
    table: EigenTable
    reference: Optional[float]
    rtol: Optional[float]
    elapsed: float = 0.0

    @property
    def relative_error(self) -> Optional[float]:
        if self.reference is None:
            return None
        return abs(self.table.value - self.reference) / abs(self.reference)

    @property
    def passed(self) -> Optional[bool]:
        if self.reference is None or self.rtol is None:
            return None
        return bool(self.relative_error <= self.rtol)

    def to_dict(self) -> dict:
        return {"kind": "solve", "name": self.name, "eigenvalues": self.table.to_dict(),
                "lambda_inf": self.table.value, "reference": self.reference, "rtol": self.rtol,
                "relative_error": self.relative_error, "pass": self.passed,
                "timing": {"elapsed_s": self.elapsed}}

    def csv_rows(self) -> list:
        rows = [{"level": k, "h": r.h, "n_dofs": r.n_dofs, "lambda": r.eigenvalue, "residual": r.residual}
                for k, r in enumerate(self.table.levels)]
        rows.append({"level": "extrapolated", "h": 0.0, "n_dofs": "", "lambda": self.table.value,
                     "residual": ""})
        return rows


_CONSTANTS = {"pi": math.pi}


def _number(v):
    """Float or a small arithmetic expression in ``pi`` (e.g. ``"pi**2/16"``)."""
    if v is None or isinstance(v, (int, float)):
        return v
    import ast
    import operator as op

    ops = {ast.Add: op.add, ast.Sub: op.sub, ast.Mult: op.mul, ast.Div: op.truediv, ast.Pow: op.pow,
           ast.USub: op.neg}

    def ev(n):
        if isinstance(n, ast.Constant) and isinstance(n.value, (int, float)):
            return n.value
        if isinstance(n, ast.Name) and n.id in _CONSTANTS:
            return _CONSTANTS[n.id]
        if isinstance(n, ast.BinOp) and type(n.op) in ops:
            return ops[type(n.op)](ev(n.left), ev(n.right))
        if isinstance(n, ast.UnaryOp) and type(n.op) in ops:
            return ops[type(n.op)](ev(n.operand))
        raise ValueError(f"unsupported expression {v!r}")

    return float(ev(ast.parse(str(v), mode="eval").body))


def run_solve(config: ScenarioConfig) -> SolveReport:
    """Lowest eigenvalue with Dirichlet data on ``partition.gamma`` over all levels."""
    t0 = time.perf_counter()
    dom = build_domain(config.domain)
    g = sorted({dom.arc_id(r) for r in config.gamma})
    if not g:
        raise ValueError("solve needs a non-empty partition.gamma (the Dirichlet arcs)")
    meshes = _meshes(dom, config.solver, g)
    tab = eigen_table(meshes, g, config.solver)
    ref = config.reference or {}
    return SolveReport(config.name, tab, _number(ref.get("lambda")), ref.get("rtol"), time.perf_counter() - t0)


@dataclass
class IdentityReport:
    name: str
    breakdown: object
    expected: dict
    tolerance: Optional[float]
    passed: Optional[bool]

    def to_dict(self) -> dict:
        return {"kind": "identity", "name": self.name, "breakdown": self.breakdown.to_dict(),
                "expected": self.expected, "tolerance": self.tolerance, "pass": self.passed}

    def csv_rows(self) -> list:
        return [self.breakdown.to_dict() | {"membership": None}]


def run_identity(config: ScenarioConfig) -> IdentityReport:
    """Evaluate the curvature identity for the configured manufactured function.

    ``identity`` block keys: ``function`` (preset name or terms), ``quad_order``,
    ``h``, ``labels`` (per-arc dirichlet/neumann), ``curved``, ``expected``
    (term values, numbers or expressions in ``pi``) and ``rtol``/``atol``.
    """
    ib = config.identity or {}
    dom = build_domain(config.domain)
    fspec = ib.get("function", {})
    f = ManufacturedFunction.from_dict(fspec if isinstance(fspec, dict) else {"preset": fspec})
    br = identity_residual(dom.boundary, f, int(ib.get("quad_order", 8)), ib.get("h"),
                           curved=ib.get("curved", True), arc_labels=ib.get("labels"))
    expected = {k: _number(v) for k, v in ib.get("expected", {}).items()}
    rtol, atol = ib.get("rtol"), ib.get("atol")
    ok = True
    checked = False
    for k, v in expected.items():
        got = getattr(br, k)
        tol = (rtol or 0.0) * abs(v) + (atol or 0.0)
        if rtol is not None or atol is not None:
            checked = True
            ok &= abs(got - v) <= tol
    if "residual" not in expected and atol is not None:
        checked = True
        ok &= abs(br.residual) <= atol
    if br.membership is not None:
        checked = True
        ok &= br.membership.passed
    return IdentityReport(config.name, br, expected, rtol if rtol is not None else atol,
                          bool(ok) if checked else None)
