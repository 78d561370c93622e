"""Geometric hypotheses for comparing two Dirichlet portions of a convex boundary.

Given a boundary, a connected Dirichlet portion ``gamma`` and a straight segment
``gamma_prime`` disjoint from it, the lowest eigenvalue with Dirichlet data on
``gamma_prime`` is strictly below the one with Dirichlet data on ``gamma`` if

* the interior angles at both end points of ``gamma`` are strictly acute, and
* either ``gamma`` and ``gamma_prime`` together make up the whole boundary
  (complementary case), or the function ``t = (b . tau)(b . nu)`` is
  non-increasing along the rest of the boundary in positive orientation, where
  ``b`` is the outward normal of ``gamma_prime``. At a corner this means the
  left limit is at least the right limit.

Along an arc ``dt/ds = kappa * ((b . nu)**2 - (b . tau)**2)`` since
``tau' = kappa nu`` and ``nu' = -kappa tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .geometry import DomainBoundary, Segment, frame_at

__all__ = [
    "Classification",
    "BoundaryPartition",
    "MonotonicityProfile",
    "MonotonicityCheck",
    "HypothesisReport",
    "normal_of_gamma_prime",
    "monotonicity_profile",
    "check_monotonicity",
    "check_hypotheses",
    "profile_slopes_fd",
    "symmetric_pair",
]

TOL_ANGLE = 1e-9
TOL_MONO = 1e-10


class Classification(str, Enum):
    COMPLEMENTARY = "complementary"
    MONOTONE_REMAINDER = "monotone_remainder"
    NONE = "none"


def _runs(ids: set, n: int) -> list:
    """Maximal cyclic runs of consecutive arc ids."""
    if len(ids) == n:
        return [list(range(n))]
    starts = [j for j in sorted(ids) if (j - 1) % n not in ids]
    runs = []
    for s in starts:
        run = [s]
        while (run[-1] + 1) % n in ids:
            run.append((run[-1] + 1) % n)
        runs.append(run)
    return runs


@dataclass(frozen=True)
class BoundaryPartition:
    """Dirichlet arcs ``gamma``, candidate segment ``gamma_prime`` and the remainder.

    ``remainder`` lists the non-``gamma`` arcs in positive orientation from the end
    point of ``gamma`` to its start point; it contains ``gamma_prime``.
    """

    gamma: tuple
    gamma_prime: int
    remainder: tuple
    gamma_connected: bool
    b: np.ndarray

    @classmethod
    def from_arcs(cls, boundary: DomainBoundary, gamma: Iterable[int], gamma_prime: int):
        n = len(boundary.arcs)
        g = sorted({int(j) % n for j in gamma})
        gp = int(gamma_prime) % n
        if not g:
            raise ValueError("gamma must contain at least one arc")
        if gp in g:
            raise ValueError("gamma and gamma_prime must be disjoint")
        runs = _runs(set(g), n)
        connected = len(runs) == 1
        first = runs[0]
        start = (first[-1] + 1) % n
        rem = []
        j = start
        while j != first[0]:
            if j not in g:
                rem.append(j)
            j = (j + 1) % n
        b = normal_of_gamma_prime(boundary, gp)
        # order gamma along the boundary starting at its first arc
        ordered = first + [j for r in runs[1:] for j in r]
        return cls(tuple(ordered), gp, tuple(rem), connected, b)

    @property
    def complementary(self) -> bool:
        return self.remainder == (self.gamma_prime,)

    def to_dict(self) -> dict:
        return {
            "gamma": list(self.gamma),
            "gamma_prime": self.gamma_prime,
            "remainder": list(self.remainder),
            "gamma_connected": self.gamma_connected,
            "b": self.b.tolist(),
        }


def normal_of_gamma_prime(boundary: DomainBoundary, gamma_prime) -> np.ndarray:
    """Constant outward unit normal of the straight arc ``gamma_prime``."""
    if isinstance(gamma_prime, BoundaryPartition):
        gamma_prime = gamma_prime.gamma_prime
    arc = boundary.arcs[gamma_prime]
    if not isinstance(arc, Segment):
        raise ValueError(f"gamma_prime (arc {gamma_prime}) must be a straight segment, got {arc.kind}")
    return frame_at(arc, 0.0).nu


def _t_and_slope(arc, b, s):
    tau = arc.tangents(s)
    nu = np.stack([tau[:, 1], -tau[:, 0]], axis=1)
    bt, bn = tau @ b, nu @ b
    kappa = arc.curvatures(s)
    return bt * bn, kappa * (bn**2 - bt**2)


@dataclass
class MonotonicityProfile:
    """Samples of ``t = (b.tau)(b.nu)`` on each remainder arc, plus corner limits.

    ``corners[k]`` is the corner between ``arcs[k]`` and ``arcs[k+1]`` with its
    left limit (from ``arcs[k]``) and right limit (from ``arcs[k+1]``).
    """

    arcs: list
    s: list
    values: list
    slopes: list
    corners: list = field(default_factory=list)
    b: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "arcs": list(self.arcs),
            "s": [x.tolist() for x in self.s],
            "values": [x.tolist() for x in self.values],
            "corners": self.corners,
        }


def monotonicity_profile(
    boundary: DomainBoundary, partition: BoundaryPartition, samples_per_arc: int = 256
) -> MonotonicityProfile:
    if samples_per_arc < 2:
        raise ValueError("samples_per_arc must be at least 2")
    b = partition.b
    arcs, ss, vals, slopes = [], [], [], []
    for j in partition.remainder:
        arc = boundary.arcs[j]
        s = np.linspace(0.0, arc.length, samples_per_arc)
        t, dt = _t_and_slope(arc, b, s)
        if j == partition.gamma_prime:
            dt = np.zeros_like(dt)
        arcs.append(j)
        ss.append(s)
        vals.append(t)
        slopes.append(dt)
    corners = []
    n = len(boundary.arcs)
    for k in range(len(arcs) - 1):
        left_arc = boundary.arcs[arcs[k]]
        right_arc = boundary.arcs[arcs[k + 1]]
        left = _t_and_slope(left_arc, b, np.array([left_arc.length]))[0][0]
        right = _t_and_slope(right_arc, b, np.array([0.0]))[0][0]
        corners.append(
            {"corner": int(arcs[k + 1] % n), "left": float(left), "right": float(right)}
        )
    return MonotonicityProfile(arcs, ss, vals, slopes, corners, b)


@dataclass
class MonotonicityCheck:
    passed: bool
    violations: list

    def to_dict(self) -> dict:
        return {"pass": self.passed, "violations": self.violations}


def check_monotonicity(profile: MonotonicityProfile, tol: float = TOL_MONO) -> MonotonicityCheck:
    """Non-increase of ``t`` inside every arc and across every interior corner."""
    violations = []
    for j, s, dt in zip(profile.arcs, profile.s, profile.slopes):
        k = int(np.argmax(dt))
        if dt[k] > tol:
            violations.append(
                {"location": {"arc": int(j), "s": float(s[k])}, "kind": "interior-increase",
                 "magnitude": float(dt[k])}
            )
    for c in profile.corners:
        jump = c["right"] - c["left"]
        if jump > tol:
            violations.append(
                {"location": {"corner": c["corner"]}, "kind": "corner-up-jump",
                 "magnitude": float(jump), "left": c["left"], "right": c["right"]}
            )
    return MonotonicityCheck(not violations, violations)


def profile_slopes_fd(boundary: DomainBoundary, profile: MonotonicityProfile, eps: float = 1e-6):
    """Central-difference slopes of ``t``, independent of the analytic formula."""
    out = []
    b = profile.b
    for j, s in zip(profile.arcs, profile.s):
        arc = boundary.arcs[j]
        lo = np.clip(s - eps, 0, arc.length)
        hi = np.clip(s + eps, 0, arc.length)

        def t(x):
            tau = arc.tangents(x)
            return (tau @ b) * (tau[:, 1] * b[0] - tau[:, 0] * b[1])

        out.append((t(hi) - t(lo)) / (hi - lo))
    return out


def symmetric_pair(boundary: DomainBoundary, gamma, gamma_prime: int, tol: float = 1e-9) -> bool:
    """True when an isometry of the domain maps ``gamma`` onto ``gamma_prime``.

    Then both configurations are congruent and have the same eigenvalues (for
    instance opposite sides of a rectangle).
    """
    gamma = list(gamma)
    if len(gamma) != 1:
        return False
    A, B = boundary.arcs[gamma[0]], boundary.arcs[gamma_prime]
    if not (isinstance(A, Segment) and isinstance(B, Segment)):
        return False
    if abs(A.length - B.length) > tol * max(1.0, A.length):
        return False
    pts = boundary.dense_points(64)
    from .mesh import _ConvexPolygon

    poly = _ConvexPolygon(boundary.dense_points(256))
    scale = max(1.0, boundary.diameter)
    candidates = []
    for src0, src1 in [(A.a, A.b), (A.b, A.a)]:
        u = (src1 - src0) / A.length
        v = (B.b - B.a) / B.length
        for det in (1, -1):
            # linear part Q maps u -> v with det(Q) = det
            if det == 1:
                c = u @ v
                s = u[0] * v[1] - u[1] * v[0]
                Q = np.array([[c, -s], [s, c]])
            else:
                ref = np.array([[u[0] ** 2 - u[1] ** 2, 2 * u[0] * u[1]], [2 * u[0] * u[1], u[1] ** 2 - u[0] ** 2]])
                c = u @ v
                s = u[0] * v[1] - u[1] * v[0]
                Q = np.array([[c, -s], [s, c]]) @ ref
            t = B.a - Q @ src0
            candidates.append((Q, t))
    for Q, t in candidates:
        img = pts @ Q.T + t
        if np.all(np.abs(poly.distance(img)) <= 1e-6 * scale):
            return True
    return False


@dataclass
class HypothesisReport:
    angle_at_start: float
    angle_at_end: float
    angle_pass: bool
    angle_margin: float
    complementary: bool
    gamma_connected: bool
    monotonicity: MonotonicityCheck
    classification: Classification
    symmetric: bool = False
    partition: Optional[BoundaryPartition] = None

    def to_dict(self) -> dict:
        return {
            "angle_check": {
                "angle_at_P0": self.angle_at_start,
                "angle_at_PN": self.angle_at_end,
                "pass": self.angle_pass,
                "margin": self.angle_margin,
            },
            "complementary": self.complementary,
            "gamma_connected": self.gamma_connected,
            "monotonicity": self.monotonicity.to_dict(),
            "classification": self.classification.value,
            "symmetric_pair": self.symmetric,
            "partition": self.partition.to_dict() if self.partition else None,
        }


def check_hypotheses(
    boundary: DomainBoundary,
    partition: BoundaryPartition,
    tol_angle: float = TOL_ANGLE,
    tol_mono: float = TOL_MONO,
    samples_per_arc: int = 256,
) -> HypothesisReport:
    """Evaluate the acute-angle, complementarity and monotonicity hypotheses."""
    n = len(boundary.arcs)
    # P0 = end of gamma = start of the first remainder arc; PN = start of gamma
    p0 = partition.remainder[0] if partition.remainder else (partition.gamma[-1] + 1) % n
    pn = partition.gamma[0]
    a0 = boundary.interior_angle(p0)
    an = boundary.interior_angle(pn)
    margin = min(math.pi / 2 - a0, math.pi / 2 - an)
    angle_pass = margin > tol_angle
    profile = monotonicity_profile(boundary, partition, samples_per_arc)
    mono = check_monotonicity(profile, tol_mono)
    if partition.complementary and angle_pass:
        cls = Classification.COMPLEMENTARY
    elif (
        not partition.complementary
        and angle_pass
        and mono.passed
        and partition.gamma_connected
    ):
        cls = Classification.MONOTONE_REMAINDER
    else:
        cls = Classification.NONE
    return HypothesisReport(
        angle_at_start=float(a0),
        angle_at_end=float(an),
        angle_pass=bool(angle_pass),
        angle_margin=float(margin),
        complementary=partition.complementary,
        gamma_connected=partition.gamma_connected,
        monotonicity=mono,
        classification=cls,
        symmetric=symmetric_pair(boundary, partition.gamma, partition.gamma_prime),
        partition=partition,
    )
