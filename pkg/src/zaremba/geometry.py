"""Piecewise-smooth convex planar boundaries.

A boundary is a closed, counterclockwise chain of arcs. Three arc families are
supported (straight segments, circular arcs and polynomial graph arcs), each with
an exact arclength parameterization, so tangents, outward normals and signed
curvature are available in closed form.

Conventions
-----------
* ``tau`` is the unit tangent in the direction of traversal.
* ``nu = (tau_y, -tau_x)``, i.e. ``tau`` rotated by -pi/2. For a counterclockwise
  boundary this is the outward normal.
* Signed curvature is ``kappa = tau' . nu`` with ``'`` the arclength derivative,
  which is non-positive on a convex boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

__all__ = [
    "ParameterRangeError",
    "UnitFrame",
    "Segment",
    "CircularArc",
    "GraphArc",
    "DomainBoundary",
    "ValidationReport",
    "BoundarySamples",
    "frame_at",
    "curvature_at",
    "interior_angle",
    "validate",
    "boundary_samples",
    "arc_from_dict",
]

CLOSURE_TOL = 1e-12
CURVATURE_TOL = 1e-10
SAMPLES_PER_ARC = 256

# Gauss-Legendre rule used for arclength and area integrals of graph arcs.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


class ParameterRangeError(ValueError):
    """Arclength parameter outside ``[0, length]``."""


def _rot(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def _outward(tau: np.ndarray) -> np.ndarray:
    return np.stack([tau[..., 1], -tau[..., 0]], axis=-1)


@dataclass(frozen=True)
class UnitFrame:
    tau: np.ndarray
    nu: np.ndarray


class _Arc:
    """Shared arclength bookkeeping; subclasses provide vectorized evaluators."""

    kind = "arc"
    length: float

    def _check(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        slack = 1e-12 * max(1.0, self.length)
        if np.any(s < -slack) or np.any(s > self.length + slack):
            raise ParameterRangeError(
                f"arclength {s} outside [0, {self.length}] for {self.kind}"
            )
        return np.clip(s, 0.0, self.length)

    # vectorized evaluators, s already validated
    def _points(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _tangents(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _curvatures(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def points(self, s) -> np.ndarray:
        return self._points(self._check(s))

    def tangents(self, s) -> np.ndarray:
        return self._tangents(self._check(s))

    def normals(self, s) -> np.ndarray:
        return _outward(self.tangents(s))

    def curvatures(self, s) -> np.ndarray:
        return self._curvatures(self._check(s))

    def point(self, s: float) -> np.ndarray:
        return self.points(np.array([s]))[0]

    @property
    def start(self) -> np.ndarray:
        return self._points(np.array([0.0]))[0]

    @property
    def end(self) -> np.ndarray:
        return self._points(np.array([self.length]))[0]

    def signed_area_contribution(self) -> float:
        """``1/2 * integral of (x dy - y dx)`` along the arc."""
        raise NotImplementedError

    def moved(self, rotation: float = 0.0, shift=(0.0, 0.0), scale: float = 1.0):
        """Image under ``x -> scale * R(rotation) x + shift``."""
        raise NotImplementedError


class Segment(_Arc):
    kind = "segment"

    def __init__(self, start, end):
        self.a = np.asarray(start, dtype=float).reshape(2)
        self.b = np.asarray(end, dtype=float).reshape(2)
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("segment endpoints must be finite")
        d = self.b - self.a
        self.length = float(math.hypot(d[0], d[1]))
        if self.length <= 0:
            raise ValueError("segment has zero length")
        self._tau = d / self.length

    def _points(self, s):
        return self.a + np.multiply.outer(s / self.length, self.b - self.a)

    def _tangents(self, s):
        return np.broadcast_to(self._tau, np.shape(s) + (2,)).copy()

    def _curvatures(self, s):
        return np.zeros(np.shape(s))

    @property
    def start(self):
        return self.a.copy()

    @property
    def end(self):
        return self.b.copy()

    def signed_area_contribution(self):
        return 0.5 * (self.a[0] * self.b[1] - self.b[0] * self.a[1])

    def moved(self, rotation=0.0, shift=(0.0, 0.0), scale=1.0):
        R = scale * _rot(rotation)
        t = np.asarray(shift, dtype=float)
        return Segment(R @ self.a + t, R @ self.b + t)

    def to_dict(self):
        return {"type": "segment", "start": self.a.tolist(), "end": self.b.tolist()}

    def __repr__(self):
        return f"Segment({self.a.tolist()}, {self.b.tolist()})"


class CircularArc(_Arc):
    """Arc of a circle; counterclockwise when ``angle_end > angle_start``."""

    kind = "circular"

    def __init__(self, center, radius: float, angle_start: float, angle_end: float):
        self.center = np.asarray(center, dtype=float).reshape(2)
        if not radius > 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.angle_start = float(angle_start)
        self.angle_end = float(angle_end)
        sweep = self.angle_end - self.angle_start
        if sweep == 0:
            raise ValueError("circular arc has zero length")
        self.direction = 1.0 if sweep > 0 else -1.0
        self.length = abs(sweep) * self.radius

    def _angle(self, s):
        return self.angle_start + self.direction * s / self.radius

    def _points(self, s):
        a = self._angle(s)
        return self.center + self.radius * np.stack([np.cos(a), np.sin(a)], axis=-1)

    def _tangents(self, s):
        a = self._angle(s)
        return self.direction * np.stack([-np.sin(a), np.cos(a)], axis=-1)

    def _curvatures(self, s):
        return np.full(np.shape(s), -self.direction / self.radius)

    def signed_area_contribution(self):
        cx, cy = self.center
        r, a0, a1 = self.radius, self.angle_start, self.angle_end
        return 0.5 * (
            r * cx * (math.sin(a1) - math.sin(a0))
            - r * cy * (math.cos(a1) - math.cos(a0))
            + r * r * (a1 - a0)
        )

    def moved(self, rotation=0.0, shift=(0.0, 0.0), scale=1.0):
        c = scale * _rot(rotation) @ self.center + np.asarray(shift, dtype=float)
        return CircularArc(
            c, scale * self.radius, self.angle_start + rotation, self.angle_end + rotation
        )

    def to_dict(self):
        return {
            "type": "circular",
            "center": self.center.tolist(),
            "radius": self.radius,
            "angle_start": self.angle_start,
            "angle_end": self.angle_end,
        }

    def __repr__(self):
        return (
            f"CircularArc({self.center.tolist()}, {self.radius}, "
            f"{self.angle_start}, {self.angle_end})"
        )


class GraphArc(_Arc):
    """Graph ``{(t, phi(t)) : t_lo <= t <= t_hi}`` of a polynomial, placed rigidly.

    The plane point for parameter ``t`` is ``R(rotation) @ (t, phi(t)) + translation``.
    The arc is traversed with increasing ``t`` unless ``reverse`` is set.

    Parameters
    ----------
    coefficients : sequence of float
        Polynomial coefficients of ``phi`` in increasing powers of ``t``.
    t_range : (float, float)
        Parameter interval ``(t_lo, t_hi)`` with ``t_lo < t_hi``.
    rotation : float
        Rotation angle of the placement, radians.
    translation : (float, float)
        Translation of the placement.
    reverse : bool
        Traverse from ``t_hi`` to ``t_lo``.
    """

    kind = "graph"
    _PANELS = 64

    def __init__(
        self,
        coefficients: Sequence[float],
        t_range=(0.0, 1.0),
        rotation: float = 0.0,
        translation=(0.0, 0.0),
        reverse: bool = False,
    ):
        self.phi = Polynomial(np.asarray(coefficients, dtype=float))
        self.dphi = self.phi.deriv(1)
        self.ddphi = self.phi.deriv(2)
        self.t_lo, self.t_hi = float(t_range[0]), float(t_range[1])
        if not self.t_hi > self.t_lo:
            raise ValueError("t_range must be increasing")
        self.rotation = float(rotation)
        self.translation = np.asarray(translation, dtype=float).reshape(2)
        self.reverse = bool(reverse)
        self._R = _rot(self.rotation)

        self._edges = np.linspace(self.t_lo, self.t_hi, self._PANELS + 1)
        widths = np.diff(self._edges)
        nodes = self._edges[:-1, None] + 0.5 * widths[:, None] * (_GL_X + 1.0)
        panel = 0.5 * widths * (self._speed(nodes) @ _GL_W)
        self._cum = np.concatenate([[0.0], np.cumsum(panel)])
        self.length = float(self._cum[-1])

    def _speed(self, t):
        return np.sqrt(1.0 + self.dphi(t) ** 2)

    def _forward_length(self, t):
        """Arclength from ``t_lo`` to ``t`` (vectorized)."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self._edges, t, side="right") - 1, 0, self._PANELS - 1)
        a = self._edges[k]
        half = 0.5 * (t - a)
        nodes = a[..., None] + half[..., None] * (_GL_X + 1.0)
        return self._cum[k] + half * (self._speed(nodes) @ _GL_W)

    def param(self, s) -> np.ndarray:
        """Graph parameter ``t`` at arclength ``s`` along the traversal."""
        s = np.asarray(s, dtype=float)
        target = self.length - s if self.reverse else s
        t = np.interp(target, self._cum, self._edges)
        for _ in range(30):
            step = (self._forward_length(t) - target) / self._speed(t)
            t = np.clip(t - step, self.t_lo, self.t_hi)
            if np.all(np.abs(step) <= 1e-15 * max(1.0, abs(self.t_hi) + abs(self.t_lo))):
                break
        return t

    def _local_to_plane(self, local):
        return local @ self._R.T + self.translation

    def _points(self, s):
        t = self.param(s)
        return self._local_to_plane(np.stack([t, self.phi(t)], axis=-1))

    def _tangents(self, s):
        t = self.param(s)
        d = np.stack([np.ones_like(t), self.dphi(t)], axis=-1) / self._speed(t)[..., None]
        if self.reverse:
            d = -d
        return d @ self._R.T

    def _curvatures(self, s):
        t = self.param(s)
        k = self.ddphi(t) / self._speed(t) ** 3
        return k if self.reverse else -k

    @property
    def start(self):
        t = self.t_hi if self.reverse else self.t_lo
        return self._local_to_plane(np.array([t, self.phi(t)]))

    @property
    def end(self):
        t = self.t_lo if self.reverse else self.t_hi
        return self._local_to_plane(np.array([t, self.phi(t)]))

    def signed_area_contribution(self):
        widths = np.diff(self._edges)
        t = (self._edges[:-1, None] + 0.5 * widths[:, None] * (_GL_X + 1.0)).ravel()
        w = (0.5 * widths[:, None] * _GL_W).ravel()
        p = self._local_to_plane(np.stack([t, self.phi(t)], axis=-1))
        dp = np.stack([np.ones_like(t), self.dphi(t)], axis=-1) @ self._R.T
        val = 0.5 * np.sum(w * (p[:, 0] * dp[:, 1] - p[:, 1] * dp[:, 0]))
        return -val if self.reverse else val

    def moved(self, rotation=0.0, shift=(0.0, 0.0), scale=1.0):
        c = self.phi.coef
        powers = np.arange(len(c))
        coef = c * scale ** (1 - powers)
        R = _rot(rotation)
        return GraphArc(
            coef,
            (scale * self.t_lo, scale * self.t_hi),
            self.rotation + rotation,
            scale * R @ self.translation + np.asarray(shift, dtype=float),
            self.reverse,
        )

    def to_dict(self):
        return {
            "type": "graph",
            "coefficients": self.phi.coef.tolist(),
            "t_range": [self.t_lo, self.t_hi],
            "rotation": self.rotation,
            "translation": self.translation.tolist(),
            "reverse": self.reverse,
        }

    def __repr__(self):
        return (
            f"GraphArc({self.phi.coef.tolist()}, ({self.t_lo}, {self.t_hi}), "
            f"rotation={self.rotation}, reverse={self.reverse})"
        )


def arc_from_dict(d: dict) -> _Arc:
    kind = d.get("type")
    if kind == "segment":
        return Segment(d["start"], d["end"])
    if kind == "circular":
        return CircularArc(d["center"], d["radius"], d["angle_start"], d["angle_end"])
    if kind == "graph":
        return GraphArc(
            d["coefficients"],
            tuple(d.get("t_range", (0.0, 1.0))),
            d.get("rotation", 0.0),
            tuple(d.get("translation", (0.0, 0.0))),
            d.get("reverse", False),
        )
    raise ValueError(f"unknown arc type {kind!r}")


def _turn(tau_in: np.ndarray, tau_out: np.ndarray) -> float:
    cross = tau_in[0] * tau_out[1] - tau_in[1] * tau_out[0]
    dot = tau_in[0] * tau_out[0] + tau_in[1] * tau_out[1]
    return math.atan2(cross, dot)


class DomainBoundary:
    """Closed chain of arcs; corner ``j`` is the start point of arc ``j``.

    Construction never raises for geometric defects; use :func:`validate` to
    obtain a report, or :meth:`require_valid`.
    """

    def __init__(self, arcs: Sequence[_Arc]):
        if len(arcs) < 1:
            raise ValueError("a boundary needs at least one arc")
        self.arcs = tuple(arcs)
        self.corners = np.array([a.start for a in self.arcs])
        n = len(self.arcs)
        angles = []
        for j in range(n):
            prev = self.arcs[j - 1]
            tau_in = prev.tangents(np.array([prev.length]))[0]
            tau_out = self.arcs[j].tangents(np.array([0.0]))[0]
            angles.append(math.pi - _turn(tau_in, tau_out))
        self.interior_angles = np.array(angles)

    @classmethod
    def polygon(cls, vertices) -> "DomainBoundary":
        v = np.asarray(vertices, dtype=float)
        return cls([Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))])

    @classmethod
    def from_dict(cls, d: dict) -> "DomainBoundary":
        if "polygon" in d:
            return cls.polygon(d["polygon"])
        return cls([arc_from_dict(a) for a in d["arcs"]])

    def to_dict(self) -> dict:
        return {"arcs": [a.to_dict() for a in self.arcs]}

    def __len__(self):
        return len(self.arcs)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([a.length for a in self.arcs])

    @property
    def perimeter(self) -> float:
        return float(self.lengths.sum())

    @property
    def signed_area(self) -> float:
        return float(sum(a.signed_area_contribution() for a in self.arcs))

    def interior_angle(self, corner_index: int) -> float:
        return interior_angle(self, corner_index)

    def moved(self, rotation=0.0, shift=(0.0, 0.0), scale=1.0) -> "DomainBoundary":
        return DomainBoundary([a.moved(rotation, shift, scale) for a in self.arcs])

    def dense_points(self, per_arc: int = 64) -> np.ndarray:
        """Points along the boundary, in order, without repeating corners."""
        pts = [a.points(np.linspace(0, a.length, per_arc + 1)[:-1]) for a in self.arcs]
        return np.vstack(pts)

    @property
    def diameter(self) -> float:
        p = self.dense_points(64)
        d = p[:, None, :] - p[None, :, :]
        return float(np.sqrt((d**2).sum(-1)).max())

    def require_valid(self) -> "ValidationReport":
        report = validate(self)
        if not report.accepted:
            raise ValueError(f"boundary rejected: {report.summary()}")
        return report

    def __repr__(self):
        return f"DomainBoundary({list(self.arcs)!r})"


def frame_at(arc: _Arc, s: float) -> UnitFrame:
    tau = arc.tangents(np.array([s]))[0]
    return UnitFrame(tau=tau, nu=_outward(tau))


def curvature_at(arc: _Arc, s: float) -> float:
    return float(arc.curvatures(np.array([s]))[0])


def interior_angle(boundary: DomainBoundary, corner_index: int) -> float:
    n = len(boundary.arcs)
    if not -n <= corner_index < n:
        raise IndexError(f"corner index {corner_index} out of range for {n} corners")
    return float(boundary.interior_angles[corner_index])


@dataclass
class ValidationReport:
    accepted: bool
    n_corners: int
    signed_area: float
    positively_oriented: bool
    closure_defects: list = field(default_factory=list)
    convexity_violations: list = field(default_factory=list)
    cusps: list = field(default_factory=list)
    samples_per_arc: int = SAMPLES_PER_ARC
    tol_curvature: float = CURVATURE_TOL

    def summary(self) -> str:
        parts = []
        if self.closure_defects:
            parts.append(f"closure gaps at corners {[c for c, _ in self.closure_defects]}")
        if not self.positively_oriented:
            parts.append(f"not counterclockwise (signed area {self.signed_area:.3g})")
        if self.convexity_violations:
            parts.append(f"convexity violations {self.convexity_violations}")
        if self.cusps:
            parts.append(f"cusps at corners {self.cusps}")
        return "; ".join(parts) or "ok"

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "n_corners": self.n_corners,
            "signed_area": self.signed_area,
            "positively_oriented": self.positively_oriented,
            "closure_defects": [[int(c), float(g)] for c, g in self.closure_defects],
            "convexity_violations": self.convexity_violations,
            "cusps": self.cusps,
            "samples_per_arc": self.samples_per_arc,
        }


def validate(
    boundary: DomainBoundary,
    tol_curvature: float = CURVATURE_TOL,
    samples_per_arc: int = SAMPLES_PER_ARC,
) -> ValidationReport:
    """Check closure, orientation, convexity and absence of cusps.

    Convexity is checked by sampling the analytic curvature at
    ``samples_per_arc`` points per arc and by the exact corner angles.
    """
    arcs = boundary.arcs
    n = len(arcs)
    closure = []
    for j in range(n):
        gap = float(np.linalg.norm(arcs[j - 1].end - arcs[j].start))
        if gap > CLOSURE_TOL:
            closure.append((j, gap))

    area = boundary.signed_area
    convex = []
    for j, arc in enumerate(arcs):
        s = np.linspace(0.0, arc.length, samples_per_arc)
        k = arc.curvatures(s)
        worst = int(np.argmax(k))
        if k[worst] > tol_curvature:
            convex.append(
                {"kind": "curvature", "arc": j, "s": float(s[worst]), "value": float(k[worst])}
            )
    cusps = []
    for j, ang in enumerate(boundary.interior_angles):
        if ang > math.pi + 1e-12:
            convex.append({"kind": "reflex-corner", "corner": j, "value": float(ang)})
        if ang <= 1e-12:
            cusps.append(j)

    ok = not closure and area > 0 and not convex and not cusps
    return ValidationReport(
        accepted=ok,
        n_corners=n,
        signed_area=area,
        positively_oriented=area > 0,
        closure_defects=closure,
        convexity_violations=convex,
        cusps=cusps,
        samples_per_arc=samples_per_arc,
        tol_curvature=tol_curvature,
    )


@dataclass(frozen=True)
class BoundarySamples:
    """Ordered boundary samples; ``params[i]`` is the arclength of ``points[i]``
    on arc ``arc_ids[i]``. Corners carry the id of the arc that starts there."""

    points: np.ndarray
    arc_ids: np.ndarray
    params: np.ndarray

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(zip(map(tuple, self.points), self.arc_ids.tolist()))


def _graded_params(arc: _Arc, size: Callable[[np.ndarray], np.ndarray], h: float) -> np.ndarray:
    L = arc.length
    s_min = float(np.min(size(arc.points(np.array([0.0, L])))))
    near = np.geomspace(min(1e-3 * s_min, 1e-3 * L), L, 400)
    grid = np.unique(np.concatenate([np.linspace(0, L, 2001), near, L - near]))
    grid = grid[(grid >= 0) & (grid <= L)]
    density = 1.0 / np.minimum(size(arc.points(grid)), h)
    F = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])
    n = max(1, int(math.ceil(F[-1] - 1e-9)))
    return np.interp(F[-1] * np.arange(n) / n, F, grid)


def boundary_samples(
    boundary: DomainBoundary,
    h: float,
    size: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> BoundarySamples:
    """Sample the boundary in positive orientation with spacing at most ``h``.

    Each arc is split into ``ceil(length / h)`` pieces of equal arclength, or, when
    a local ``size`` function is given, into pieces no longer than that size.
    The first sample is the first corner.
    """
    if not h > 0:
        raise ValueError("sample spacing h must be positive")
    pts, ids, params = [], [], []
    for j, arc in enumerate(boundary.arcs):
        if size is None:
            n = max(1, int(math.ceil(arc.length / h - 1e-9)))
            s = arc.length * np.arange(n) / n
        else:
            s = _graded_params(arc, size, h)
        pts.append(arc.points(s))
        ids.append(np.full(len(s), j))
        params.append(s)
    return BoundarySamples(np.vstack(pts), np.concatenate(ids), np.concatenate(params))
