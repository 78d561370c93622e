"""Curvature integral identity for functions satisfying D or N data on each arc.

For ``u`` in H^2 with ``u = 0`` or ``d_nu u = 0`` on every smooth boundary arc,

    int_Omega u_xx u_yy dx = int_Omega u_xy**2 dx - 1/2 int_dOmega kappa |grad u|**2 ds.

This module evaluates the three integrals for closed-form manufactured
functions. Domain integrals use a triangulation from :mod:`zaremba.mesh` in
which every triangle with an edge on a curved arc is integrated over its exact
curved shape (a cone from the opposite vertex to the arc piece); boundary
integrals use Gauss-Legendre panels on the exact arc parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import roots_jacobi, roots_legendre

from .geometry import DomainBoundary, Segment
from .mesh import Mesh, generate

__all__ = [
    "Poly",
    "Sin",
    "Cos",
    "ManufacturedFunction",
    "IdentityBreakdown",
    "MembershipReport",
    "check_v2_membership",
    "identity_residual",
    "fd_consistency",
    "cone_rule",
    "DIRICHLET",
    "NEUMANN",
]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
MEMBERSHIP_TOL = 1e-10
MEMBERSHIP_SAMPLES = 64
QUAD_ORDERS = range(2, 13)


# ---------------------------------------------------------------------------
# one-dimensional building blocks


class Poly:
    """Polynomial ``sum c_k t**k`` in one variable."""

    def __init__(self, coefficients):
        self.p = Polynomial(np.asarray(coefficients, dtype=float))
        self._d = [self.p, self.p.deriv(1), self.p.deriv(2)]

    def __call__(self, t, k: int = 0):
        return self._d[k](t)

    def to_dict(self):
        return {"poly": self.p.coef.tolist()}


class Sin:
    """``sin(a t + b)``."""

    def __init__(self, a: float = 1.0, b: float = 0.0):
        self.a, self.b = float(a), float(b)

    def __call__(self, t, k: int = 0):
        x = self.a * np.asarray(t) + self.b
        return (np.sin(x), self.a * np.cos(x), -self.a**2 * np.sin(x))[k]

    def to_dict(self):
        return {"sin": [self.a, self.b]}


class Cos:
    """``cos(a t + b)``."""

    def __init__(self, a: float = 1.0, b: float = 0.0):
        self.a, self.b = float(a), float(b)

    def __call__(self, t, k: int = 0):
        x = self.a * np.asarray(t) + self.b
        return (np.cos(x), -self.a * np.sin(x), -self.a**2 * np.cos(x))[k]

    def to_dict(self):
        return {"cos": [self.a, self.b]}


def _block(d):
    if isinstance(d, (Poly, Sin, Cos)):
        return d
    if isinstance(d, (int, float)):
        return Poly([d])
    ((kind, args),) = d.items()
    if kind == "poly":
        return Poly(args)
    if kind == "sin":
        return Sin(*args)
    if kind == "cos":
        return Cos(*args)
    raise ValueError(f"unknown building block {kind!r}")


class ManufacturedFunction:
    """Sum of separable terms ``c * f(x) * g(y)`` with hand-coded derivatives.

    Parameters
    ----------
    terms : sequence of (coef, fx, gy)
        ``fx`` and ``gy`` are :class:`Poly`, :class:`Sin` or :class:`Cos`
        instances (or their dict forms, e.g. ``{"cos": [a, b]}``).
    name : str, optional

    Examples
    --------
    >>> u = ManufacturedFunction([(1.0, Poly([1]), Poly([1])),
    ...                           (-1.0, Poly([0, 0, 1]), Poly([1])),
    ...                           (-1.0, Poly([1]), Poly([0, 0, 1]))])
    >>> float(u.value(np.array([[0.6, 0.8]]))[0])  # 1 - r**2 on the unit circle
    0.0
    """

    def __init__(self, terms: Sequence, name: str = ""):
        self.terms = [(float(c), _block(f), _block(g)) for c, f, g in terms]
        if not self.terms:
            raise ValueError("a manufactured function needs at least one term")
        self.name = name

    def _eval(self, x, kx: int, ky: int):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros(len(x))
        for c, f, g in self.terms:
            out += c * f(x[:, 0], kx) * g(x[:, 1], ky)
        return out

    def value(self, x):
        return self._eval(x, 0, 0)

    def gradient(self, x):
        return np.stack([self._eval(x, 1, 0), self._eval(x, 0, 1)], axis=1)

    def dxx(self, x):
        return self._eval(x, 2, 0)

    def dyy(self, x):
        return self._eval(x, 0, 2)

    def dxy(self, x):
        return self._eval(x, 1, 1)

    @classmethod
    def from_dict(cls, d: dict) -> "ManufacturedFunction":
        if "preset" in d:
            return preset(d["preset"], **d.get("args", {}))
        terms = [(t.get("coef", 1.0), t.get("x", 1.0), t.get("y", 1.0)) for t in d["terms"]]
        return cls(terms, name=d.get("name", ""))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "terms": [{"coef": c, "x": f.to_dict(), "y": g.to_dict()} for c, f, g in self.terms],
        }

    def __repr__(self):
        return f"ManufacturedFunction({self.name or len(self.terms)})"


def preset(name: str, **kw) -> ManufacturedFunction:
    """Named manufactured functions used by shipped configs and tests."""
    hp = math.pi / 2
    if name == "square_cos":
        return ManufacturedFunction([(1.0, Cos(hp), Cos(hp))], name)
    if name == "disk_paraboloid":
        r2 = kw.get("radius", 1.0) ** 2
        return ManufacturedFunction(
            [(r2, Poly([1]), Poly([1])), (-1.0, Poly([0, 0, 1]), Poly([1])), (-1.0, Poly([1]), Poly([0, 0, 1]))],
            name,
        )
    if name == "square_bubble":
        return ManufacturedFunction([(1.0, Poly([0, 1, -1]), Poly([0, 1, -1]))], name)
    if name == "square_mixed":
        # u = 0 on x = 0, y = 0; d_nu u = 0 on x = 1, y = 1
        return ManufacturedFunction([(1.0, Poly([0, -2, 1]), Poly([0, -2, 1]))], name)
    if name == "square_strip":
        return ManufacturedFunction([(1.0, Poly([0, 1, -1]), Poly([1]))], name)
    raise ValueError(f"unknown manufactured function preset {name!r}")


def fd_consistency(f: ManufacturedFunction, points, eps: float = 1e-5) -> dict:
    """Largest relative mismatch between the evaluators and central differences.

    Gradients are differenced from values and second derivatives from the
    hand-coded gradient; both have truncation error O(eps**2).
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
    g = f.gradient(x)
    gx = (f.value(x + ex) - f.value(x - ex)) / (2 * eps)
    gy = (f.value(x + ey) - f.value(x - ey)) / (2 * eps)
    hxx = (f.gradient(x + ex)[:, 0] - f.gradient(x - ex)[:, 0]) / (2 * eps)
    hyy = (f.gradient(x + ey)[:, 1] - f.gradient(x - ey)[:, 1]) / (2 * eps)
    hxy = (f.gradient(x + ey)[:, 0] - f.gradient(x - ey)[:, 0]) / (2 * eps)
    hyx = (f.gradient(x + ex)[:, 1] - f.gradient(x - ex)[:, 1]) / (2 * eps)

    def rel(a, b):
        return float(np.max(np.abs(a - b) / (1.0 + np.abs(b))))

    return {
        "gradient": max(rel(gx, g[:, 0]), rel(gy, g[:, 1])),
        "dxx": rel(hxx, f.dxx(x)),
        "dyy": rel(hyy, f.dyy(x)),
        "dxy": max(rel(hxy, f.dxy(x)), rel(hyx, f.dxy(x))),
    }


# ---------------------------------------------------------------------------
# membership


@dataclass
class MembershipReport:
    arcs: list
    passed: bool

    def to_dict(self) -> dict:
        return {"pass": self.passed, "arcs": self.arcs}


def check_v2_membership(
    boundary: DomainBoundary,
    arc_labels,
    f: ManufacturedFunction,
    samples: int = MEMBERSHIP_SAMPLES,
    tol: float = MEMBERSHIP_TOL,
) -> MembershipReport:
    """Sample ``|u|`` on Dirichlet arcs and ``|nu . grad u|`` on Neumann arcs.

    ``arc_labels`` is a sequence with one of ``"dirichlet"``/``"neumann"`` per
    arc (a mapping from arc id to label is also accepted).
    """
    boundary.require_valid()
    n = len(boundary.arcs)
    if isinstance(arc_labels, dict):
        labels = [arc_labels[j] for j in range(n)]
    else:
        labels = list(arc_labels)
    if len(labels) != n:
        raise ValueError(f"expected {n} arc labels, got {len(labels)}")
    rows = []
    for j, (arc, lab) in enumerate(zip(boundary.arcs, labels)):
        lab = str(lab).lower()
        s = np.linspace(0.0, arc.length, samples)
        x = arc.points(s)
        if lab == DIRICHLET:
            err = np.abs(f.value(x))
        elif lab == NEUMANN:
            err = np.abs(np.einsum("ij,ij->i", arc.normals(s), f.gradient(x)))
        else:
            raise ValueError(f"arc label must be dirichlet or neumann, got {lab!r}")
        k = int(np.argmax(err))
        rows.append(
            {"arc": j, "label": lab, "max": float(err[k]), "at": x[k].tolist(), "pass": bool(err[k] <= tol)}
        )
    return MembershipReport(rows, all(r["pass"] for r in rows))


# ---------------------------------------------------------------------------
# quadrature


def cone_rule(order: int):
    """Rule on the unit square for ``int_0^1 int_0^1 F(r, t) r dr dt``.

    Gauss-Jacobi in ``r`` (weight ``r``) and Gauss-Legendre in ``t``, exact
    when ``F`` is a polynomial of degree ``order`` in each variable. Mapping
    ``(r, t)`` to ``C + r * (gamma(t) - C)`` covers the region swept from the
    apex ``C`` to a boundary piece ``gamma``; for a straight piece this is the
    collapsed (conical product) rule on a triangle.
    """
    if order not in QUAD_ORDERS:
        raise ValueError(f"quadrature order {order} unsupported (use 2..12)")
    m = (order + 2) // 2
    zr, wr = roots_jacobi(m, 0.0, 1.0)
    r = 0.5 * (zr + 1.0)
    wr = wr / 4.0
    zt, wt = roots_legendre(m)
    t = 0.5 * (zt + 1.0)
    wt = wt / 2.0
    R, T = np.meshgrid(r, t, indexing="ij")
    W = np.outer(wr, wt)
    return R.ravel(), T.ravel(), W.ravel()


def _gauss_panels(length: float, h: float, order: int):
    n_pan = max(1, math.ceil(length / h))
    m = (order + 2) // 2
    z, w = roots_legendre(m)
    edges = np.linspace(0.0, length, n_pan + 1)
    a, b = edges[:-1, None], edges[1:, None]
    s = 0.5 * (a + b) + 0.5 * (b - a) * z[None, :]
    ws = 0.5 * (b - a) * w[None, :]
    return s.ravel(), ws.ravel()


@dataclass
class _Cones:
    """Quadrature points and weights for a set of cones."""

    x: np.ndarray
    w: np.ndarray


def _domain_rule(mesh: Mesh, boundary: DomainBoundary, order: int, curved: bool) -> _Cones:
    R, T, W = cone_rule(order)
    V, tri = mesh.vertices, mesh.triangles

    # boundary edge lookup (sorted vertex pair -> boundary edge index)
    be = mesh.boundary_edges
    nv = len(V)
    key_b = np.minimum(be[:, 0], be[:, 1]) * nv + np.maximum(be[:, 0], be[:, 1])
    bmap = dict(zip(key_b.tolist(), range(len(be))))
    is_curved = np.array([not isinstance(a, Segment) for a in boundary.arcs])

    # curved edge slot per triangle: edge k joins tri[:, k] and tri[:, (k+1)%3]
    cslot = np.full((len(tri), 3), -1, dtype=np.int64)
    if curved:
        for k in range(3):
            a, b = tri[:, k], tri[:, (k + 1) % 3]
            keys = np.minimum(a, b) * nv + np.maximum(a, b)
            for i, kk in enumerate(keys.tolist()):
                e = bmap.get(kk)
                if e is not None and is_curved[mesh.boundary_arcs[e]]:
                    cslot[i, k] = e
    n_curved = (cslot >= 0).sum(axis=1)

    xs, ws = [], []

    # straight triangles: apex tri[:,2], base tri[:,0] -> tri[:,1]
    st = tri[n_curved == 0]
    if len(st):
        A, B, C = V[st[:, 0]], V[st[:, 1]], V[st[:, 2]]
        P = A[:, None, :] + T[None, :, None] * (B - A)[:, None, :]
        X = C[:, None, :] + R[None, :, None] * (P - C[:, None, :])
        det = (A[:, 0] - C[:, 0]) * (B[:, 1] - C[:, 1]) - (A[:, 1] - C[:, 1]) * (B[:, 0] - C[:, 0])
        xs.append(X.reshape(-1, 2))
        ws.append((np.abs(det)[:, None] * W[None, :]).ravel())

    # cones over curved pieces; a triangle with several curved edges is split
    # at its centroid into one cone per edge
    cones = []  # (apex, edge endpoints, boundary edge or -1)
    for i in np.nonzero(n_curved == 1)[0]:
        k = int(np.nonzero(cslot[i] >= 0)[0][0])
        cones.append((V[tri[i, (k + 2) % 3]], tri[i, k], tri[i, (k + 1) % 3], int(cslot[i, k])))
    for i in np.nonzero(n_curved >= 2)[0]:
        G = V[tri[i]].mean(axis=0)
        for k in range(3):
            cones.append((G, tri[i, k], tri[i, (k + 1) % 3], int(cslot[i, k])))
    for apex, ia, ib, e in cones:
        if e < 0:
            A, B = V[ia], V[ib]
            P = A[None, :] + T[:, None] * (B - A)[None, :]
            dP = np.broadcast_to(B - A, P.shape)
        else:
            arc = boundary.arcs[mesh.boundary_arcs[e]]
            s0, s1 = mesh.boundary_params[e]
            # boundary edges run counterclockwise; follow the triangle's edge direction
            if mesh.boundary_edges[e, 0] != ia:
                s0, s1 = s1, s0
            s = s0 + T * (s1 - s0)
            P = arc.points(s)
            dP = arc.tangents(s) * (s1 - s0)
        X = apex[None, :] + R[:, None] * (P - apex[None, :])
        jac = (P[:, 0] - apex[0]) * dP[:, 1] - (P[:, 1] - apex[1]) * dP[:, 0]
        xs.append(X)
        ws.append(np.abs(jac) * W)
    return _Cones(np.vstack(xs), np.concatenate(ws))


def _polygon_domain_rule(mesh: Mesh, order: int) -> _Cones:
    """Straight-sided triangles only (the polygonal approximation of the domain)."""
    R, T, W = cone_rule(order)
    V, tri = mesh.vertices, mesh.triangles
    A, B, C = V[tri[:, 0]], V[tri[:, 1]], V[tri[:, 2]]
    P = A[:, None, :] + T[None, :, None] * (B - A)[:, None, :]
    X = C[:, None, :] + R[None, :, None] * (P - C[:, None, :])
    det = (A[:, 0] - C[:, 0]) * (B[:, 1] - C[:, 1]) - (A[:, 1] - C[:, 1]) * (B[:, 0] - C[:, 0])
    return _Cones(X.reshape(-1, 2), (np.abs(det)[:, None] * W[None, :]).ravel())


# ---------------------------------------------------------------------------
# identity


@dataclass
class IdentityBreakdown:
    """Terms of the curvature identity; ``residual = mixed - cross + curv / 2``."""

    term_mixed: float
    term_cross: float
    term_curv: float
    residual: float
    quad_order: int
    h: float
    n_triangles: int
    curved: bool = True
    membership: Optional[MembershipReport] = None
    function: str = ""

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.term_mixed), abs(self.term_cross), 0.5 * abs(self.term_curv), 1e-300)
        return abs(self.residual) / scale

    def to_dict(self) -> dict:
        d = {
            "term_mixed": self.term_mixed,
            "term_cross": self.term_cross,
            "term_curv": self.term_curv,
            "residual": self.residual,
            "relative_residual": self.relative_residual,
            "quad_order": self.quad_order,
            "h": self.h,
            "n_triangles": self.n_triangles,
            "curved": self.curved,
            "function": self.function,
        }
        if self.membership is not None:
            d["membership"] = self.membership.to_dict()
        return d


def boundary_curvature_term(boundary: DomainBoundary, f: ManufacturedFunction, order: int, h: float) -> float:
    """``int_dOmega kappa |grad u|**2 ds`` with exact arcs and analytic curvature."""
    total = 0.0
    for arc in boundary.arcs:
        if isinstance(arc, Segment):
            continue
        s, w = _gauss_panels(arc.length, h, order)
        g = f.gradient(arc.points(s))
        total += float(np.sum(w * arc.curvatures(s) * np.einsum("ij,ij->i", g, g)))
    return total


def identity_residual(
    boundary: DomainBoundary,
    f: ManufacturedFunction,
    quad_order: int = 8,
    h: Optional[float] = None,
    *,
    mesh: Optional[Mesh] = None,
    curved: bool = True,
    arc_labels=None,
) -> IdentityBreakdown:
    """Evaluate all terms of the identity for ``f`` on ``boundary``.

    Parameters
    ----------
    boundary : DomainBoundary
    f : ManufacturedFunction
    quad_order : int
        Polynomial exactness of the triangle and panel rules, 2 to 12.
    h : float, optional
        Mesh size for the domain integrals and panel length for the boundary
        integral. Defaults to a tenth of the diameter.
    mesh : Mesh, optional
        Reuse an existing triangulation of ``boundary``.
    curved : bool
        Integrate over the exact curved triangles next to curved arcs. With
        ``False`` the domain integrals use the straight-sided triangulation and
        the residual decays like ``h**2``.
    arc_labels : optional
        If given, membership is checked and recorded in the breakdown.
    """
    if quad_order not in QUAD_ORDERS:
        raise ValueError(f"quadrature order {quad_order} unsupported (use 2..12)")
    boundary.require_valid()
    if mesh is None:
        if h is None:
            h = boundary.diameter / 10
        mesh = generate(boundary, h)
    if h is None:
        h = mesh.h_nominal
    rule = _domain_rule(mesh, boundary, quad_order, True) if curved else _polygon_domain_rule(mesh, quad_order)
    x, w = rule.x, rule.w
    mixed = float(np.sum(w * f.dxx(x) * f.dyy(x)))
    cross = float(np.sum(w * f.dxy(x) ** 2))
    curv = boundary_curvature_term(boundary, f, quad_order, h)
    membership = check_v2_membership(boundary, arc_labels, f) if arc_labels is not None else None
    return IdentityBreakdown(
        term_mixed=mixed,
        term_cross=cross,
        term_curv=curv,
        residual=mixed - cross + 0.5 * curv,
        quad_order=int(quad_order),
        h=float(h),
        n_triangles=mesh.n_triangles,
        curved=curved,
        membership=membership,
        function=f.name,
    )
