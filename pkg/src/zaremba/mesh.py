"""Boundary-tagged triangulations of convex domains.

Meshes are Delaunay triangulations of boundary samples plus interior points.
Because the domain is convex, the sampled boundary polygon is the convex hull of
the point set, so every boundary edge is a triangulation edge and corners are
always mesh vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import Delaunay, cKDTree

from .geometry import BoundarySamples, DomainBoundary, Segment, boundary_samples

__all__ = [
    "Grading",
    "Mesh",
    "MeshQualityError",
    "generate",
    "refine",
    "mesh_family",
    "quality",
    "write_mesh",
    "read_mesh",
]

QUALITY_FLOOR_DEG = 20.0
GRADING_SLOPE = 0.3  # growth of the local size per unit distance from a graded corner
_FSCALE = 1.2
_DT = 0.2


class MeshQualityError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grading:
    """Geometric grading toward selected corners.

    The local mesh size at a graded corner is ``h * factor**levels`` and grows
    linearly with the distance from the corner until it reaches ``h``.
    """

    corners: tuple
    factor: float = 0.15
    levels: int = 3

    def __post_init__(self):
        if not 0 < self.factor < 1:
            raise ValueError("grading factor must lie in (0, 1)")
        if self.levels < 0:
            raise ValueError("grading levels must be non-negative")

    def to_dict(self):
        return {"corners": list(self.corners), "factor": self.factor, "levels": self.levels}


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangulation.

    ``boundary_edges[k]`` joins two vertices on arc ``boundary_arcs[k]`` at arclength
    parameters ``boundary_params[k]``; the edges form one counterclockwise cycle.
    ``h_nominal`` is the target size that generated this mesh (halved by each
    refinement); ``h`` is the longest edge.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_arcs: np.ndarray
    boundary_params: np.ndarray
    h_nominal: float
    level: int = 0
    grading: Optional[Grading] = None
    h: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h", float(_edge_lengths(self.vertices, self.edges()).max()))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    def areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    def polygon_area(self) -> float:
        p = self.vertices[self.boundary_edges[:, 0]]
        q = self.vertices[self.boundary_edges[:, 1]]
        return float(0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def boundary_vertices(self) -> np.ndarray:
        return self.boundary_edges[:, 0].copy()

    def vertices_on_arcs(self, arc_ids) -> np.ndarray:
        """Vertices on the closure of the given arcs (corners included)."""
        sel = np.isin(self.boundary_arcs, list(arc_ids))
        return np.unique(self.boundary_edges[sel].ravel())

    def moved(self, rotation=0.0, shift=(0.0, 0.0), scale=1.0) -> "Mesh":
        """Image under ``x -> scale * R x + shift``; topology is unchanged."""
        c, s = math.cos(rotation), math.sin(rotation)
        R = scale * np.array([[c, -s], [s, c]])
        return Mesh(
            self.vertices @ R.T + np.asarray(shift, dtype=float),
            self.triangles.copy(),
            self.boundary_edges.copy(),
            self.boundary_arcs.copy(),
            scale * self.boundary_params,
            scale * self.h_nominal,
            self.level,
            self.grading,
        )


def _signed_areas(v, t):
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _edge_lengths(v, e):
    d = v[e[:, 1]] - v[e[:, 0]]
    return np.hypot(d[:, 0], d[:, 1])


def _angles_deg(v, t) -> np.ndarray:
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(c - a, axis=1)
    lc = np.linalg.norm(a - b, axis=1)

    def ang(opp, s1, s2):
        cosv = (s1**2 + s2**2 - opp**2) / (2 * s1 * s2)
        return np.degrees(np.arccos(np.clip(cosv, -1.0, 1.0)))

    return np.stack([ang(la, lb, lc), ang(lb, lc, la), ang(lc, la, lb)], axis=1)


def quality(mesh: Mesh) -> dict:
    """Minimum angle (degrees), maximum aspect ratio and edge-length range.

    The aspect ratio is circumradius over twice the inradius (1 for an
    equilateral triangle).
    """
    v, t = mesh.vertices, mesh.triangles
    ang = _angles_deg(v, t)
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    la = np.linalg.norm(b - c, axis=1)
    lb = np.linalg.norm(c - a, axis=1)
    lc = np.linalg.norm(a - b, axis=1)
    area = np.abs(_signed_areas(v, t))
    s = 0.5 * (la + lb + lc)
    with np.errstate(divide="ignore", invalid="ignore"):
        aspect = (la * lb * lc / (4 * area)) / (2 * area / s)
    lengths = _edge_lengths(v, mesh.edges())
    return {
        "min_angle": float(ang.min()),
        "max_aspect": float(np.nanmax(aspect)) if np.all(area > 0) else math.inf,
        "h_min": float(lengths.min()),
        "h_max": float(lengths.max()),
    }


def quality_floor(boundary: DomainBoundary) -> float:
    """Minimum-angle floor in degrees.

    A triangulation cannot beat the sharpest corner, so the 20 degree floor is
    lowered to half of the smallest interior corner angle when needed.
    """
    sharpest = float(np.degrees(np.min(boundary.interior_angles)))
    return min(QUALITY_FLOOR_DEG, 0.5 * sharpest)


class _ConvexPolygon:
    """Signed distance to a convex CCW polygon (positive inside)."""

    def __init__(self, pts: np.ndarray):
        q = np.roll(pts, -1, axis=0)
        d = q - pts
        L = np.hypot(d[:, 0], d[:, 1])
        self.n_in = np.stack([-d[:, 1], d[:, 0]], axis=1) / L[:, None]
        self.off = np.einsum("ij,ij->i", self.n_in, pts)

    def distance(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(len(x))
        for k in range(0, len(x), 4096):
            blk = x[k : k + 4096]
            out[k : k + 4096] = (blk @ self.n_in.T - self.off).min(axis=1)
        return out


def _size_function(boundary: DomainBoundary, h: float, grading: Optional[Grading]):
    if grading is None or not grading.corners:
        return None
    pts = boundary.corners[list(grading.corners)]
    s_min = h * grading.factor**grading.levels

    def size(x):
        x = np.atleast_2d(x)
        d = np.sqrt(((x[:, None, :] - pts[None, :, :]) ** 2).sum(-1)).min(axis=1)
        return np.minimum(h, s_min + GRADING_SLOPE * d)

    return size


def _lattice(boundary_pts: np.ndarray, h: float) -> np.ndarray:
    """Equilateral lattice with spacing ``h``, mirror-symmetric about the centroid."""
    p, q = boundary_pts, np.roll(boundary_pts, -1, axis=0)
    cross = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
    A = 0.5 * cross.sum()
    cx = ((p[:, 0] + q[:, 0]) * cross).sum() / (6 * A)
    cy = ((p[:, 1] + q[:, 1]) * cross).sum() / (6 * A)
    lo, hi = p.min(axis=0), p.max(axis=0)
    dy = h * math.sqrt(3) / 2
    rows = np.arange(math.floor((lo[1] - cy) / dy) - 1, math.ceil((hi[1] - cy) / dy) + 2)
    kx = np.arange(math.floor((lo[0] - cx) / h) - 2, math.ceil((hi[0] - cx) / h) + 3)
    out = []
    for i in rows:
        off = 0.5 * (int(i) % 2)
        xs = cx + (kx + off) * h
        out.append(np.stack([xs, np.full_like(xs, cy + i * dy)], axis=1))
    return np.vstack(out)


def _rings(boundary: DomainBoundary, corner: int, size, h: float) -> list:
    """Arcs of points around a graded corner, innermost first."""
    arcs = boundary.arcs
    c = boundary.corners[corner]
    tau_out = arcs[corner].tangents(np.array([0.0]))[0]
    a0 = math.atan2(tau_out[1], tau_out[0])
    alpha = boundary.interior_angles[corner]
    rings = []
    r = float(size(c)[0])
    k = 0
    while True:
        s = float(size(c + r * tau_out)[0])
        if s >= h:
            break
        n = max(1, int(math.ceil(alpha * r / s)))
        th = a0 + alpha * (np.arange(n) + 0.5 * (1 + k % 2)) / (n + 1)
        rings.append(c + r * np.stack([np.cos(th), np.sin(th)], axis=1))
        r += s * math.sqrt(3) / 2
        k += 1
    return rings


def _accept(groups, fixed: np.ndarray, size, h, poly: _ConvexPolygon) -> np.ndarray:
    accepted = [fixed]
    for g in groups:
        if len(g) == 0:
            continue
        sz = size(g) if size is not None else np.full(len(g), h)
        inside = poly.distance(g) >= 0.5 * sz
        g, sz = g[inside], sz[inside]
        if len(g) == 0:
            continue
        d, _ = cKDTree(np.vstack(accepted)).query(g)
        keep = d >= 0.75 * sz
        accepted.append(g[keep])
    return np.vstack(accepted[1:]) if len(accepted) > 1 else np.empty((0, 2))


def _triangulate(P: np.ndarray) -> np.ndarray:
    t = Delaunay(P).simplices.astype(np.int64)
    a = _signed_areas(P, t)
    flip = a < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return _flip_slivers(P, t)


def _flip_slivers(P: np.ndarray, t: np.ndarray, max_rounds: int = 50) -> np.ndarray:
    """Remove flat triangles spanned by collinear boundary samples.

    Qhull may return a zero-area triangle (a, m, b) when ``m`` lies on the hull
    segment ab. Flipping ab with the neighbour (b, a, c) gives (a, m, c) and
    (m, b, c), both with positive area.
    """
    for _ in range(max_rounds):
        e = P[t[:, [1, 2, 0]]] - P[t]
        L2 = (e**2).sum(axis=2)
        area = _signed_areas(P, t)
        bad = np.nonzero(area <= 1e-10 * L2.max(axis=1))[0]
        if len(bad) == 0:
            return t
        edge_owner = {}
        for i, tri in enumerate(t.tolist()):
            for k in range(3):
                edge_owner[(tri[k], tri[(k + 1) % 3])] = i
        changed = False
        dead = set(bad.tolist())
        drop = []
        for i in bad.tolist():
            k = int(np.argmax(L2[i]))  # longest edge t[i,k] -> t[i,k+1]
            a, b, m = t[i, k], t[i, (k + 1) % 3], t[i, (k + 2) % 3]
            j = edge_owner.get((b, a))
            if j is None:
                # ab is a hull edge and m lies just inside it: the intended
                # boundary path is a-m-b, so the sliver is dropped
                drop.append(i)
                changed = True
                continue
            # a flat neighbour is handled in a later round
            if j in dead:
                continue
            c = [v for v in t[j].tolist() if v not in (a, b)][0]
            t[i] = (a, m, c)
            t[j] = (m, b, c)
            dead.update((i, j))
            changed = True
        if drop:
            t = np.delete(t, drop, axis=0)
        if not changed:
            return t
    return t


def _ray_exit(boundary: DomainBoundary, origin: np.ndarray, direction: np.ndarray, skip: int):
    """First boundary crossing of the ray ``origin + t * direction`` (t > 0).

    Returns ``(t, arc, s)``; ``arc`` is None when the ray leaves through a
    curved arc, where no exact parameter is computed.
    """
    best = (math.inf, None, 0.0)
    for k, arc in enumerate(boundary.arcs):
        if k == skip:
            continue
        if isinstance(arc, Segment):
            d = arc.b - arc.a
            det = direction[0] * (-d[1]) + d[0] * direction[1]
            if abs(det) < 1e-14:
                continue
            r = arc.a - origin
            t = (r[0] * (-d[1]) + d[0] * r[1]) / det
            v = (direction[0] * r[1] - direction[1] * r[0]) / det
            if t > 1e-12 and -1e-12 <= v <= 1 + 1e-12 and t < best[0]:
                best = (t, k, float(np.clip(v, 0, 1)) * arc.length)
        else:
            pts = arc.points(np.linspace(0, arc.length, 65))
            for a, b in zip(pts[:-1], pts[1:]):
                d = b - a
                det = direction[0] * (-d[1]) + d[0] * direction[1]
                if abs(det) < 1e-14:
                    continue
                r = a - origin
                t = (r[0] * (-d[1]) + d[0] * r[1]) / det
                v = (direction[0] * r[1] - direction[1] * r[0]) / det
                if t > 1e-12 and 0 <= v <= 1 and t < best[0]:
                    best = (t, None, 0.0)
    return best


def _ladder(boundary: DomainBoundary, bs: BoundarySamples, h: float, size=None) -> BoundarySamples:
    """Match boundary samples across thin strips next to sharp corners.

    At a corner below 90 degrees the mesh has no room for interior points, and
    independently sampled sides leave boundary edges with an obtuse opposite
    angle (a positive stiffness coupling). Where the strip over the longer
    straight side A is narrower than half the local mesh size (so a sample can
    sit inside the diametral circle of an opposite edge), both sides are
    resampled at common positions along A, so every rung is perpendicular to A.
    """
    arcs = boundary.arcs
    n = len(arcs)
    done = set()
    for c in range(n):
        if boundary.interior_angles[c] >= 0.5 * math.pi - 1e-9:
            continue
        cands = [(c - 1) % n, c]
        if not all(isinstance(arcs[k], Segment) for k in cands):
            continue
        ja = max(cands, key=lambda k: arcs[k].length)
        if ja in done:
            continue
        done.add(ja)
        A = arcs[ja]
        tau = (A.b - A.a) / A.length
        nin = np.array([-tau[1], tau[0]])

        on_a = bs.arc_ids == ja
        rel = bs.points - A.a
        u, ht = rel @ tau, rel @ nin
        # samples of other arcs inside the slab, by their foot on A
        straight = np.array([isinstance(arcs[k], Segment) for k in bs.arc_ids])
        loc = _local(size, bs.points, h)
        slab = straight & ~on_a & (ht > 1e-12) & (ht < 0.5 * loc) & (u > 1e-12) & (u < A.length - 1e-12)
        # samples of A whose normal ray stays short
        a_idx = np.flatnonzero(on_a & (bs.params > 0))
        a_hit = {i: _ray_exit(boundary, bs.points[i], nin, ja) for i in a_idx}
        a_zone = [i for i in a_idx if a_hit[i][0] < 0.5 * loc[i] and a_hit[i][1] is not None]
        if not a_zone and not slab.any():
            continue

        a_all = np.sort(np.append(bs.params[on_a], A.length))
        gaps = np.diff(a_all)

        def spacing(x):
            k = int(np.clip(np.searchsorted(a_all, x) - 1, 0, len(gaps) - 1))
            return gaps[k]

        # feet of corners are pinned; other positions closer than 0.3 local
        # spacings to a chosen one are merged away
        # corner feet and the untouched samples of A are pinned; other positions
        # closer than 0.3 local spacings to a chosen one are merged away
        stay = np.setdiff1d(np.flatnonzero(on_a), a_zone)
        fixed_x = [A.length] + bs.params[stay].tolist()
        chosen = fixed_x + u[slab & (bs.params == 0)].tolist()
        for x in sorted(set(bs.params[a_zone].tolist()) | set(u[slab].tolist())):
            if min(abs(x - y) for y in chosen) >= 0.3 * spacing(x):
                chosen.append(x)
        kept = sorted(chosen[len(fixed_x):])
        rungs = []
        for x in kept:
            t, k, sv = _ray_exit(boundary, A.a + x * tau, nin, ja)
            if t < 0.5 * _local(size, (A.a + x * tau)[None], h)[0] and k is not None:
                rungs.append((k, sv))

        remove = np.zeros(len(bs.points), dtype=bool)
        remove[a_zone] = True
        remove |= slab & (bs.params > 0)
        new_ids = np.concatenate([bs.arc_ids[~remove], np.full(len(kept), ja), [k for k, _ in rungs]]).astype(int)
        new_s = np.concatenate([bs.params[~remove], kept, [sv for _, sv in rungs]])
        keep = np.ones(len(new_s), dtype=bool)
        for k in range(n):
            # rungs landing on an existing corner are dropped
            keep &= ~((new_ids == k) & (new_s >= arcs[k].length - 1e-12))
        new_ids, new_s = new_ids[keep], new_s[keep]
        order = np.lexsort((new_s, new_ids))
        new_ids, new_s = new_ids[order], new_s[order]
        dup = np.zeros(len(new_s), dtype=bool)
        dup[1:] = (new_ids[1:] == new_ids[:-1]) & (np.diff(new_s) <= 1e-12)
        new_ids, new_s = new_ids[~dup], new_s[~dup]
        pts = np.vstack([arcs[k].points(np.array([sv]))[0] for k, sv in zip(new_ids, new_s)])
        bs = BoundarySamples(pts, new_ids, new_s)
    return bs


def _encroached(P: np.ndarray, t: np.ndarray, nb: int):
    """Boundary edges whose opposite mesh angle exceeds 90 degrees.

    Returns pairs (edge index, opposite vertex). Such an edge gets a positive
    off-diagonal stiffness entry, which breaks the sign structure of the
    discrete ground state.
    """
    out = []
    for k in range(3):
        a, b, c = t[:, k], t[:, (k + 1) % 3], t[:, (k + 2) % 3]
        on_bdry = (a < nb) & (b == (a + 1) % nb)
        u, v = P[a] - P[c], P[b] - P[c]
        cos = (u * v).sum(axis=1) / (np.hypot(*u.T) * np.hypot(*v.T))
        hit = np.nonzero(on_bdry & (cos < -1e-9))[0]
        out.extend(zip(a[hit].tolist(), c[hit].tolist()))
    return out


def _clear_encroachment(boundary: DomainBoundary, bs, free: np.ndarray, max_rounds: int = 60):
    """Remove obtuse angles opposite boundary edges.

    An interior point inside the diametral circle of a boundary edge is deleted.
    A boundary edge encroached by another boundary sample (a thin strip next to
    a sharp corner) is split at the foot of the perpendicular from that sample,
    which leaves two right angles.
    """
    lengths = boundary.lengths
    for _ in range(max_rounds):
        nb = len(bs.points)
        P = np.vstack([bs.points, free])
        t = _triangulate(P)
        hits = _encroached(P, t, nb)
        if not hits:
            return bs, free, t
        drop = sorted({c - nb for _, c in hits if c >= nb})
        free = np.delete(free, drop, axis=0)
        split = {}
        for e, c in hits:
            if c < nb and e not in split:
                split[e] = c
        if not split:
            continue
        pts, ids, prm = list(bs.points), list(bs.arc_ids), list(bs.params)
        for e in sorted(split, reverse=True):
            j = int(bs.arc_ids[e])
            nxt = (e + 1) % nb
            s0 = bs.params[e]
            s1 = bs.params[nxt] if nxt != 0 and bs.arc_ids[nxt] == j else lengths[j]
            a, b = bs.points[e], bs.points[nxt]
            d = b - a
            f = float(np.clip((P[split[e]] - a) @ d / (d @ d), 0.25, 0.75))
            sm = s0 + f * (s1 - s0)
            pts.insert(e + 1, boundary.arcs[j].points(np.array([sm]))[0])
            ids.insert(e + 1, j)
            prm.insert(e + 1, sm)
        bs = type(bs)(np.array(pts), np.array(ids), np.array(prm))
    return bs, free, _triangulate(np.vstack([bs.points, free]))


def _bars(t: np.ndarray, n: int) -> np.ndarray:
    e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e.sort(axis=1)
    key = np.unique(e[:, 0] * n + e[:, 1])
    return np.stack([key // n, key % n], axis=1)


def _relax(fixed, free, size, h, poly, n_iter):
    """Spring relaxation of the free points with the boundary samples held fixed.

    The connectivity is rebuilt only after some point has moved by more than
    a tenth of the local size since the last triangulation.
    """
    nf = len(fixed)
    if len(free) == 0:
        return free
    ttol = 0.1
    last = None
    dist = poly.distance(free)
    for _ in range(n_iter):
        P = np.vstack([fixed, free])
        if last is None or (np.hypot(*(free - last).T) > ttol * _local(size, free, h)).any():
            bars = _bars(_triangulate(P), len(P))
            last = free.copy()
        vec = P[bars[:, 1]] - P[bars[:, 0]]
        L = np.hypot(vec[:, 0], vec[:, 1])
        mid = 0.5 * (P[bars[:, 1]] + P[bars[:, 0]])
        hb = _local(size, mid, h)
        L0 = hb * _FSCALE * math.sqrt((L**2).sum() / (hb**2).sum())
        F = np.maximum(L0 - L, 0.0)
        Fv = (F / L)[:, None] * vec
        tot = np.zeros_like(P)
        np.add.at(tot, bars[:, 0], -Fv)
        np.add.at(tot, bars[:, 1], Fv)
        move = _DT * tot[nf:]
        cand = free + move
        sz = _local(size, cand, h)
        dcand = dist - np.hypot(move[:, 0], move[:, 1])
        near = dcand < 0.3 * sz
        dcand[near] = poly.distance(cand[near])
        ok = dcand >= 0.3 * sz
        cand[~ok] = free[~ok]
        dist = np.where(ok, dcand, dist)
        step = np.hypot(*(cand - free).T).max() if len(cand) else 0.0
        free = cand
        if step < 1e-4 * h:
            break
    return free


def _local(size, x, h):
    return size(x) if size is not None else np.full(len(x), h)


def generate(
    boundary: DomainBoundary,
    h: float,
    grading: Optional[Grading] = None,
    relax_iterations: int = 60,
    retries: int = 3,
) -> Mesh:
    """Triangulate a validated convex domain with target edge length ``h``.

    Raises
    ------
    ValueError
        If the boundary is not an accepted convex boundary or ``h`` exceeds the
        domain diameter.
    MeshQualityError
        If the minimum angle stays below the quality floor after ``retries``
        relaxation rounds.
    """
    boundary.require_valid()
    if not h > 0:
        raise ValueError("h must be positive")
    if h > boundary.diameter:
        raise ValueError(f"h={h} exceeds the domain diameter {boundary.diameter:.4g}")

    size = _size_function(boundary, h, grading)
    bs = _ladder(boundary, boundary_samples(boundary, h, size), h, size)
    fixed = bs.points
    poly = _ConvexPolygon(fixed)

    groups = []
    if grading is not None:
        rings = [_rings(boundary, c, size, h) for c in grading.corners]
        depth = max((len(r) for r in rings), default=0)
        for k in range(depth):
            for r in rings:
                if k < len(r):
                    groups.append(r[k])
    lat = _lattice(fixed, h)
    if size is not None:
        lat = lat[size(lat) >= h * (1 - 1e-12)]
    groups.append(lat)
    free = _accept(groups, fixed, size, h, poly)

    floor = quality_floor(boundary)
    iters = relax_iterations
    for attempt in range(retries + 1):
        free = _relax(fixed, free, size, h, poly, iters)
        bs, free, tris = _clear_encroachment(boundary, bs, free)
        fixed = bs.points
        P = np.vstack([fixed, free])
        min_ang = _angles_deg(P, tris).min(axis=1)
        if min_ang.min() >= floor:
            break
        iters *= 2
    else:
        worst = int(np.argmin(min_ang))
        raise MeshQualityError(
            f"minimum angle {min_ang[worst]:.2f} deg below floor {floor:.2f} deg "
            f"at triangle {P[tris[worst]].tolist()}"
        )

    n = len(fixed)
    idx = np.arange(n)
    bedges = np.stack([idx, (idx + 1) % n], axis=1)
    nxt = np.roll(np.arange(n), -1)
    s0 = bs.params
    # the last sample wraps to the start of arc 0; close that edge at the arc end
    same = (bs.arc_ids[nxt] == bs.arc_ids) & (nxt != 0)
    lengths = boundary.lengths
    s1 = np.where(same, bs.params[nxt], lengths[bs.arc_ids])
    mesh = Mesh(
        vertices=P,
        triangles=tris,
        boundary_edges=bedges,
        boundary_arcs=bs.arc_ids.copy(),
        boundary_params=np.stack([s0, s1], axis=1),
        h_nominal=float(h),
        level=0,
        grading=grading,
    )
    _check_conforming(mesh)
    return mesh


def _check_conforming(mesh: Mesh) -> None:
    n = mesh.n_vertices
    ekeys = set((mesh.edges() @ np.array([n, 1])).tolist())
    b = np.sort(mesh.boundary_edges, axis=1) @ np.array([n, 1])
    missing = [k for k in b.tolist() if k not in ekeys]
    if missing:
        raise MeshQualityError(f"{len(missing)} boundary edges missing from the triangulation")
    if np.any(mesh.areas() <= 0):
        raise MeshQualityError("triangulation has non-positive triangle areas")


def refine(mesh: Mesh, boundary: DomainBoundary) -> Mesh:
    """Split every triangle into four; boundary midpoints are snapped onto their arc."""
    v, t = mesh.vertices, mesh.triangles
    n, m = len(v), len(t)
    e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    keys = np.sort(e, axis=1) @ np.array([n, 1], dtype=np.int64)
    uniq, inv = np.unique(keys, return_inverse=True)
    ua, ub = uniq // n, uniq % n
    mids = 0.5 * (v[ua] + v[ub])

    bkeys = np.sort(mesh.boundary_edges, axis=1) @ np.array([n, 1], dtype=np.int64)
    bpos = np.searchsorted(uniq, bkeys)
    smid = mesh.boundary_params.mean(axis=1)
    for j, arc in enumerate(boundary.arcs):
        sel = mesh.boundary_arcs == j
        if np.any(sel):
            mids[bpos[sel]] = arc.points(smid[sel])

    mid = n + inv
    m01, m12, m20 = mid[:m], mid[m : 2 * m], mid[2 * m :]
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.vstack(
        [
            np.stack([a, m01, m20], axis=1),
            np.stack([m01, b, m12], axis=1),
            np.stack([m20, m12, c], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ]
    )
    bm = n + bpos
    be = mesh.boundary_edges
    new_edges = np.empty((2 * len(be), 2), dtype=np.int64)
    new_edges[0::2] = np.stack([be[:, 0], bm], axis=1)
    new_edges[1::2] = np.stack([bm, be[:, 1]], axis=1)
    s0, s1 = mesh.boundary_params[:, 0], mesh.boundary_params[:, 1]
    new_params = np.empty((2 * len(be), 2))
    new_params[0::2] = np.stack([s0, smid], axis=1)
    new_params[1::2] = np.stack([smid, s1], axis=1)
    return Mesh(
        vertices=np.vstack([v, mids]),
        triangles=tris,
        boundary_edges=new_edges,
        boundary_arcs=np.repeat(mesh.boundary_arcs, 2),
        boundary_params=new_params,
        h_nominal=0.5 * mesh.h_nominal,
        level=mesh.level + 1,
        grading=mesh.grading,
    )


def mesh_family(
    boundary: DomainBoundary, h0: float, levels: int, grading: Optional[Grading] = None
) -> list:
    """Nested sequence of ``levels`` meshes starting at size ``h0``."""
    meshes = [generate(boundary, h0, grading)]
    for _ in range(levels - 1):
        meshes.append(refine(meshes[-1], boundary))
    return meshes


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text dump: node, element and boundary-edge blocks, zero-based indices."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# zaremba mesh, h={mesh.h:.17g}, level={mesh.level}\n")
        fh.write(f"nodes {mesh.n_vertices}\n")
        for i, (x, y) in enumerate(mesh.vertices):
            fh.write(f"{i} {x:.17g} {y:.17g}\n")
        fh.write(f"elements {mesh.n_triangles}\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            fh.write(f"{i} {a} {b} {c}\n")
        fh.write(f"boundary {len(mesh.boundary_edges)}\n")
        for i, ((a, b), arc, (s0, s1)) in enumerate(
            zip(mesh.boundary_edges, mesh.boundary_arcs, mesh.boundary_params)
        ):
            fh.write(f"{i} {a} {b} {arc} {s0:.17g} {s1:.17g}\n")


def read_mesh(path, h_nominal: Optional[float] = None) -> Mesh:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    blocks, i = {}, 0
    while i < len(lines):
        name, count = lines[i][0], int(lines[i][1])
        blocks[name] = lines[i + 1 : i + 1 + count]
        i += 1 + count
    nodes = np.array([[float(r[1]), float(r[2])] for r in blocks["nodes"]])
    tris = np.array([[int(r[1]), int(r[2]), int(r[3])] for r in blocks["elements"]], dtype=np.int64)
    b = blocks["boundary"]
    bedges = np.array([[int(r[1]), int(r[2])] for r in b], dtype=np.int64)
    barcs = np.array([int(r[3]) for r in b], dtype=np.int64)
    bparams = np.array([[float(r[4]), float(r[5])] for r in b])
    mesh = Mesh(nodes, tris, bedges, barcs, bparams, h_nominal or 0.0)
    if h_nominal is None:
        object.__setattr__(mesh, "h_nominal", mesh.h)
    return mesh
