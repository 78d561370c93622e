"""P1 finite elements for the mixed Dirichlet-Neumann Laplacian.

The lowest eigenvalue is the minimum of the Rayleigh quotient
``int |grad u|^2 / int u^2`` over continuous piecewise-linear functions that
vanish on the Dirichlet arcs. Neumann conditions are natural and need no
treatment; Dirichlet vertices are eliminated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .mesh import Mesh

logger = logging.getLogger(__name__)

__all__ = [
    "DofMap",
    "EigenResult",
    "Extrapolation",
    "SolverError",
    "element_matrices",
    "assemble_global",
    "assemble",
    "solve_smallest",
    "rayleigh_quotient",
    "extrapolate",
    "solve_levels",
]

CG_MAXITER = 10_000
POWER_MAXITER = 500
STAGNATION_STEPS = 20
STAGNATION_FACTOR = 1e3


class SolverError(RuntimeError):
    """Iterative solver failed to converge."""


@dataclass(frozen=True)
class DofMap:
    """Split of mesh vertices into free and Dirichlet-constrained degrees of freedom."""

    n_vertices: int
    free: np.ndarray
    constrained: np.ndarray

    def expand(self, values: np.ndarray) -> np.ndarray:
        """Vertex values from free-DOF values (zero on constrained vertices)."""
        out = np.zeros(self.n_vertices)
        out[self.free] = values
        return out


@dataclass
class EigenResult:
    eigenvalue: float
    vector: np.ndarray
    residual: float
    h: float
    n_dofs: int
    iterations: int = 0
    note: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "lambda": self.eigenvalue,
            "residual": self.residual,
            "h": self.h,
            "n_dofs": self.n_dofs,
            "iterations": self.iterations,
        }
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class Extrapolation:
    """Fit ``lambda_h = value + C h**order``; ``flag`` is ``None`` when the fit is clean."""

    value: float
    order: float
    error: float
    flag: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "lambda_inf": self.value,
            "observed_order": self.order,
            "error_estimate": self.error,
            "flag": self.flag,
        }


def element_matrices(coords: np.ndarray):
    """Stiffness and consistent mass matrix of one linear triangle.

    Parameters
    ----------
    coords : array of shape (3, 2)

    Returns
    -------
    K, M : arrays of shape (3, 3)
    """
    K, M = _local_matrices(np.asarray(coords, dtype=float)[None])
    return K[0], M[0]


def _local_matrices(X: np.ndarray):
    # X: (m, 3, 2)
    e0 = X[:, 2] - X[:, 1]
    e1 = X[:, 0] - X[:, 2]
    e2 = X[:, 1] - X[:, 0]
    area = 0.5 * (e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0]))
    E = np.stack([e0, e1, e2], axis=1)  # edge opposite each vertex
    K = np.einsum("mik,mjk->mij", E, E) / (4.0 * area)[:, None, None]
    M = (area / 12.0)[:, None, None] * (np.ones((3, 3)) + np.eye(3))
    return K, M


def assemble_global(mesh: Mesh):
    """Unconstrained stiffness and mass matrices (CSR)."""
    t = mesh.triangles
    K_loc, M_loc = _local_matrices(mesh.vertices[t])
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    K = sp.csr_matrix((K_loc.ravel(), (rows, cols)), shape=(n, n))
    M = sp.csr_matrix((M_loc.ravel(), (rows, cols)), shape=(n, n))
    return K, M


def dof_map(mesh: Mesh, dirichlet_arcs: Iterable[int]) -> DofMap:
    constrained = mesh.vertices_on_arcs(set(dirichlet_arcs))
    free = np.setdiff1d(np.arange(mesh.n_vertices), constrained)
    return DofMap(mesh.n_vertices, free, constrained)


def assemble(mesh: Mesh, dirichlet_arcs: Iterable[int]):
    """Stiffness and mass matrices restricted to the free DOFs.

    A vertex is constrained when it lies on the closure of a Dirichlet arc, so
    corners shared with a Neumann arc are constrained too.

    Returns
    -------
    K, M : scipy.sparse.csr_matrix
    dofs : DofMap
    """
    dirichlet_arcs = set(dirichlet_arcs)
    if not dirichlet_arcs:
        raise ValueError("at least one Dirichlet arc is required (pure Neumann has lambda_1 = 0)")
    dofs = dof_map(mesh, dirichlet_arcs)
    if len(dofs.constrained) == 0:
        raise ValueError(f"no mesh vertex lies on Dirichlet arcs {sorted(dirichlet_arcs)}")
    K, M = assemble_global(mesh)
    f = dofs.free
    return K[f][:, f].tocsr(), M[f][:, f].tocsr(), dofs


def rayleigh_quotient(u, K, M) -> float:
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise ValueError("Rayleigh quotient of the zero vector")
    return float(u @ (K @ u)) / float(u @ (M @ u))


def _m_orthonormalize(S: np.ndarray, M) -> np.ndarray:
    """M-orthonormal basis of span(S) via two rounds of SVQB, dropping near-dependent directions."""
    for _ in range(2):
        G = S.T @ (M @ S)
        d = 1.0 / np.sqrt(np.abs(np.diag(G)))
        G = d[:, None] * G * d[None, :]
        w, V = la.eigh(G)
        keep = w > 1e-14 * w.max()
        S = (S * d) @ (V[:, keep] / np.sqrt(w[keep]))
    return S


def _block_pcg(K, B, X0, dinv, rtol, maxiter):
    """Jacobi-preconditioned CG for each column of ``K X = B`` simultaneously."""
    X = X0.copy()
    R = B - K @ X
    target = rtol * np.linalg.norm(R, axis=0) + 1e-15 * np.linalg.norm(B, axis=0)
    Z = dinv[:, None] * R
    P = Z.copy()
    rz = np.einsum("ij,ij->j", R, Z)
    active = np.linalg.norm(R, axis=0) > target
    it = 0
    while np.any(active):
        if it >= maxiter:
            res = np.linalg.norm(R, axis=0)
            raise SolverError(
                f"CG did not converge in {maxiter} iterations "
                f"(residuals {res.tolist()}, targets {target.tolist()})"
            )
        KP = K @ P
        pkp = np.einsum("ij,ij->j", P, KP)
        alpha = np.where(active, rz / np.where(pkp == 0, 1.0, pkp), 0.0)
        X += alpha * P
        R -= alpha * KP
        Z = dinv[:, None] * R
        rz_new = np.einsum("ij,ij->j", R, Z)
        beta = np.where(active, rz_new / np.where(rz == 0, 1.0, rz), 0.0)
        P = Z + beta * P
        rz = rz_new
        active = np.linalg.norm(R, axis=0) > target
        it += 1
    return X, it


def solve_smallest(
    K,
    M,
    tol: float = 1e-10,
    *,
    block_size: int = 3,
    maxiter: int = POWER_MAXITER,
    cg_maxiter: int = CG_MAXITER,
    inner: str = "cg",
    inner_rtol: float = 1e-3,
    h: float = float("nan"),
    seed: int = 0,
) -> EigenResult:
    """Smallest eigenpair of ``K u = lambda M u``.

    Block inverse iteration: each step solves ``K Y = M X`` (Jacobi-preconditioned
    CG by default, or a sparse LU factorization with ``inner="lu"``) and
    takes Rayleigh-Ritz approximations from ``span[X, Y]``. Iteration stops when
    ``||K u - lambda M u|| <= tol * lambda * ||M u||``.

    The returned vector is M-normalized with positive mean.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n = K.shape[0]
    if n == 0:
        raise ValueError("no free degrees of freedom")
    b = max(1, min(block_size, n))
    if n <= 2 * b:
        w, V = la.eigh(K.toarray(), M.toarray())
        u = V[:, 0]
        lam = float(w[0])
        r = K @ u - lam * (M @ u)
        res = float(np.linalg.norm(r) / (abs(lam) * np.linalg.norm(M @ u)))
        u, lam, res = _positive_sweep(_normalize(u, M), lam, res, K, M, tol)
        return EigenResult(lam, u, res, h, n, 0)

    rng = np.random.default_rng(seed)
    X = np.empty((n, b))
    X[:, 0] = 1.0
    X[:, 1:] = rng.standard_normal((n, b - 1))
    X = _m_orthonormalize(X, M)
    A = X.T @ (K @ X)
    theta, C = la.eigh(0.5 * (A + A.T))
    X = X @ C
    theta = theta[: X.shape[1]]

    if inner == "lu":
        lu = spla.splu(K.tocsc())
        solve = lambda rhs, guess: (lu.solve(rhs), 0)  # noqa: E731
    elif inner == "cg":
        dinv = 1.0 / K.diagonal()

        def solve(rhs, guess):
            return _block_pcg(K, rhs, guess, dinv, inner_rtol, cg_maxiter)

    else:
        raise ValueError(f"unknown inner solver {inner!r}")

    res = best = math.inf
    since_best = 0
    note = None
    for it in range(1, maxiter + 1):
        MX = M @ X
        R = K @ X[:, :1] - theta[0] * MX[:, :1]
        res = float(np.linalg.norm(R) / (abs(theta[0]) * np.linalg.norm(MX[:, 0])))
        if res <= tol:
            break
        # round-off floor: on strongly graded meshes the residual can stall just
        # above tol; the eigenvalue error is quadratic in the residual
        if res < 0.9 * best:
            best, since_best = res, 0
        else:
            since_best += 1
        if since_best >= STAGNATION_STEPS and best <= STAGNATION_FACTOR * tol:
            note = f"residual stagnated at {best:.3e} (round-off floor)"
            logger.info(note)
            break
        Y, _ = solve(MX, X / theta[None, :])
        Q = _m_orthonormalize(np.hstack([X, Y]), M)
        A = Q.T @ (K @ Q)
        w, C = la.eigh(0.5 * (A + A.T))
        X = Q @ C[:, :b]
        theta = w[:b]
    else:
        raise SolverError(
            f"inverse iteration did not reach tol={tol:g} in {maxiter} steps (residual {res:.3e})"
        )
    u = _normalize(X[:, 0], M)
    lam = rayleigh_quotient(u, K, M)
    u, lam, res = _positive_sweep(u, lam, res, K, M, tol)
    return EigenResult(lam, u, res, h, n, it, note)


def _normalize(u, M):
    u = u / math.sqrt(float(u @ (M @ u)))
    return -u if u.sum() < 0 else u


def _positive_sweep(u, lam, res, K, M, tol=None, eta: float = 1e-11, max_sweeps: int = 200):
    """Recompute the unresolved entries of a ground state without cancellation.

    Entries below ``eta * max(u)`` are not resolved by the inner solves: near a
    sharp Dirichlet corner the exact values can be many orders below 1e-16,
    and the computed ones carry round-off signs. They are recomputed from
    their own rows of ``K u = lam M u``, ``u_i = (lam (M u)_i + (N u)_i) / K_ii``
    with ``N = -offdiag(K)``, by Jacobi sweeps over that set while the
    resolved entries stay fixed. Where those rows have no positive coupling
    every term is positive; each sweep spreads positivity by one layer of
    neighbours. The result is kept only if all entries are positive and the
    residual stays below ``max(tol, 1.1 * res)``; the slack covers round-off
    noise when the solve stopped at its residual floor.
    """
    if u.min() > 0:
        return u, lam, res
    small = np.flatnonzero(u <= eta * u.max())
    Kc = K.tocsr()
    d = Kc.diagonal()
    Ks = Kc[small]
    Ms = M.tocsr()[small]
    w = np.maximum(u, 0.0)
    for _ in range(max_sweeps):
        # (K u)_i - K_ii u_i is the coupling part; negating it gives N u
        w[small] = (lam * (Ms @ w) - (Ks @ w - d[small] * w[small])) / d[small]
        if w.min() > 0:
            break
    else:
        return u, lam, res
    w = _normalize(w, M)
    lam_w = rayleigh_quotient(w, K, M)
    Mw = M @ w
    res_w = float(np.linalg.norm(K @ w - lam_w * Mw) / (abs(lam_w) * np.linalg.norm(Mw)))
    if res_w > max(tol if tol is not None else 0.0, 1.1 * res):
        return u, lam, res
    return w, lam_w, res_w


def extrapolate(results: Sequence, hs: Optional[Sequence[float]] = None) -> Extrapolation:
    """Fit ``lambda_h = lambda_inf + C h**p`` through the last three levels.

    ``results`` are :class:`EigenResult` objects (or plain eigenvalues together
    with ``hs``). A non-monotone sequence, or an observed order outside
    ``(0.5, 2.5]``, is flagged.
    """
    if hs is None:
        lams = np.array([r.eigenvalue for r in results], dtype=float)
        hs = np.array([r.h for r in results], dtype=float)
    else:
        lams = np.asarray(results, dtype=float)
        hs = np.asarray(hs, dtype=float)
    if len(lams) < 3:
        raise ValueError("extrapolation needs at least three levels")
    l1, l2, l3 = lams[-3:]
    h1, h2, h3 = hs[-3:]
    d1, d2 = l1 - l2, l2 - l3
    if d1 == 0 and d2 == 0:
        return Extrapolation(float(l3), math.nan, 0.0, "constant")
    if d1 * d2 <= 0 or abs(d2) >= abs(d1):
        est = max(abs(d1), abs(d2))
        return Extrapolation(float(l3), math.nan, est, "non-monotone")
    q = d1 / d2
    r1, r2 = h1 / h2, h2 / h3
    if abs(r1 - r2) <= 1e-9 * r2:
        p = math.log(q) / math.log(r2)
    else:
        f = lambda p: (h1**p - h2**p) / (h2**p - h3**p) - q  # noqa: E731
        p = brentq(f, 1e-3, 20.0)
    C = d2 / (h2**p - h3**p)
    lam_inf = l3 - C * h3**p
    flag = None if 0.5 < p <= 2.5 else "order-out-of-range"
    return Extrapolation(float(lam_inf), float(p), float(abs(l3 - lam_inf)), flag)


def solve_levels(meshes: Sequence[Mesh], dirichlet_arcs, tol: float = 1e-10, **kw) -> list:
    """Solve on each mesh of a family; returns one :class:`EigenResult` per level."""
    out = []
    for m in meshes:
        K, M, dofs = assemble(m, dirichlet_arcs)
        r = solve_smallest(K, M, tol, h=m.h_nominal, **kw)
        logger.debug("level %d: n=%d lambda=%.12g it=%d", m.level, r.n_dofs, r.eigenvalue, r.iterations)
        out.append(r)
    return out
