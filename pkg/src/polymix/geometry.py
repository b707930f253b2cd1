"""Convex-polytope predicates: extreme points, affine hulls, exposure.

The membership and extremeness tests reduce to one simplex-constrained least
squares problem each, solved by an accelerated projected-gradient loop.  At
the sizes that arise here (tens of points) this is far cheaper and sturdier
than pulling in an LP solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

RANK_RTOL = 1e-8
MEMBERSHIP_RTOL = 1e-7
MAX_PG_ITERS = 500
PG_TOL = 1e-10


@dataclass
class PolytopeSet:
    """K vertex-candidate matrices (D x d each) plus a shared tolerance.

    ``tol`` is the absolute distance threshold for membership and hull
    comparisons; if None it defaults to 1e-7 times the diameter of the pooled
    point cloud.  Rank decisions always use a relative 1e-8 cutoff.
    """

    polys: np.ndarray
    tol: Optional[float] = None

    def __post_init__(self):
        self.polys = np.asarray(self.polys, dtype=float)
        if self.polys.ndim != 3:
            raise ValueError("polys must have shape (K, D, d)")
        if not np.all(np.isfinite(self.polys)):
            raise ValueError("polys must be finite")
        if self.tol is not None and self.tol < 0:
            raise ValueError("tol must be >= 0")

    @property
    def K(self) -> int:
        return self.polys.shape[0]

    def pooled_points(self) -> np.ndarray:
        """All K*d vertices as rows, component-major order."""
        K, D, d = self.polys.shape
        return np.swapaxes(self.polys, 1, 2).reshape(K * d, D)

    def resolved_tol(self) -> float:
        if self.tol is not None:
            return float(self.tol)
        pts = self.pooled_points()
        diam = _diameter(pts)
        return MEMBERSHIP_RTOL * (diam if diam > 0 else 1.0)


def _diameter(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    sq = np.sum(points**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * points @ points.T
    return float(np.sqrt(max(d2.max(), 0.0)))


def affine_dimension(points: np.ndarray, tol: float = RANK_RTOL) -> int:
    """Dimension of the affine hull: rank of the centered point matrix."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 1:
        raise ValueError("need at least one point")
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    if s.size == 0:
        return 0
    scale = s[0] if s[0] > 0 else 1.0
    return int(np.sum(s > tol * scale))


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    lam = css[rho - 1] / rho
    return np.maximum(v - lam, 0.0)


def _kkt_solve(G: np.ndarray, b: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Equality-constrained LS on the free coordinates: sum lambda_free = 1."""
    k = len(idx)
    KKT = np.zeros((k + 1, k + 1))
    KKT[:k, :k] = G[np.ix_(idx, idx)]
    KKT[:k, k] = 1.0
    KKT[k, :k] = 1.0
    rhs = np.concatenate([b[idx], [1.0]])
    sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
    return sol[:k]


def simplex_lsq_distance(A: np.ndarray, p: np.ndarray) -> float:
    """min over lambda in the simplex of ||A lambda - p||, A of shape (D, m).

    Active-set iteration on the nonnegativity bounds with an equality KKT
    solve per step (Lawson-Hanson style); finite termination, capped at
    MAX_PG_ITERS outer steps.  Exact to roundoff at the point counts used by
    the geometry predicates.
    """
    m = A.shape[1]
    if m == 1:
        return float(np.linalg.norm(A[:, 0] - p))
    G = A.T @ A
    b = A.T @ p
    free = np.ones(m, dtype=bool)
    lam = np.full(m, 1.0 / m)
    for _ in range(MAX_PG_ITERS):
        idx = np.where(free)[0]
        lam_f = _kkt_solve(G, b, idx)
        cand = np.zeros(m)
        cand[idx] = lam_f
        if np.min(lam_f) >= -PG_TOL:
            cand = np.maximum(cand, 0.0)
            s = cand.sum()
            if s > 0:
                cand /= s
            lam = cand
            if np.all(free):
                break
            g = G @ lam - b
            nu = float(np.mean(g[idx]))
            bound = np.where(~free)[0]
            mu = g[bound] - nu
            scale = 1.0 + abs(nu)
            if np.min(mu) >= -1e-10 * scale:
                break
            free[bound[np.argmin(mu)]] = True  # release the worst multiplier
        else:
            # move toward the candidate until a coordinate hits zero
            d = cand - lam
            dec = d < -1e-300
            steps = -lam[dec] / d[dec]
            alpha = min(1.0, float(steps.min())) if np.any(dec) else 1.0
            lam = np.maximum(lam + alpha * d, 0.0)
            s = lam.sum()
            if s > 0:
                lam /= s
            free &= lam > 0.0
            if not np.any(free):  # numerical corner: restart from a vertex
                free[int(np.argmax(b))] = True
    return float(np.linalg.norm(A @ lam - p))


def is_extreme_point(idx: int, points: np.ndarray, tol: float) -> bool:
    """True iff points[idx] is not a convex combination of the others (within tol)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m = points.shape[0]
    if m < 2:
        raise ValueError("need at least two points")
    others = np.delete(points, idx, axis=0)
    dist = simplex_lsq_distance(others.T, points[idx])
    return dist > tol


def hull_membership_distance(point: np.ndarray, vertices: np.ndarray) -> float:
    """Distance from a point to the convex hull of the given vertex rows."""
    return simplex_lsq_distance(np.atleast_2d(vertices).T.copy(), np.asarray(point, dtype=float))


def _affine_basis(points: np.ndarray):
    """Centroid and orthonormal basis of the affine hull of the rows."""
    c = points.mean(axis=0)
    centered = points - c
    u, s, _ = np.linalg.svd(centered.T, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        return c, np.zeros((points.shape[1], 0))
    r = int(np.sum(s > RANK_RTOL * s[0]))
    return c, u[:, :r]


def _affine_residual(point: np.ndarray, center: np.ndarray, basis: np.ndarray) -> float:
    v = point - center
    return float(np.linalg.norm(v - basis @ (basis.T @ v)))


def check_assumption_a(ps: PolytopeSet):
    """Pairwise-distinct affine hulls of the component polytopes.

    Two hulls count as equal when they have the same affine dimension and all
    vertices of each lie within tol of the other's hull.  Returns
    ``(ok, reports)`` where each report carries the pair, its dimensions and
    the largest cross residual so near-coincident hulls can be judged by the
    caller.
    """
    K = ps.K
    tol = ps.resolved_tol()
    verts = [ps.polys[k].T for k in range(K)]  # (d, D) rows per component
    dims = [affine_dimension(v) for v in verts]
    bases = [_affine_basis(v) for v in verts]
    reports = []
    ok = True
    for k in range(K):
        for kk in range(k + 1, K):
            resid = 0.0
            for p in verts[kk]:
                resid = max(resid, _affine_residual(p, *bases[k]))
            for p in verts[k]:
                resid = max(resid, _affine_residual(p, *bases[kk]))
            equal = dims[k] == dims[kk] and resid <= tol
            if equal:
                ok = False
            reports.append(
                {"pair": (k, kk), "dims": (dims[k], dims[kk]), "max_residual": resid,
                 "equal_hulls": equal}
            )
    return ok, reports


def check_total_exposure(ps: PolytopeSet):
    """Every vertex extreme in the pooled cloud and in exactly one polytope.

    Returns ``(ok, reports)``; reports list each failing vertex with the
    violated clause ("not_extreme" and/or the other polytopes containing it).
    """
    K, D, d = ps.polys.shape
    tol = ps.resolved_tol()
    pooled = ps.pooled_points()
    reports = []
    ok = True
    for k in range(K):
        for j in range(d):
            idx = k * d + j
            extreme = is_extreme_point(idx, pooled, tol)
            contained_in = []
            for kk in range(K):
                if kk == k:
                    continue
                if hull_membership_distance(ps.polys[k][:, j], ps.polys[kk].T) <= tol:
                    contained_in.append(kk)
            if not extreme or contained_in:
                ok = False
                reports.append(
                    {"component": k, "vertex": j, "extreme": bool(extreme),
                     "contained_in": contained_in}
                )
    return ok, reports
