"""Permutation-matched parameter distance and density-divergence estimators.

The distance between two parameter records minimizes, over component
relabellings, the sum of per-component costs; each per-component cost itself
minimizes over end-member column relabellings.  Both layers are exact linear
assignment problems.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from polymix.params import EvalReport, LatentAtoms, MixtureParams


def d_m(theta_a: np.ndarray, theta_b: np.ndarray):
    """Column-matched distance between two D x d end-member matrices.

    Returns ``(value, perm)`` where value = min over permutations tau of
    sum_j ||theta_a[:, j] - theta_b[:, tau(j)]|| and perm is an optimal tau.
    """
    theta_a = np.asarray(theta_a, dtype=float)
    theta_b = np.asarray(theta_b, dtype=float)
    if theta_a.shape != theta_b.shape:
        raise ValueError(f"shape mismatch: {theta_a.shape} vs {theta_b.shape}")
    diff = theta_a.T[:, None, :] - theta_b.T[None, :, :]
    cost = np.linalg.norm(diff, axis=2)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty_like(cols)
    perm[rows] = cols
    return float(cost[rows, cols].sum()), perm


def metric_d(psi_a: MixtureParams, psi_b: MixtureParams) -> EvalReport:
    """Component- and vertex-matched pseudometric between parameter records."""
    if (psi_a.K, psi_a.d, psi_a.D) != (psi_b.K, psi_b.d, psi_b.D):
        raise ValueError("parameter records must share (K, d, D)")
    K = psi_a.K
    cell = np.empty((K, K))
    perms = [[None] * K for _ in range(K)]
    for a in range(K):
        for b in range(K):
            val, perm = d_m(psi_a.theta[a], psi_b.theta[b])
            cell[a, b] = (
                val
                + abs(psi_a.pi[a] - psi_b.pi[b])
                + abs(psi_a.sigma2[a] - psi_b.sigma2[b])
            )
            perms[a][b] = perm
    rows, cols = linear_sum_assignment(cell)
    comp_perm = np.empty_like(cols)
    comp_perm[rows] = cols
    per_component = []
    vertex_perms = []
    total = 0.0
    for a in range(K):
        b = int(comp_perm[a])
        dm_val, _ = d_m(psi_a.theta[a], psi_b.theta[b])
        rec = {
            "d_M": dm_val,
            "pi_gap": float(abs(psi_a.pi[a] - psi_b.pi[b])),
            "sigma2_gap": float(abs(psi_a.sigma2[a] - psi_b.sigma2[b])),
        }
        per_component.append(rec)
        vertex_perms.append([int(j) for j in perms[a][b]])
        total += rec["d_M"] + rec["pi_gap"] + rec["sigma2_gap"]
    return EvalReport(
        distance=total,
        component_perm=[int(c) for c in comp_perm],
        vertex_perms=vertex_perms,
        per_component=per_component,
    )


def kl_upper_bound(eps: float, D: int, diam_T: float, diam_S: float, sigma_min2: float) -> float:
    """Bound on KL(p_a || p_b) in terms of the parameter distance eps.

    Valid for parameters confined to a compact vertex set of diameter diam_T
    and variance range of diameter diam_S with variances >= sigma_min2.
    """
    if sigma_min2 <= 0:
        raise ValueError("sigma_min2 must be > 0")
    if eps < 0 or D <= 0 or diam_T <= 0 or diam_S <= 0:
        raise ValueError("arguments must be positive (eps >= 0)")
    C = D + (diam_T**2 + D * diam_S) / 2.0
    return (eps**2 + C * eps) / (2.0 * sigma_min2)


def infer_bound_envelope(psi_a: MixtureParams, psi_b: MixtureParams):
    """Tightest (diam_T, diam_S, sigma_min2) containing both parameter records.

    These are inferred quantities; the bound only applies to parameters inside
    the inferred compact set.
    """
    pts = np.concatenate(
        [np.swapaxes(psi_a.theta, 1, 2).reshape(-1, psi_a.D),
         np.swapaxes(psi_b.theta, 1, 2).reshape(-1, psi_b.D)]
    )
    from polymix.geometry import _diameter

    diam_T = _diameter(pts)
    s_all = np.concatenate([psi_a.sigma2, psi_b.sigma2])
    diam_S = float(s_all.max() - s_all.min())
    return diam_T, diam_S, float(s_all.min())


def _atoms_for(psi: MixtureParams, atoms_m: int, seed: int, quadrature: bool) -> LatentAtoms:
    if quadrature and psi.d <= 2:
        return LatentAtoms.grid(psi.d, atoms_m, psi.alpha)
    return LatentAtoms.sample(psi.d, atoms_m, psi.alpha, seed)


def estimate_kl_mc(
    psi_a: MixtureParams,
    psi_b: MixtureParams,
    n_samples: int,
    seed: int = 0,
    atoms_m: int = 2000,
):
    """Monte Carlo KL(p_a || p_b): mean of log p_a(X) - log p_b(X), X ~ p_a.

    Returns ``(estimate, standard_error)``.  Densities use quadrature atoms
    when d <= 2 (deterministic), sampled atoms otherwise.
    """
    if psi_a.D != psi_b.D:
        raise ValueError("models must share the ambient dimension D")
    from polymix.density import logpdf_rows
    from polymix.simulate import simulate

    data = simulate(psi_a, n_samples, seed)
    atoms_a = _atoms_for(psi_a, atoms_m, seed + 1, quadrature=True)
    atoms_b = _atoms_for(psi_b, atoms_m, seed + 2, quadrature=True)
    vals = logpdf_rows(data.X, psi_a, atoms_a) - logpdf_rows(data.X, psi_b, atoms_b)
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("inf")
    return est, se


def _trapezoid_weights(lo: float, hi: float, n: int):
    x = np.linspace(lo, hi, n)
    w = np.full(n, (hi - lo) / (n - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    return x, w


def estimate_tv_quadrature(
    psi_a: MixtureParams,
    psi_b: MixtureParams,
    box,
    grid_n: int,
    atoms_m: int = 10_000,
) -> float:
    """Total variation (1/2) integral |p_a - p_b| on a grid over ``box``.

    ``box`` is a (D, 2) array of [lo, hi] per axis; trapezoid rule with
    grid_n nodes per axis.  Supported only for D <= 2 where the quadrature is
    trustworthy.
    """
    if psi_a.D != psi_b.D:
        raise ValueError("models must share the ambient dimension D")
    D = psi_a.D
    if D > 2:
        raise ValueError("quadrature TV is unsupported for D > 2")
    from polymix.density import logpdf_rows

    box = np.asarray(box, dtype=float).reshape(D, 2)
    atoms_a = _atoms_for(psi_a, atoms_m, 0, quadrature=True)
    atoms_b = _atoms_for(psi_b, atoms_m, 0, quadrature=True)
    axes = [_trapezoid_weights(lo, hi, grid_n) for lo, hi in box]
    if D == 1:
        pts = axes[0][0][:, None]
        w = axes[0][1]
    else:
        gx, gy = np.meshgrid(axes[0][0], axes[1][0], indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        w = np.outer(axes[0][1], axes[1][1]).ravel()
    diff = np.abs(
        np.exp(logpdf_rows(pts, psi_a, atoms_a)) - np.exp(logpdf_rows(pts, psi_b, atoms_b))
    )
    return float(0.5 * np.sum(w * diff))
