"""Moment-matching fitters that swap the admixing law for a Gaussian.

Replacing the Dirichlet on the simplex with a Gaussian of matching first two
moments makes each component marginal N(Theta mu0, Theta Sigma0 Theta^T +
sigma2 I).  The vertex matrix is then identified only up to a rotation inside
the support plane, which a k-means alignment resolves after the fact.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from polymix._clustering import kmeans
from polymix.em import DYING_TOL, EMConfig
from polymix.params import Dataset, FitResult, MixtureParams
from polymix.simulate import derive_seed


@dataclass
class DirichletMoments:
    mean: np.ndarray
    cov: np.ndarray
    second_moment: np.ndarray


def dirichlet_moments(alpha) -> DirichletMoments:
    """Exact first and second moment of Dir(alpha)."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha entries must be > 0")
    abar = alpha.sum()
    at = alpha / abar
    second = (np.diag(at) + abar * np.outer(at, at)) / (abar + 1.0)
    cov = second - np.outer(at, at)
    return DirichletMoments(mean=at, cov=cov, second_moment=second)


def _factor_top(mat: np.ndarray, r: int) -> np.ndarray:
    """Top-r eigen factor U_r diag(sqrt(lam_r)); negative tails are clamped."""
    lam, vec = np.linalg.eigh(mat)
    lam = lam[::-1][:r]
    vec = vec[:, ::-1][:, :r]
    return vec * np.sqrt(np.maximum(lam, 0.0))


def orthogonal_procrustes(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """argmin over orthogonal O of ||A O - W||_F (closed form via SVD)."""
    U, _, Vt = np.linalg.svd(A.T @ W)
    return U @ Vt


def fit_single_from_moments(mean_vec, cov_mat, d: int, alpha, sigma2_floor: float = 1e-8):
    """Vertex matrix (up to in-plane rotation) and noise variance from moments.

    sigma2 is the mean of the D-d+1 smallest covariance eigenvalues (the
    admixing covariance has rank d-1, so those tail directions carry noise
    only).  Raises on covariance rank below d-1.
    """
    mean_vec = np.asarray(mean_vec, dtype=float)
    cov_mat = np.asarray(cov_mat, dtype=float)
    D = mean_vec.shape[0]
    if d > D:
        raise ValueError("need d <= D")
    lam = np.linalg.eigh(cov_mat)[0]
    if np.sum(lam > 1e-12 * max(lam[-1], 1e-300)) < d - 1:
        raise ValueError("degenerate data: sample covariance rank below d-1")
    sigma2 = max(float(lam[: D - d + 1].mean()), sigma2_floor)
    A = _factor_top(cov_mat - sigma2 * np.eye(D), d - 1)
    mom = dirichlet_moments(alpha)
    A0 = _factor_top(mom.cov, d - 1)
    B = np.column_stack([A0, mom.mean])  # (d, d), invertible: mean is off the
    rhs = np.column_stack([A, mean_vec])  # zero-sum plane spanned by A0
    theta_tilde = np.linalg.lstsq(B.T, rhs.T, rcond=None)[0].T
    return theta_tilde, sigma2


def _rotation_correction(theta_tilde, center, points, d, seed):
    """Align the centered vertex columns to k-means centers of centered data."""
    if points.shape[0] < d:
        return theta_tilde
    centers, _ = kmeans(points - center, d, seed=seed, n_restarts=20, iters=100)
    theta_c = theta_tilde - center[:, None]
    O = orthogonal_procrustes(theta_c, centers.T)
    return theta_c @ O + center[:, None]


def fit_single_gaussian_approx(data: Dataset, d: int, alpha, seed: int = 0):
    """Single-component fit; returns ``(theta, sigma2)``."""
    X = data.X
    if X.shape[0] <= d:
        raise ValueError("need n > d")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    theta_tilde, sigma2 = fit_single_from_moments(mean, cov, d, alpha)
    theta = _rotation_correction(theta_tilde, mean, X, d, derive_seed(seed, "rotation", 0))
    return theta, sigma2


def _full_cov_logpdf(X, mean, C):
    L = np.linalg.cholesky(C)
    y = np.linalg.solve(L, (X - mean).T)
    quad = np.sum(y * y, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    return -0.5 * (X.shape[1] * np.log(2.0 * np.pi) + logdet + quad)


def _gauss_e_step(X, theta, pi, sigma2, mom):
    K = theta.shape[0]
    logp = np.empty((X.shape[0], K))
    for k in range(K):
        mean = theta[k] @ mom.mean
        C = theta[k] @ mom.cov @ theta[k].T + sigma2[k] * np.eye(X.shape[1])
        logp[:, k] = np.log(max(pi[k], 1e-300)) + _full_cov_logpdf(X, mean, C)
    m = logp.max(axis=1)
    w = np.exp(logp - m[:, None])
    s = w.sum(axis=1)
    return w / s[:, None], float(np.sum(m + np.log(s)))


def fit_mixture_gaussian_em(
    data: Dataset,
    K: int,
    d: int,
    alpha,
    config: Optional[EMConfig] = None,
    seed: int = 0,
) -> FitResult:
    """Mixture fit: Gaussian-marginal E-step, per-component moment M-step.

    The M-step redoes the single-component moment procedure on responsibility-
    weighted means/covariances; it is moment matching rather than exact
    maximization, so the log-likelihood trace is only approximately monotone.
    The in-plane rotation is resolved once, after convergence.
    """
    cfg = config or EMConfig()
    X = data.X
    n, D = X.shape
    if n < K * d:
        raise ValueError("need n >= K*d")
    t0 = time.perf_counter()
    alpha = np.asarray(alpha, dtype=float)
    mom = dirichlet_moments(alpha)
    best = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng(derive_seed(seed, "restart", r))
        centers, labels = kmeans(X, K, seed=int(rng.integers(2**63)), iters=cfg.kmeans_iters)
        theta = np.empty((K, D, d))
        sigma2 = np.empty(K)
        pi = np.empty(K)
        degenerate = False
        for k in range(K):
            mask = labels == k
            if mask.sum() <= d:
                mask = np.ones(n, dtype=bool)
            mk = X[mask].mean(axis=0)
            Ck = (X[mask] - mk).T @ (X[mask] - mk) / mask.sum()
            try:
                theta[k], sigma2[k] = fit_single_from_moments(mk, Ck, d, alpha, cfg.sigma2_floor)
            except ValueError:
                degenerate = True
                break
            pi[k] = max(mask.mean(), 1e-3)
        if degenerate:
            continue
        pi /= pi.sum()
        trace = []
        converged = False
        it = 0
        for it in range(1, cfg.max_iter + 1):
            resp, ll = _gauss_e_step(X, theta, pi, sigma2, mom)
            trace.append(ll)
            if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= cfg.rel_tol * (abs(trace[-2]) + 1e-12):
                converged = True
                break
            r_k = resp.sum(axis=0)
            for k in range(K):
                if r_k[k] < DYING_TOL:
                    continue
                w = resp[:, k] / r_k[k]
                mk = w @ X
                Xc = X - mk
                Ck = (Xc * w[:, None]).T @ Xc
                try:
                    theta[k], sigma2[k] = fit_single_from_moments(mk, Ck, d, alpha, cfg.sigma2_floor)
                except ValueError:
                    pass  # hold the component if its weighted moments degenerate
            pi = np.maximum(r_k / n, 0.0)
            pi /= pi.sum()
        if best is None or trace[-1] > best[0]:
            best = (trace[-1], theta.copy(), pi.copy(), sigma2.copy(), trace, it, converged)
    if best is None:
        raise ValueError("all restarts degenerate")
    _, theta, pi, sigma2, trace, it, converged = best
    resp, _ = _gauss_e_step(X, theta, pi, sigma2, mom)
    hard = np.argmax(resp, axis=1)
    for k in range(K):
        pts = X[hard == k]
        center = theta[k] @ mom.mean
        theta[k] = _rotation_correction(theta[k], center, pts, d, derive_seed(seed, "rotation", k))
    return FitResult(
        psi_hat=MixtureParams(theta, pi, sigma2, alpha),
        objective_trace=np.asarray(trace),
        iterations=it,
        converged=converged,
        restarts_used=cfg.restarts,
        seed=seed,
        wall_time=time.perf_counter() - t0,
    )
