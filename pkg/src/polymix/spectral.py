"""Single-component method of moments via whitened tensor eigendecomposition.

The corrected second- and third-order functionals have the diagonal forms

    Pairs       = (1 / (abar (abar+1))) Theta diag(alpha) Theta^T
    Triples(v)  = (2 / (abar (abar+1)(abar+2))) Theta diag(Theta^T v) diag(alpha) Theta^T

so whitening Pairs turns Triples into a symmetric matrix whose eigenvectors
are the whitened (scaled) vertex directions.  The eigenvalue of direction j
against a probe eta is lam_j = kappa_j <v_j, eta> with
kappa_j = 2 sqrt(abar (abar+1)) / ((abar+2) sqrt(alpha_j)), which recovers the
per-column scale and the concentration entries.  Columns of Theta must be
linearly independent (the moment matrix must reach rank d).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from polymix.gauss import dirichlet_moments
from polymix.metrics import d_m
from polymix.params import Dataset


class RankDeficientMomentsError(ValueError):
    """Pairs matrix is not numerically rank d (dependent vertex columns)."""


@dataclass
class Moments:
    mu: np.ndarray
    second: np.ndarray
    triple_action: Callable[[np.ndarray], np.ndarray]


@dataclass
class SpectralFit:
    theta: np.ndarray
    alpha: np.ndarray
    sigma2: float


def empirical_moments(data) -> Moments:
    """Sample mean, second moment and third-moment action of the data rows."""
    X = data.X if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    n = X.shape[0]
    if n < 3:
        raise ValueError("need at least 3 rows")
    mu = X.mean(axis=0)
    second = X.T @ X / n

    def triple_action(v: np.ndarray) -> np.ndarray:
        xv = X @ np.asarray(v, dtype=float)
        return (X * xv[:, None]).T @ X / n

    return Moments(mu=mu, second=second, triple_action=triple_action)


def dirichlet_third_action(alpha, w: np.ndarray) -> np.ndarray:
    """E[beta beta^T <beta, w>] for Dir(alpha), as a d x d matrix."""
    alpha = np.asarray(alpha, dtype=float)
    abar = alpha.sum()
    mom = dirichlet_moments(alpha)
    m1, m2 = mom.mean, mom.second_moment
    w = np.asarray(w, dtype=float)
    term1 = 2.0 / (abar * (abar + 1.0) * (abar + 2.0)) * np.diag(alpha * w)
    term2 = (
        -2.0 * abar**2 / ((abar + 1.0) * (abar + 2.0)) * (m1 @ w) * np.outer(m1, m1)
    )
    m2w = m2 @ w
    term3 = abar / (abar + 2.0) * (np.outer(m2w, m1) + np.outer(m1, m2w) + (m1 @ w) * m2)
    return term1 + term2 + term3


def population_moments(theta: np.ndarray, sigma2: float, alpha) -> Moments:
    """Exact model moments for a single component (oracle-grade inputs)."""
    theta = np.asarray(theta, dtype=float)
    D = theta.shape[0]
    mom = dirichlet_moments(alpha)
    mu = theta @ mom.mean
    second = theta @ mom.second_moment @ theta.T + sigma2 * np.eye(D)

    def triple_action(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        iso = sigma2 * (np.outer(v, mu) + np.outer(mu, v) + (mu @ v) * np.eye(D))
        return iso + theta @ dirichlet_third_action(alpha, theta.T @ v) @ theta.T

    return Moments(mu=mu, second=second, triple_action=triple_action)


def estimate_sigma2_spectral(second: np.ndarray, mu: np.ndarray, d: int) -> float:
    """Noise variance: mean of the D-d smallest eigenvalues of E[XX^T]."""
    D = second.shape[0]
    if d >= D:
        raise ValueError("need d < D")
    lam = np.linalg.eigvalsh(second)
    return float(lam[: D - d].mean())


def build_pairs_triples(mu, second, triple_action, sigma2_hat: float, abar: float):
    """Corrected moment functionals given the noise estimate and known abar."""
    if abar <= 0:
        raise ValueError("abar must be > 0")
    mu = np.asarray(mu, dtype=float)
    D = mu.shape[0]
    S = second - sigma2_hat * np.eye(D)
    pairs = S - (abar / (abar + 1.0)) * np.outer(mu, mu)

    def triples(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        mv = mu @ v
        out = triple_action(v)
        out = out - sigma2_hat * (np.outer(v, mu) + np.outer(mu, v) + mv * np.eye(D))
        out = out - (abar / (abar + 2.0)) * (mv * S + np.outer(S @ v, mu) + np.outer(mu, S @ v))
        out = out + (2.0 * abar**2 / ((abar + 1.0) * (abar + 2.0))) * mv * np.outer(mu, mu)
        return out

    return pairs, triples


def _recover_once(pairs_U, pairs_s, triples, abar: float, eta: np.ndarray):
    W = pairs_U / np.sqrt(pairs_s)
    T = W.T @ triples(W @ eta) @ W
    T = 0.5 * (T + T.T)
    lam, V = np.linalg.eigh(T)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    V = V[:, order]
    dots = V.T @ eta
    flip = np.sign(dots) * np.sign(lam)
    flip[flip == 0] = 1.0
    V = V * flip
    kappa = np.abs(lam) / np.maximum(np.abs(dots), 1e-300)
    alpha_raw = 4.0 * abar * (abar + 1.0) / ((abar + 2.0) ** 2 * np.maximum(kappa, 1e-300) ** 2)
    unwhiten = pairs_U * np.sqrt(pairs_s)
    theta = unwhiten @ (V * ((abar + 2.0) * kappa / 2.0))
    return theta, alpha_raw


def fit_spectral_from_moments(
    moments: Moments, d: int, abar: float, seed: int = 0, n_repeats: int = 5
) -> SpectralFit:
    """Recover (theta, alpha, sigma2) from (possibly exact) moments.

    Runs n_repeats random probes and takes the column-aligned elementwise
    median; a single probe is fragile under sampling noise.
    """
    sigma2 = estimate_sigma2_spectral(moments.second, moments.mu, d)
    pairs, triples = build_pairs_triples(
        moments.mu, moments.second, moments.triple_action, sigma2, abar
    )
    lam, vec = np.linalg.eigh(pairs)
    lam = lam[::-1][:d]
    vec = vec[:, ::-1][:, :d]
    if lam[-1] <= max(1e-10 * max(lam[0], 0.0), 0.0):
        raise RankDeficientMomentsError(
            f"Pairs has numerical rank < d={d}; vertex columns must be linearly independent"
        )
    rng = np.random.default_rng(seed)
    thetas = []
    alphas = []
    for _ in range(max(1, n_repeats)):
        eta = rng.standard_normal(d)
        eta /= np.linalg.norm(eta)
        theta_r, alpha_r = _recover_once(vec, lam, triples, abar, eta)
        if thetas:
            _, perm = d_m(thetas[0], theta_r)
            theta_r = theta_r[:, perm]
            alpha_r = alpha_r[perm]
        thetas.append(theta_r)
        alphas.append(alpha_r)
    theta = np.median(np.stack(thetas), axis=0)
    alpha_raw = np.median(np.stack(alphas), axis=0)
    alpha = abar * alpha_raw / alpha_raw.sum()
    return SpectralFit(theta=theta, alpha=alpha, sigma2=sigma2)


def fit_spectral(data, d: int, abar: float, seed: int = 0, n_repeats: int = 5) -> SpectralFit:
    """Spectral fit from data rows (K=1).  Requires d <= D and known abar."""
    return fit_spectral_from_moments(empirical_moments(data), d, abar, seed, n_repeats)
