"""Shared fixtures and independent oracles used across the test suite.

The oracles here deliberately avoid the library's own code paths: brute-force
permutation search, gift-wrapping hulls, rising-factorial Dirichlet moments,
and batch-means Monte Carlo errors.
"""

import itertools

import numpy as np
import pytest

from polymix.params import MixtureParams


def brute_force_d_m(theta_a, theta_b):
    """Exhaustive column matching (d <= 6)."""
    d = theta_a.shape[1]
    best = np.inf
    for perm in itertools.permutations(range(d)):
        cost = sum(
            np.linalg.norm(theta_a[:, j] - theta_b[:, perm[j]]) for j in range(d)
        )
        best = min(best, cost)
    return best


def brute_force_metric_d(psi_a, psi_b):
    """Exhaustive outer and inner permutation search (K, d <= 4)."""
    K = psi_a.K
    best = np.inf
    for perm in itertools.permutations(range(K)):
        cost = 0.0
        for a in range(K):
            b = perm[a]
            cost += brute_force_d_m(psi_a.theta[a], psi_b.theta[b])
            cost += abs(psi_a.pi[a] - psi_b.pi[b])
            cost += abs(psi_a.sigma2[a] - psi_b.sigma2[b])
        best = min(best, cost)
    return best


def gift_wrap_hull(points):
    """Indices of the planar convex hull (gift wrapping, D=2)."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    start = min(range(n), key=lambda i: (pts[i, 0], pts[i, 1]))
    hull = [start]
    while True:
        cur = hull[-1]
        cand = (cur + 1) % n
        for j in range(n):
            if j == cur:
                continue
            u = pts[cand] - pts[cur]
            v = pts[j] - pts[cur]
            cross = u[0] * v[1] - u[1] * v[0]
            if cross < -1e-12 or (
                abs(cross) <= 1e-12
                and np.linalg.norm(pts[j] - pts[cur]) > np.linalg.norm(pts[cand] - pts[cur])
            ):
                cand = j
        if cand == start:
            break
        hull.append(cand)
        if len(hull) > n:
            raise RuntimeError("gift wrapping failed")
    return set(hull)


def dirichlet_moment_tensor3(alpha):
    """Exact E[beta_i beta_j beta_k] via rising factorials."""
    alpha = np.asarray(alpha, dtype=float)
    d = alpha.shape[0]
    abar = alpha.sum()
    denom = abar * (abar + 1.0) * (abar + 2.0)
    T = np.empty((d, d, d))
    for i in range(d):
        for j in range(d):
            for k in range(d):
                counts = np.zeros(d)
                for idx in (i, j, k):
                    counts[idx] += 1
                num = 1.0
                for m in range(d):
                    for r in range(int(counts[m])):
                        num *= alpha[m] + r
                T[i, j, k] = num / denom
    return T


def batch_means_se(values, n_batches=20):
    """Standard error of an MCMC average via batch means."""
    values = np.asarray(values, dtype=float)
    usable = (len(values) // n_batches) * n_batches
    batches = values[:usable].reshape(n_batches, -1).mean(axis=1)
    return float(batches.std(ddof=1) / np.sqrt(n_batches))


def random_psi(rng, K, d, D, sigma2_lo=0.25, sigma2_hi=1.0, theta_scale=1.0):
    theta = theta_scale * rng.uniform(-1.0, 1.0, size=(K, D, d))
    pi = rng.dirichlet(np.full(K, 5.0))
    sigma2 = rng.uniform(sigma2_lo, sigma2_hi, size=K)
    return MixtureParams(theta, pi, sigma2, np.full(d, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
