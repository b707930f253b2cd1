"""Sampling from the hierarchical model and the canonical experiment settings."""

from __future__ import annotations

import hashlib

import numpy as np

from polymix.params import Dataset, MixtureParams


def derive_seed(master: int, *parts) -> int:
    """Derive an independent 64-bit stream seed from a master seed and labels.

    master XOR blake2b(repr(parts)); documented so replicate streams can be
    reconstructed outside the sweep harness.
    """
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return (int(master) ^ int.from_bytes(digest, "little")) & (2**64 - 1)


def sample_dirichlet(alpha, n: int, seed: int = 0) -> np.ndarray:
    """n draws from Dir(alpha) by normalizing independent Gamma(alpha_j, 1)."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha entries must be > 0")
    rng = np.random.default_rng(seed)
    g = rng.gamma(shape=alpha, size=(n, alpha.shape[0]))
    s = g.sum(axis=1)
    # a row of all-underflowed gammas is astronomically unlikely for alpha in
    # the ranges used here, but never divide by zero
    bad = s <= 0
    if np.any(bad):
        g[bad] = rng.gamma(shape=np.maximum(alpha, 0.5), size=(int(bad.sum()), alpha.shape[0]))
        s = g.sum(axis=1)
    return g / s[:, None]


def simulate(psi: MixtureParams, n: int, seed: int = 0) -> Dataset:
    """Draw n observations with full latent traces (z, beta) recorded."""
    rng = np.random.default_rng(seed)
    if n == 0:
        return Dataset(X=np.zeros((0, psi.D)), z=np.zeros(0, dtype=int),
                       beta=np.zeros((0, psi.d)), seed=seed)
    z = rng.choice(psi.K, size=n, p=psi.pi)
    if psi.d == 1:
        beta = np.ones((n, 1))
    else:
        g = rng.gamma(shape=psi.alpha, size=(n, psi.d))
        s = g.sum(axis=1)
        bad = s <= 0
        if np.any(bad):
            g[bad] = rng.gamma(shape=np.maximum(psi.alpha, 0.5), size=(int(bad.sum()), psi.d))
            s = g.sum(axis=1)
        beta = g / s[:, None]
    eta = np.einsum("nrd,nd->nr", psi.theta[z], beta)
    noise = rng.standard_normal((n, psi.D))
    X = eta + np.sqrt(psi.sigma2[z])[:, None] * noise
    return Dataset(X=X, z=z, beta=beta, seed=seed)


def _setting1() -> MixtureParams:
    # three coplanar pairwise-crossing segments in R^3 on distinct lines
    segs = [
        ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)),
        ((0.2, -0.3, 0.0), (0.8, 0.9, 0.0)),
        ((0.8, -0.3, 0.0), (0.2, 0.9, 0.0)),
    ]
    theta = np.array([np.column_stack([np.array(a), np.array(b)]) for a, b in segs])
    return MixtureParams(
        theta=theta,
        pi=np.array([0.3, 0.3, 0.4]),
        sigma2=np.array([0.12, 0.20, 0.07]) ** 2,
        alpha=np.array([1.0, 1.0]),
    )


def _random_setting(K, D, d, sigma_base, alpha_value, pi_conc, rng) -> MixtureParams:
    theta = rng.standard_normal((K, D, d))
    pi = rng.dirichlet(np.full(K, pi_conc))
    sigma = np.abs(np.asarray(sigma_base) * (1.0 + 0.05 * rng.standard_normal(K)))
    return MixtureParams(
        theta=theta,
        pi=pi,
        sigma2=sigma**2,
        alpha=np.full(d, alpha_value),
    )


def _planar_quadrilateral(rng, D: int) -> np.ndarray:
    # 4 exposed vertices of a convex quadrilateral on a random 2-plane in R^D
    corners = np.array([[1.2, 0.0], [0.0, 1.0], [-1.0, 0.1], [0.1, -0.9]])
    basis, _ = np.linalg.qr(rng.standard_normal((D, 2)))
    center = 0.5 * rng.standard_normal(D)
    return (center[:, None] + basis @ corners.T)


def make_setting(setting_id, seed: int = 0) -> MixtureParams:
    """Canonical simulation settings; unstated quantities are seed-derived.

    1: K=3 crossing segments in R^3.  2: K=3, D=12, d=4 Gaussian vertices.
    3: K=10, D=200, d=25.  "single-simplex": K=1, D=20, d=3.
    "single-polytope": K=1, D=20, d=4 planar convex quadrilateral.
    Append "-asym" to the single-component ids for the asymmetric alpha.
    """
    key = str(setting_id)
    rng = np.random.default_rng(derive_seed(seed, "setting", key))
    if key == "1":
        return _setting1()
    if key == "2":
        return _random_setting(3, 12, 4, [0.1, 0.2, 0.6], 0.75, 50.0, rng)
    if key == "3":
        sigma_base = np.linspace(0.1, 0.6, 10)
        return _random_setting(10, 200, 25, sigma_base, 0.75, 50.0, rng)
    if key in ("single-simplex", "single-simplex-asym"):
        theta = rng.standard_normal((20, 3))
        alpha = np.array([0.2, 0.6, 1.0]) if key.endswith("asym") else np.full(3, 0.8)
        return MixtureParams(theta[None], np.array([1.0]), np.array([0.16]), alpha)
    if key in ("single-polytope", "single-polytope-asym"):
        theta = _planar_quadrilateral(rng, 20)
        alpha = np.array([0.3, 0.4, 1.0, 0.6]) if key.endswith("asym") else np.full(4, 0.5)
        return MixtureParams(theta[None], np.array([1.0]), np.array([0.16]), alpha)
    raise ValueError(f"unknown setting id: {setting_id!r}")
