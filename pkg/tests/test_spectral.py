"""Method-of-moments gate: exactness on population moments comes first.

The rising-factorial Dirichlet moment tensor in conftest is the independent
oracle for every analytic moment formula used here.
"""

import numpy as np
import pytest

from conftest import dirichlet_moment_tensor3
from polymix.metrics import d_m
from polymix.params import MixtureParams
from polymix.simulate import make_setting, simulate
from polymix.spectral import (
    Moments,
    RankDeficientMomentsError,
    build_pairs_triples,
    dirichlet_third_action,
    empirical_moments,
    estimate_sigma2_spectral,
    fit_spectral,
    fit_spectral_from_moments,
    population_moments,
)


def test_third_action_matches_rising_factorial_tensor(rng):
    for alpha in (np.array([1.0, 1.0]), np.array([0.2, 0.6, 1.0]), np.full(4, 0.5)):
        T = dirichlet_moment_tensor3(alpha)
        for _ in range(3):
            w = rng.standard_normal(len(alpha))
            want = np.einsum("ijk,k->ij", T, w)
            got = dirichlet_third_action(alpha, w)
            assert np.allclose(got, want, atol=1e-12)


def test_population_moments_match_monte_carlo():
    truth = make_setting("single-simplex", seed=6)
    mom = population_moments(truth.theta[0], truth.sigma2[0], truth.alpha)
    data = simulate(truth, 200_000, seed=41)
    emp = empirical_moments(data)
    assert np.allclose(emp.mu, mom.mu, atol=0.02)
    assert np.allclose(emp.second, mom.second, atol=0.05)
    v = np.random.default_rng(1).standard_normal(truth.D)
    v /= np.linalg.norm(v)
    assert np.allclose(emp.triple_action(v), mom.triple_action(v), atol=0.1)


def test_triple_action_shapes_and_linearity(rng):
    X = rng.standard_normal((20, 4))
    mom = empirical_moments(X)
    v = np.zeros(4)
    assert np.allclose(mom.triple_action(v), 0.0)
    x = X[3]
    single = empirical_moments(np.vstack([x] * 5))
    w = rng.standard_normal(4)
    assert np.allclose(single.triple_action(w), np.outer(x, x) * (x @ w), atol=1e-12)
    a, b = rng.standard_normal(2)
    v1, v2 = rng.standard_normal(4), rng.standard_normal(4)
    lhs = mom.triple_action(a * v1 + b * v2)
    rhs = a * mom.triple_action(v1) + b * mom.triple_action(v2)
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert np.allclose(mom.triple_action(v1), mom.triple_action(v1).T, atol=1e-12)


def test_sigma2_population_exact():
    rng = np.random.default_rng(3)
    theta = rng.standard_normal((6, 2))
    mom = population_moments(theta, 0.16, np.array([1.0, 1.0]))
    assert np.isclose(estimate_sigma2_spectral(mom.second, mom.mu, 2), 0.16, atol=1e-12)
    mom0 = population_moments(theta, 0.0, np.array([1.0, 1.0]))
    assert abs(estimate_sigma2_spectral(mom0.second, mom0.mu, 2)) < 1e-12


def test_sigma2_sampled_within_ten_percent():
    truth = make_setting("single-simplex", seed=1)
    data = simulate(truth, 10_000, seed=2)
    emp = empirical_moments(data)
    s2 = estimate_sigma2_spectral(emp.second, emp.mu, truth.d)
    assert abs(s2 - 0.16) / 0.16 < 0.10


def test_sigma2_requires_d_below_D():
    with pytest.raises(ValueError):
        estimate_sigma2_spectral(np.eye(3), np.zeros(3), 3)


def test_pairs_identity_unit_vectors():
    # Theta = [e1, e2] in D=3, alpha=(1,1): Pairs = (1/6) diag(1, 1, 0)
    theta = np.zeros((3, 2))
    theta[0, 0] = 1.0
    theta[1, 1] = 1.0
    alpha = np.array([1.0, 1.0])
    mom = population_moments(theta, 0.0, alpha)
    pairs, _ = build_pairs_triples(mom.mu, mom.second, mom.triple_action, 0.0, 2.0)
    assert np.allclose(pairs, np.diag([1 / 6, 1 / 6, 0.0]), atol=1e-12)


def test_triples_identity_general(rng):
    theta = rng.standard_normal((5, 3))
    alpha = np.array([0.5, 1.2, 0.9])
    abar = alpha.sum()
    mom = population_moments(theta, 0.13, alpha)
    sigma2 = estimate_sigma2_spectral(mom.second, mom.mu, 3)
    _, triples = build_pairs_triples(mom.mu, mom.second, mom.triple_action, sigma2, abar)
    v = rng.standard_normal(5)
    want = (
        2.0
        / (abar * (abar + 1) * (abar + 2))
        * theta
        @ np.diag(theta.T @ v)
        @ np.diag(alpha)
        @ theta.T
    )
    assert np.allclose(triples(v), want, atol=1e-10)


def test_whitened_pairs_identity():
    truth = make_setting("single-simplex", seed=8)
    mom = population_moments(truth.theta[0], truth.sigma2[0], truth.alpha)
    abar = float(truth.alpha.sum())
    sigma2 = estimate_sigma2_spectral(mom.second, mom.mu, truth.d)
    pairs, _ = build_pairs_triples(mom.mu, mom.second, mom.triple_action, sigma2, abar)
    lam, vec = np.linalg.eigh(pairs)
    lam, vec = lam[::-1][: truth.d], vec[:, ::-1][:, : truth.d]
    W = vec / np.sqrt(lam)
    assert np.linalg.norm(W.T @ pairs @ W - np.eye(truth.d)) < 1e-8


def test_population_exact_recovery_symmetric():
    truth = make_setting("single-simplex", seed=6)
    mom = population_moments(truth.theta[0], truth.sigma2[0], truth.alpha)
    fit = fit_spectral_from_moments(mom, truth.d, float(truth.alpha.sum()), seed=0)
    assert d_m(fit.theta, truth.theta[0])[0] < 1e-6
    val, perm = d_m(fit.theta, truth.theta[0])
    assert np.allclose(fit.alpha[np.argsort(perm)], truth.alpha[np.argsort(perm)], atol=1e-8)
    assert np.isclose(fit.sigma2, truth.sigma2[0], atol=1e-10)


def test_population_exact_recovery_asymmetric_alpha(rng):
    theta = rng.standard_normal((20, 3))
    alpha = np.array([0.2, 0.6, 1.0])
    mom = population_moments(theta, 0.16, alpha)
    fit = fit_spectral_from_moments(mom, 3, 1.8, seed=1)
    val, perm = d_m(fit.theta, theta)
    assert val < 1e-6
    # column j of fit matches column perm[j] of truth
    assert np.allclose(fit.alpha, alpha[perm], atol=1e-8)
    assert np.all(fit.alpha > 0)
    assert np.isclose(fit.alpha.sum(), 1.8, atol=1e-8)


def test_rotation_equivariance_population(rng):
    truth = make_setting("single-simplex", seed=9)
    q, _ = np.linalg.qr(rng.standard_normal((truth.D, truth.D)))
    mom = population_moments(truth.theta[0], truth.sigma2[0], truth.alpha)
    mom_rot = population_moments(q @ truth.theta[0], truth.sigma2[0], truth.alpha)
    f1 = fit_spectral_from_moments(mom, truth.d, float(truth.alpha.sum()), seed=2)
    f2 = fit_spectral_from_moments(mom_rot, truth.d, float(truth.alpha.sum()), seed=2)
    assert d_m(q.T @ f2.theta, f1.theta)[0] < 1e-6


def test_polytope_vertices_trigger_rank_error():
    truth = make_setting("single-polytope", seed=1)  # 4 vertices on a 2-plane
    mom = population_moments(truth.theta[0], truth.sigma2[0], truth.alpha)
    with pytest.raises(RankDeficientMomentsError):
        fit_spectral_from_moments(mom, truth.d, float(truth.alpha.sum()), seed=0)


def test_sampled_error_shrinks_with_n():
    truth = make_setting("single-simplex", seed=3)
    errs = {}
    for n in (100, 800):
        vals = []
        for rep in range(4):
            data = simulate(truth, n, seed=100 + rep)
            fit = fit_spectral(data, truth.d, float(truth.alpha.sum()), seed=rep)
            vals.append(d_m(fit.theta, truth.theta[0])[0])
        errs[n] = np.mean(vals)
    assert errs[800] < errs[100]


def test_empirical_moments_need_three_rows(rng):
    with pytest.raises(ValueError):
        empirical_moments(rng.standard_normal((2, 3)))
