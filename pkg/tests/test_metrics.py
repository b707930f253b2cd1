"""Matched-distance correctness against exhaustive permutation search."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_d_m, brute_force_metric_d, random_psi
from polymix.metrics import (
    d_m,
    estimate_kl_mc,
    estimate_tv_quadrature,
    infer_bound_envelope,
    kl_upper_bound,
    metric_d,
)
from polymix.params import MixtureParams


def test_d_m_zero_on_equal_and_permuted(rng):
    theta = rng.standard_normal((4, 3))
    assert d_m(theta, theta)[0] == 0.0
    val, perm = d_m(theta, theta[:, [2, 0, 1]])
    assert val < 1e-12
    assert list(perm) == [1, 2, 0]  # column j of A matches column perm[j] of B


def test_d_m_single_column_shift(rng):
    theta = rng.standard_normal((5, 4))
    shifted = theta.copy()
    shifted[0, 1] += 0.1
    val, _ = d_m(theta, shifted)
    assert np.isclose(val, 0.1, atol=1e-12)


def test_d_m_matches_brute_force(rng):
    for _ in range(60):
        d = int(rng.integers(2, 6))
        a = rng.standard_normal((3, d))
        b = rng.standard_normal((3, d))
        assert np.isclose(d_m(a, b)[0], brute_force_d_m(a, b), atol=1e-11)


def test_metric_d_zero_on_relabelling(rng):
    psi = random_psi(rng, K=3, d=3, D=4)
    rep = metric_d(psi, psi.permuted([2, 0, 1]))
    assert rep.distance < 1e-12


def test_metric_d_matches_brute_force(rng):
    for _ in range(30):
        K = int(rng.integers(2, 4))
        d = int(rng.integers(2, 4))
        a = random_psi(rng, K, d, 3)
        b = random_psi(rng, K, d, 3)
        assert np.isclose(metric_d(a, b).distance, brute_force_metric_d(a, b), atol=1e-11)


def test_report_terms_sum_to_distance(rng):
    a = random_psi(rng, 3, 2, 3)
    b = random_psi(rng, 3, 2, 3)
    rep = metric_d(a, b)
    total = sum(r["d_M"] + r["pi_gap"] + r["sigma2_gap"] for r in rep.per_component)
    assert np.isclose(total, rep.distance, atol=1e-10)


def test_metric_d_not_above_identity_matching(rng):
    a = random_psi(rng, 3, 2, 3)
    b = random_psi(rng, 3, 2, 3)
    ident = sum(
        d_m(a.theta[k], b.theta[k])[0]
        + abs(a.pi[k] - b.pi[k])
        + abs(a.sigma2[k] - b.sigma2[k])
        for k in range(3)
    )
    assert metric_d(a, b).distance <= ident + 1e-12


@settings(max_examples=40, deadline=None, derandomize=True)
@given(st.integers(min_value=0, max_value=10**6))
def test_metric_d_symmetry_and_triangle(seed):
    r = np.random.default_rng(seed)
    a = random_psi(r, 2, 2, 3)
    b = random_psi(r, 2, 2, 3)
    c = random_psi(r, 2, 2, 3)
    dab = metric_d(a, b).distance
    assert np.isclose(dab, metric_d(b, a).distance, atol=1e-9)
    assert dab <= metric_d(a, c).distance + metric_d(c, b).distance + 1e-9


def test_kl_bound_arithmetic():
    assert kl_upper_bound(0.0, 3, 2.0, 1.0, 0.25) == 0.0
    # C = 3 + (4 + 3)/2 = 6.5; bound = 2 * (0.01 + 0.65) = 1.32
    assert np.isclose(kl_upper_bound(0.1, 3, 2.0, 1.0, 0.25), 1.32, atol=1e-12)


def test_kl_bound_monotone_in_eps():
    vals = [kl_upper_bound(e, 3, 2.0, 1.0, 0.25) for e in (0.0, 0.05, 0.2, 1.0)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_kl_bound_rejects_bad_sigma():
    with pytest.raises(ValueError):
        kl_upper_bound(0.1, 3, 2.0, 1.0, 0.0)


def test_kl_mc_zero_for_identical(rng):
    psi = random_psi(rng, 2, 2, 2)
    est, se = estimate_kl_mc(psi, psi, 2000, seed=3)
    assert abs(est) <= max(3 * se, 1e-9)


def test_kl_mc_gaussian_closed_form():
    # d=1 degenerate: two unit Gaussians with means 0 and 1 -> KL = 1/2
    a = MixtureParams(np.zeros((1, 1, 1)), np.array([1.0]), np.array([1.0]), np.ones(1))
    b = MixtureParams(np.ones((1, 1, 1)), np.array([1.0]), np.array([1.0]), np.ones(1))
    est, se = estimate_kl_mc(a, b, 4000, seed=5)
    assert abs(est - 0.5) <= 3 * se


def test_kl_mc_respects_upper_bound(rng):
    base = random_psi(rng, 2, 2, 2, sigma2_lo=0.25, sigma2_hi=0.6)
    other = MixtureParams(
        base.theta + 0.1 * rng.standard_normal(base.theta.shape),
        base.pi,
        base.sigma2 + rng.uniform(0.0, 0.05, 2),
        base.alpha,
    )
    est, se = estimate_kl_mc(base, other, 3000, seed=11)
    diam_T, diam_S, smin = infer_bound_envelope(base, other)
    bound = kl_upper_bound(metric_d(base, other).distance, base.D, diam_T, max(diam_S, 1e-6), smin)
    assert est <= bound + 3 * se


def _two_segments(sigma2=(0.04, 0.0625), pi=(0.45, 0.55)):
    theta = np.array(
        [[[0.0, 1.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 1.6]]]
    )
    return MixtureParams(theta, np.array(pi), np.array(sigma2), np.array([1.0, 1.0]))


def test_tv_identical_is_zero():
    psi = _two_segments()
    box = [[-1.0, 2.0], [-1.0, 2.6]]
    assert estimate_tv_quadrature(psi, psi, box, 101, atoms_m=500) < 1e-6


def test_tv_far_apart_is_one():
    a = MixtureParams(np.zeros((1, 2, 1)), np.array([1.0]), np.array([0.01]), np.ones(1))
    far = np.full((1, 2, 1), 40.0)
    b = MixtureParams(far, np.array([1.0]), np.array([0.01]), np.ones(1))
    box = [[-1.0, 41.0], [-1.0, 41.0]]
    tv = estimate_tv_quadrature(a, b, box, 701, atoms_m=1)
    assert abs(tv - 1.0) < 1e-3


def test_tv_rejects_high_dimension(rng):
    psi = random_psi(rng, 1, 2, 3)
    with pytest.raises(ValueError):
        estimate_tv_quadrature(psi, psi, np.zeros((3, 2)), 10)


def test_tv_to_distance_ratio_stays_positive(rng):
    psi0 = _two_segments()
    box = [[-0.8, 1.8], [-0.8, 2.4]]
    direction = rng.standard_normal(psi0.theta.shape)
    direction /= np.sum(np.abs(direction))
    ratios = []
    for eps in (0.08, 0.04, 0.02):
        psi_eps = MixtureParams(
            psi0.theta + eps * direction, psi0.pi, psi0.sigma2, psi0.alpha
        )
        dist = metric_d(psi0, psi_eps).distance
        tv = estimate_tv_quadrature(psi0, psi_eps, box, 161, atoms_m=800)
        ratios.append(tv / dist)
    assert min(ratios) > 0
    for r1, r2 in zip(ratios, ratios[1:]):
        assert 0.5 <= r2 / r1 <= 2.0
