"""Generator law checks and the canonical settings."""

import numpy as np
import pytest

from polymix.geometry import PolytopeSet, affine_dimension, check_assumption_a
from polymix.params import MixtureParams
from polymix.simulate import derive_seed, make_setting, sample_dirichlet, simulate


def se_of_mean(x):
    return x.std(ddof=1) / np.sqrt(len(x))


def test_dirichlet_uniform_mean():
    b = sample_dirichlet(np.array([1.0, 1.0]), 10_000, seed=1)
    assert abs(b[:, 0].mean() - 0.5) <= 3 * se_of_mean(b[:, 0])


def test_dirichlet_symmetric_mean():
    b = sample_dirichlet(np.array([2.0, 2.0, 2.0]), 10_000, seed=2)
    for j in range(3):
        assert abs(b[:, j].mean() - 1 / 3) <= 3 * se_of_mean(b[:, j])


def test_dirichlet_asymmetric_mean_is_normalized_alpha():
    alpha = np.array([0.2, 0.6, 1.0])
    b = sample_dirichlet(alpha, 20_000, seed=3)
    target = alpha / alpha.sum()
    for j in range(3):
        assert abs(b[:, j].mean() - target[j]) <= 3 * se_of_mean(b[:, j])


def test_dirichlet_rejects_nonpositive():
    with pytest.raises(ValueError):
        sample_dirichlet(np.array([0.5, 0.0]), 5)


def test_noiseless_degenerate_rows_hit_end_member():
    theta = np.array([[[1.5], [-2.0], [0.25]]])
    psi = MixtureParams(theta, np.array([1.0]), np.array([1e-30]), np.ones(1))
    data = simulate(psi, 50, seed=4)
    assert np.allclose(data.X, theta[0, :, 0], atol=1e-12)


def test_degenerate_weights_pin_labels():
    psi = MixtureParams(
        np.zeros((3, 2, 1)), np.array([1.0, 0.0, 0.0]), np.full(3, 0.1), np.ones(1)
    )
    data = simulate(psi, 200, seed=5)
    assert np.all(data.z == 0)


def test_setting1_component_frequencies():
    psi = make_setting(1, seed=0)
    data = simulate(psi, 10_000, seed=6)
    for k, p in enumerate([0.3, 0.3, 0.4]):
        freq = (data.z == k).mean()
        se = np.sqrt(p * (1 - p) / 10_000)
        assert abs(freq - p) <= 3 * se


def test_reproducibility_bit_identical():
    psi = make_setting(2, seed=1)
    d1 = simulate(psi, 500, seed=9)
    d2 = simulate(psi, 500, seed=9)
    assert np.array_equal(d1.X, d2.X)
    assert np.array_equal(d1.z, d2.z)
    assert np.array_equal(d1.beta, d2.beta)


def test_empty_dataset_allowed():
    psi = make_setting(1, seed=0)
    data = simulate(psi, 0, seed=0)
    assert data.n == 0 and data.X.shape == (0, 3)


def test_conditional_law_mean_and_cov_trace():
    from polymix.gauss import dirichlet_moments

    psi = make_setting(2, seed=3)
    data = simulate(psi, 10_000, seed=7)
    mom = dirichlet_moments(psi.alpha)
    for k in range(psi.K):
        rows = data.X[data.z == k]
        target_mean = psi.theta[k] @ mom.mean
        se = rows.std(axis=0, ddof=1) / np.sqrt(len(rows))
        assert np.all(np.abs(rows.mean(axis=0) - target_mean) <= 4 * se + 1e-12)
        cov_emp = np.cov(rows.T)
        target_trace = np.trace(psi.theta[k] @ mom.cov @ psi.theta[k].T) + psi.D * psi.sigma2[k]
        assert abs(np.trace(cov_emp) - target_trace) / target_trace < 0.05


def test_setting1_assumption_a_holds():
    psi = make_setting(1, seed=0)
    ok, _ = check_assumption_a(PolytopeSet(psi.theta))
    assert ok


def test_setting1_segments_pairwise_intersect():
    psi = make_setting(1, seed=0)
    # solve a0 + s (a1-a0) = b0 + t (b1-b0) exactly; crossing must be interior
    for a in range(3):
        for b in range(a + 1, 3):
            va, vb = psi.theta[a], psi.theta[b]
            A = np.column_stack([va[:, 1] - va[:, 0], -(vb[:, 1] - vb[:, 0])])
            rhs = vb[:, 0] - va[:, 0]
            st, res, _, _ = np.linalg.lstsq(A, rhs, rcond=None)
            assert np.linalg.norm(A @ st - rhs) < 1e-12
            assert -1e-12 <= st[0] <= 1 + 1e-12 and -1e-12 <= st[1] <= 1 + 1e-12


def test_single_polytope_is_planar_quadrilateral():
    psi = make_setting("single-polytope", seed=2)
    assert psi.d == 4 and psi.D == 20
    assert affine_dimension(psi.theta[0].T) == 2
    from polymix.geometry import check_total_exposure

    ok, _ = check_total_exposure(PolytopeSet(psi.theta))
    assert ok  # all 4 vertices exposed


def test_setting2_seed_changes_randomized_fields_only():
    a = make_setting(2, seed=1)
    b = make_setting(2, seed=2)
    assert a.K == b.K and a.d == b.d and a.D == b.D
    assert np.array_equal(a.alpha, b.alpha)
    assert not np.array_equal(a.theta, b.theta)
    assert make_setting(2, seed=1).to_dict() == a.to_dict()


def test_unknown_setting_rejected():
    with pytest.raises(ValueError):
        make_setting("nope", 0)


def test_derive_seed_is_stable_and_spread():
    s1 = derive_seed(1, "data", 100, 0)
    s2 = derive_seed(1, "data", 100, 1)
    assert s1 == derive_seed(1, "data", 100, 0)
    assert s1 != s2
