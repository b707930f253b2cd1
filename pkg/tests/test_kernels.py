"""Backend agreement: compiled kernels must match the numpy fallback."""

import numpy as np
import pytest

from polymix import kernels


def _case(rng, n=57, C=23, D=5):
    X = rng.standard_normal((n, D))
    means = rng.standard_normal((C, D))
    sigma2 = rng.uniform(0.2, 2.0, C)
    logw = np.log(rng.dirichlet(np.ones(C)))
    return X, means, sigma2, logw


needs_compiled = pytest.mark.skipif(
    not kernels.using_compiled(), reason="compiled backend not built"
)


@needs_compiled
def test_mixture_logpdf_matches_fallback(rng):
    X, means, sigma2, logw = _case(rng)
    fast = kernels.mixture_logpdf(X, means, sigma2, logw)
    ref = kernels._np_log_density(X, means, sigma2) + logw[None, :]
    m = ref.max(axis=1)
    ref = m + np.log(np.sum(np.exp(ref - m[:, None]), axis=1))
    assert np.allclose(fast, ref, rtol=1e-12, atol=1e-12)


@needs_compiled
def test_responsibilities_match_fallback(rng):
    X, means, sigma2, logw = _case(rng)
    resp, lse = kernels.responsibilities(X, means, sigma2, logw)
    L = kernels._np_log_density(X, means, sigma2) + logw[None, :]
    m = L.max(axis=1)
    W = np.exp(L - m[:, None])
    s = W.sum(axis=1)
    assert np.allclose(resp, W / s[:, None], rtol=1e-11, atol=1e-13)
    assert np.allclose(lse, m + np.log(s), rtol=1e-12)
    assert np.allclose(resp.sum(axis=1), 1.0, atol=1e-12)


def test_weighted_sqdist_matches_direct(rng):
    X, means, sigma2, logw = _case(rng, n=31, C=7, D=4)
    W = rng.uniform(0.0, 1.0, (31, 7))
    direct = np.array(
        [np.sum(W[:, c] * np.sum((X - means[c]) ** 2, axis=1)) for c in range(7)]
    )
    assert np.allclose(kernels.weighted_sqdist(X, means, W), direct, rtol=1e-10)
    # benchmark-only compiled variant must agree as well
    assert np.allclose(kernels.weighted_sqdist_compiled(X, means, W), direct, rtol=1e-10)


def test_extreme_logweights_do_not_overflow(rng):
    X = rng.standard_normal((4, 3)) * 100.0
    means = rng.standard_normal((5, 3))
    sigma2 = np.full(5, 1e-6)
    logw = np.full(5, np.log(0.2))
    out = kernels.mixture_logpdf(X, means, sigma2, logw)
    assert np.all(np.isfinite(out))


def test_empty_rows():
    out = kernels.mixture_logpdf(np.zeros((0, 3)), np.zeros((2, 3)), np.ones(2),
                                 np.log(np.full(2, 0.5)))
    assert out.shape == (0,)
