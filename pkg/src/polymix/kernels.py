"""Hot numeric kernels with a compiled core and a numpy fallback.

Every fitter and density evaluation in this package funnels through three
operations on an n x C grid of isotropic Gaussians (C = K*M flattened
component/atom cells):

* ``mixture_logpdf``    -- per-row log sum_c exp(logw_c + log phi(x_i | mu_c))
* ``responsibilities``  -- the same plus the normalized posterior matrix
* ``weighted_sqdist``   -- sum_i W[i, c] * ||x_i - mu_c||^2 per column

The compiled extension (``polymix._fastkern``, Cython + OpenMP) fuses the
distance, exp and normalization loops; the fallback uses BLAS matmuls with
row chunking so peak memory stays bounded.  Set ``POLYMIX_BACKEND=numpy`` to
force the fallback.  Results of the two backends agree to floating-point
roundoff; they are individually deterministic at a fixed thread count.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by the backend tests
    from polymix import _fastkern as _fast
except ImportError:
    _fast = None

if os.environ.get("POLYMIX_BACKEND", "").lower() in {"numpy", "python", "ref"}:
    _fast = None

BACKEND = "compiled" if _fast is not None else "numpy"

_CHUNK_BUDGET = 4_000_000  # max temporary elements per fallback chunk


def using_compiled() -> bool:
    return _fast is not None


def set_num_threads(k: int) -> None:
    """Set the OpenMP thread count for the compiled kernels (no-op on numpy)."""
    if _fast is not None:
        _fast.set_num_threads(max(1, int(k)))


def _default_threads() -> int:
    env = os.environ.get("POLYMIX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


set_num_threads(_default_threads())


def _gauss_log_norm(sigma2: np.ndarray, D: int) -> np.ndarray:
    return -0.5 * D * np.log(2.0 * np.pi * sigma2)


def _chunks(n: int, C: int):
    step = max(1, _CHUNK_BUDGET // max(1, C))
    for lo in range(0, n, step):
        yield lo, min(n, lo + step)


def _np_log_density(X: np.ndarray, means: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    D = X.shape[1]
    sq = (
        np.sum(X * X, axis=1)[:, None]
        - 2.0 * (X @ means.T)
        + np.sum(means * means, axis=1)[None, :]
    )
    np.maximum(sq, 0.0, out=sq)
    return _gauss_log_norm(sigma2, D)[None, :] - sq / (2.0 * sigma2)[None, :]


def mixture_logpdf(X, means, sigma2, logw) -> np.ndarray:
    """Row-wise log-density of the C-cell isotropic Gaussian mixture.

    X: (n, D); means: (C, D); sigma2, logw: (C,).  Returns (n,).
    """
    X = np.ascontiguousarray(X, dtype=float)
    means = np.ascontiguousarray(means, dtype=float)
    sigma2 = np.ascontiguousarray(sigma2, dtype=float)
    logw = np.ascontiguousarray(logw, dtype=float)
    n = X.shape[0]
    if n == 0:
        return np.zeros(0)
    if _fast is not None:
        out = np.empty(n)
        _fast.mixture_logpdf(X, means, sigma2, logw, out)
        return out
    out = np.empty(n)
    for lo, hi in _chunks(n, means.shape[0]):
        L = _np_log_density(X[lo:hi], means, sigma2) + logw[None, :]
        m = L.max(axis=1)
        out[lo:hi] = m + np.log(np.sum(np.exp(L - m[:, None]), axis=1))
    return out


def responsibilities(X, means, sigma2, logw):
    """Posterior cell probabilities and the per-row log-normalizers.

    Returns ``(resp, lse)`` with resp shape (n, C) row-stochastic and
    lse[i] = log sum_c exp(logw_c + log phi(x_i | mu_c, sigma2_c I)).
    """
    X = np.ascontiguousarray(X, dtype=float)
    means = np.ascontiguousarray(means, dtype=float)
    sigma2 = np.ascontiguousarray(sigma2, dtype=float)
    logw = np.ascontiguousarray(logw, dtype=float)
    n, C = X.shape[0], means.shape[0]
    if n == 0:
        return np.zeros((0, C)), np.zeros(0)
    if _fast is not None:
        resp = np.empty((n, C))
        lse = np.empty(n)
        _fast.responsibilities(X, means, sigma2, logw, resp, lse)
        return resp, lse
    L = _np_log_density(X, means, sigma2) + logw[None, :]
    m = L.max(axis=1)
    np.subtract(L, m[:, None], out=L)
    np.exp(L, out=L)
    s = L.sum(axis=1)
    L /= s[:, None]
    return L, m + np.log(s)


def weighted_sqdist(X, means, W) -> np.ndarray:
    """Per-column weighted squared distances: out[c] = sum_i W[i,c]*||x_i - mu_c||^2.

    Always uses the BLAS formulation: the expansion below is a pair of
    matmuls, which beats the compiled scalar loop by ~5x at fitter shapes
    (see benchmarks/bench_kernels.py, which still measures both).
    """
    X = np.ascontiguousarray(X, dtype=float)
    means = np.ascontiguousarray(means, dtype=float)
    W = np.ascontiguousarray(W, dtype=float)
    if X.shape[0] == 0:
        return np.zeros(means.shape[0])
    xsq = np.sum(X * X, axis=1)
    col_w = W.sum(axis=0)
    cross = W.T @ X
    return W.T @ xsq - 2.0 * np.sum(cross * means, axis=1) + col_w * np.sum(means * means, axis=1)


def weighted_sqdist_compiled(X, means, W) -> np.ndarray:
    """Compiled scalar-loop variant, kept for benchmarking only."""
    if _fast is None:
        return weighted_sqdist(X, means, W)
    X = np.ascontiguousarray(X, dtype=float)
    means = np.ascontiguousarray(means, dtype=float)
    W = np.ascontiguousarray(W, dtype=float)
    out = np.empty(means.shape[0])
    _fast.weighted_sqdist(X, means, W, out)
    return out
