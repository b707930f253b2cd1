"""Small seeded k-means used for initialization and rotation matching."""

from __future__ import annotations

import numpy as np


def _plusplus_seed(X: np.ndarray, k: int, rng) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j:] = X[rng.integers(n, size=k - j)]
            break
        centers[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, iters: int):
    labels = np.zeros(X.shape[0], dtype=int)
    for _ in range(iters):
        d2 = (
            np.sum(X * X, axis=1)[:, None]
            - 2.0 * X @ centers.T
            + np.sum(centers * centers, axis=1)[None, :]
        )
        new_labels = np.argmin(d2, axis=1)
        for j in range(centers.shape[0]):
            mask = new_labels == j
            if np.any(mask):
                centers[j] = X[mask].mean(axis=0)
            else:  # re-seed an empty cluster at the worst-served point
                centers[j] = X[np.argmax(np.min(d2, axis=1))]
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return centers, labels


def kmeans(X: np.ndarray, k: int, seed: int, n_restarts: int = 1, iters: int = 100):
    """Seeded k-means++ with Lloyd refinement; returns (centers, labels)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] < k:
        raise ValueError(f"need at least {k} points for {k} clusters")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, n_restarts)):
        centers, labels = _lloyd(X, _plusplus_seed(X, k, rng), iters)
        inertia = float(np.sum((X - centers[labels]) ** 2))
        if best is None or inertia < best[0]:
            best = (inertia, centers, labels)
    return best[1], best[2]
