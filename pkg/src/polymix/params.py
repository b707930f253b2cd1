"""Parameter records and latent-atom containers for the polytope mixture model.

A model instance has K components.  Component k is a cloud of d end-members
(the columns of a D x d matrix), a mixture weight pi_k, and an isotropic
Gaussian noise variance sigma2_k.  Observations are noisy convex combinations
of one component's end-members; the convex weights follow a Dirichlet law with
concentration ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

PI_SUM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
SIMPLEX_ROW_TOL = 1e-10


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass
class MixtureParams:
    """Full parameter record: (theta, pi, sigma2) plus the Dirichlet alpha.

    theta has shape (K, D, d); theta[k, :, j] is end-member j of component k.
    The record allows d > D so degenerate configurations remain testable.
    """

    theta: np.ndarray
    pi: np.ndarray
    sigma2: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.theta = _as_float_array(self.theta, "theta")
        if self.theta.ndim != 3:
            raise ValueError("theta must have shape (K, D, d)")
        self.pi = _as_float_array(self.pi, "pi")
        self.sigma2 = _as_float_array(self.sigma2, "sigma2")
        self.alpha = _as_float_array(self.alpha, "alpha")
        K = self.theta.shape[0]
        if self.pi.shape != (K,) or self.sigma2.shape != (K,):
            raise ValueError("pi and sigma2 must have length K")
        if self.alpha.shape != (self.theta.shape[2],):
            raise ValueError("alpha must have length d")
        if np.any(self.pi < 0) or abs(self.pi.sum() - 1.0) > PI_SUM_TOL:
            raise ValueError("pi entries must be >= 0 and sum to 1")
        if np.any(self.sigma2 <= 0):
            raise ValueError("sigma2 entries must be > 0")
        if np.any(self.alpha <= 0):
            raise ValueError("alpha entries must be > 0")

    @property
    def K(self) -> int:
        return self.theta.shape[0]

    @property
    def D(self) -> int:
        return self.theta.shape[1]

    @property
    def d(self) -> int:
        return self.theta.shape[2]

    def permuted(self, order: Sequence[int]) -> "MixtureParams":
        """Relabel components by ``order`` (new k = old order[k])."""
        idx = np.asarray(order)
        return MixtureParams(self.theta[idx], self.pi[idx], self.sigma2[idx], self.alpha)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "d": self.d,
            "D": self.D,
            "theta": self.theta.tolist(),
            "pi": self.pi.tolist(),
            "sigma2": self.sigma2.tolist(),
            "alpha": self.alpha.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MixtureParams":
        psi = cls(
            theta=np.asarray(doc["theta"], dtype=float),
            pi=np.asarray(doc["pi"], dtype=float),
            sigma2=np.asarray(doc["sigma2"], dtype=float),
            alpha=np.asarray(doc["alpha"], dtype=float),
        )
        for key in ("K", "d", "D"):
            if key in doc and int(doc[key]) != getattr(psi, key):
                raise ValueError(f"declared {key}={doc[key]} does not match theta shape")
        return psi


@dataclass
class Dataset:
    """n observations in R^D, optionally carrying the generating latents."""

    X: np.ndarray
    z: Optional[np.ndarray] = None
    beta: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if self.X.size == 0:
            self.X = self.X.reshape(0, self.X.shape[1] if self.X.ndim == 2 else 0)
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite entries")
        if self.z is not None:
            self.z = np.asarray(self.z, dtype=int)
            if self.z.shape != (self.n,):
                raise ValueError("z must have length n")
            if self.z.size and self.z.min() < 0:
                raise ValueError("z entries must be >= 0")
        if self.beta is not None:
            self.beta = _as_float_array(self.beta, "beta")
            if self.beta.ndim != 2 or self.beta.shape[0] != self.n:
                raise ValueError("beta must have shape (n, d)")
            if self.beta.size:
                if np.any(self.beta < -SIMPLEX_ROW_TOL):
                    raise ValueError("beta rows must be nonnegative")
                if np.max(np.abs(self.beta.sum(axis=1) - 1.0)) > SIMPLEX_ROW_TOL:
                    raise ValueError("beta rows must sum to 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def D(self) -> int:
        return self.X.shape[1]


@dataclass
class LatentAtoms:
    """M fixed simplex points with weights; freezes the admixing integral.

    ``betas`` has shape (M, d); ``weights`` is nonnegative and sums to one.
    """

    betas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.betas = np.atleast_2d(_as_float_array(self.betas, "betas"))
        self.weights = _as_float_array(self.weights, "weights")
        if self.weights.shape != (self.betas.shape[0],):
            raise ValueError("weights must have length M")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError("weights must be >= 0 and sum to 1")
        if np.any(self.betas < -SIMPLEX_ROW_TOL):
            raise ValueError("atom rows must be nonnegative")
        if np.max(np.abs(self.betas.sum(axis=1) - 1.0)) > SIMPLEX_ROW_TOL:
            raise ValueError("atom rows must sum to 1")

    @property
    def M(self) -> int:
        return self.betas.shape[0]

    @property
    def d(self) -> int:
        return self.betas.shape[1]

    @classmethod
    def sample(cls, d: int, M: int, alpha=None, seed: int = 0) -> "LatentAtoms":
        """Draw M atoms from Dir(alpha) (flat if alpha is None), uniform weights.

        Sampling from the admixing law itself keeps the uniform-weight Monte
        Carlo average unbiased for the true component density; importance
        weights against a flat proposal would have unbounded variance for
        alpha entries below 1/2.
        """
        from polymix.simulate import sample_dirichlet

        if d == 1:
            return cls(np.ones((1, 1)), np.ones(1))
        a = np.full(d, 1.0) if alpha is None else np.asarray(alpha, dtype=float)
        betas = sample_dirichlet(a, M, seed)
        return cls(betas, np.full(M, 1.0 / M))

    @classmethod
    def grid(cls, d: int, M: int, alpha=None) -> "LatentAtoms":
        """Deterministic quadrature atoms: midpoint grid weighted by the
        Dirichlet density.  Only d <= 2 is supported; higher-dimensional
        simplex lattices grow combinatorially and are not needed by any
        quadrature consumer here.
        """
        if d == 1:
            return cls(np.ones((1, 1)), np.ones(1))
        if d != 2:
            raise ValueError("grid atoms support d <= 2 only")
        a = np.full(2, 1.0) if alpha is None else np.asarray(alpha, dtype=float)
        t = (np.arange(M) + 0.5) / M
        betas = np.column_stack([t, 1.0 - t])
        logw = (a[0] - 1.0) * np.log(t) + (a[1] - 1.0) * np.log(1.0 - t)
        logw -= logw.max()
        w = np.exp(logw)
        w /= w.sum()
        return cls(betas, w)


@dataclass
class FitResult:
    """Estimated parameters plus fit diagnostics."""

    psi_hat: MixtureParams
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    restarts_used: int
    seed: int
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "psi_hat": self.psi_hat.to_dict(),
            "objective_trace": np.asarray(self.objective_trace).tolist(),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "restarts_used": int(self.restarts_used),
            "seed": int(self.seed),
            "wall_time": float(self.wall_time),
        }


@dataclass
class EvalReport:
    """Permutation-matched distance between two parameter records."""

    distance: float
    component_perm: list = field(default_factory=list)
    vertex_perms: list = field(default_factory=list)
    per_component: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "distance": float(self.distance),
            "component_perm": [int(i) for i in self.component_perm],
            "vertex_perms": [[int(j) for j in p] for p in self.vertex_perms],
            "per_component": self.per_component,
        }
