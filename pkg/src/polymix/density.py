"""Model density and log-likelihood under frozen latent atoms.

With atoms (beta_1..beta_M, w_1..w_M) the component integral collapses to a
K*M-cell isotropic Gaussian mixture:

    log p(x) = log sum_k pi_k sum_j w_j phi_D(x | Theta_k beta_j, sigma2_k I)

Everything is evaluated in log space through the shared kernels; no term is
allowed to underflow to -inf for finite inputs.
"""

from __future__ import annotations

import numpy as np

from polymix import kernels
from polymix.params import Dataset, LatentAtoms, MixtureParams

_LOG_FLOOR = -745.0  # log of the smallest positive normal double, with margin


def component_grid(psi: MixtureParams, atoms: LatentAtoms):
    """Flatten (component, atom) cells to (means, sigma2, logw) arrays.

    Cell c = k * M + j carries mean Theta_k beta_j, variance sigma2_k and
    log-weight log(pi_k * w_j).  Zero weights are floored in log space so the
    log-sum-exp never sees -inf.
    """
    if atoms.d != psi.d:
        raise ValueError(f"atoms have d={atoms.d} but parameters have d={psi.d}")
    K, M = psi.K, atoms.M
    means = np.einsum("krd,md->kmr", psi.theta, atoms.betas).reshape(K * M, psi.D)
    sigma2 = np.repeat(psi.sigma2, M)
    with np.errstate(divide="ignore"):
        logw = (
            np.repeat(np.log(np.maximum(psi.pi, 0.0)), M)
            + np.tile(np.log(np.maximum(atoms.weights, 0.0)), K)
        )
    return means, sigma2, np.maximum(logw, _LOG_FLOOR)


def logpdf_rows(X: np.ndarray, psi: MixtureParams, atoms: LatentAtoms) -> np.ndarray:
    """Log-density of each row of X (shape (n, D)) under the atomized model."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != psi.D:
        raise ValueError(f"X has {X.shape[1]} columns but parameters have D={psi.D}")
    means, sigma2, logw = component_grid(psi, atoms)
    return kernels.mixture_logpdf(X, means, sigma2, logw)


def logpdf_point(x, psi: MixtureParams, atoms: LatentAtoms) -> float:
    """Log-density at a single point x (length-D vector)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    return float(logpdf_rows(x[None, :], psi, atoms)[0])


def loglik(data: Dataset, psi: MixtureParams, atoms: LatentAtoms) -> float:
    """Total log-likelihood; the empty dataset gives 0 (log of empty product)."""
    if data.n == 0:
        return 0.0
    if data.D != psi.D:
        raise ValueError(f"data has D={data.D} but parameters have D={psi.D}")
    return float(np.sum(logpdf_rows(data.X, psi, atoms)))
