"""BIC model selection over a (K, d) grid."""

from __future__ import annotations

from typing import Optional

import numpy as np

from polymix.density import loglik
from polymix.em import EMConfig, fit_em
from polymix.params import Dataset, LatentAtoms, MixtureParams
from polymix.simulate import derive_seed


def free_params(K: int, d: int, D: int) -> int:
    """Number of free parameters: K*D*d end-member coordinates, K variances,
    and K-1 independent weights."""
    if K <= 0 or d <= 0 or D <= 0:
        raise ValueError("K, d, D must be positive")
    return K * D * d + 2 * K - 1


def bic(data: Dataset, psi_hat: MixtureParams, M_loglik: int = 1000, seed: int = 0) -> float:
    """-2 log-likelihood (Monte Carlo atoms) plus the dimension penalty."""
    atoms = LatentAtoms.sample(
        psi_hat.d, M_loglik, psi_hat.alpha, seed=derive_seed(seed, "bic-atoms")
    )
    ll = loglik(data, psi_hat, atoms)
    return -2.0 * ll + free_params(psi_hat.K, psi_hat.d, psi_hat.D) * np.log(data.n)


def select_grid(
    data: Dataset,
    K_range,
    d_range,
    atoms_M: int = 200,
    M_loglik: int = 1000,
    config: Optional[EMConfig] = None,
    seed: int = 0,
    alpha_value: float = 1.0,
):
    """Fit every (K, d) cell with EM and score by BIC.

    Returns ``(cells, best)``; cells are dicts with K, d, bic, loglik,
    converged (fit failures recorded with bic = nan and excluded from the
    argmin).  Ties break toward the smaller model, K first then d.
    """
    K_range = list(K_range)
    d_range = list(d_range)
    if not K_range or not d_range:
        raise ValueError("ranges must be nonempty")
    cells = []
    for K in K_range:
        for d in d_range:
            cell = {"K": int(K), "d": int(d)}
            try:
                fit = fit_em(
                    data,
                    K,
                    d,
                    atoms_M=atoms_M,
                    config=config,
                    seed=derive_seed(seed, "cell", K, d),
                    alpha=np.full(d, alpha_value),
                )
                cell["bic"] = float(bic(data, fit.psi_hat, M_loglik, seed=seed))
                cell["loglik"] = float(fit.objective_trace[-1])
                cell["converged"] = bool(fit.converged)
            except Exception as exc:  # failed cells stay in the table
                cell.update({"bic": float("nan"), "loglik": float("nan"),
                             "converged": False, "error": str(exc)})
            cells.append(cell)
    valid = [c for c in cells if np.isfinite(c["bic"])]
    if not valid:
        raise ValueError("every grid cell failed to fit")
    best = min(valid, key=lambda c: (c["bic"], c["K"], c["d"]))
    return cells, (best["K"], best["d"])
