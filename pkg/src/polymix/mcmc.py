"""Bayesian samplers: grouped-independent MH and the augmented Gibbs chain.

The grouped-independent sampler targets the marginal posterior of
(pi, Theta, sigma2) with the intractable per-point integral replaced by a
Monte Carlo average over M fresh simplex draws per observation.  Draws are
proposed together with the parameter move and kept on acceptance, so only the
estimated log-likelihood needs to be stored; on rejection the previous draws
(equivalently, their likelihood value) are retained, which is what makes the
chain exact for the marginal target.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln

from polymix.metrics import metric_d
from polymix.params import Dataset, MixtureParams

_TINY = 1e-300


@dataclass
class PriorSpec:
    """Prior hyperparameters shared by both samplers.

    pi0: Dirichlet concentration for the weights; sigma0_sq: variance of the
    Gaussian prior on end-member entries; lambda0: exponential rate on each
    sigma2_k (grouped sampler); a0, b0: inverse-gamma shape/rate for sigma2
    (Gibbs); B: concentration of the Dirichlet proposal for latent rows;
    alpha_rate: exponential rate on each concentration entry (Gibbs).
    """

    pi0: float = 1.0
    sigma0_sq: float = 10.0
    lambda0: float = 1.0
    a0: float = 2.0
    b0: float = 2.0
    B: float = 50.0
    alpha_rate: float = 1.0

    def __post_init__(self):
        for name in ("sigma0_sq", "lambda0", "a0", "b0", "B", "alpha_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if np.any(np.asarray(self.pi0) <= 0):
            raise ValueError("pi0 must be > 0")

    def pi0_vector(self, K: int) -> np.ndarray:
        p = np.asarray(self.pi0, dtype=float)
        return np.full(K, float(p)) if p.ndim == 0 else p


@dataclass
class GimhState:
    psi: MixtureParams
    log_lik_tilde: float
    step_sizes: dict = field(default_factory=lambda: {"theta": 0.02, "sigma2": 0.01, "pi": 0.02})
    accept_count: int = 0
    step_count: int = 0

    def __post_init__(self):
        if not np.isfinite(self.log_lik_tilde):
            raise ValueError("stored log-likelihood must be finite")
        # zero is allowed: a degenerate scale freezes that block and the move
        # reduces to pure likelihood re-estimation
        if any(v < 0 for v in self.step_sizes.values()):
            raise ValueError("step sizes must be >= 0")


def dirichlet_logpdf(B: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    """Row-wise log Dir(B_i; alphas_i); alphas may be a single vector."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    alphas = np.asarray(alphas, dtype=float)
    if alphas.ndim == 1:
        alphas = np.broadcast_to(alphas, B.shape)
    logB = np.log(np.maximum(B, _TINY))
    return (
        np.sum((alphas - 1.0) * logB, axis=1)
        + gammaln(alphas.sum(axis=1))
        - np.sum(gammaln(alphas), axis=1)
    )


def dirichlet_proposal_log_ratio(beta: np.ndarray, beta_prime: np.ndarray, B: float) -> np.ndarray:
    """log q(beta | beta') - log q(beta' | beta) for Dir(B * current) proposals."""
    cur = np.maximum(np.atleast_2d(beta), _TINY)
    prop = np.maximum(np.atleast_2d(beta_prime), _TINY)
    return dirichlet_logpdf(cur, B * prop) - dirichlet_logpdf(prop, B * cur)


def _chunked_gimh_loglik(X, psi, betas):
    n, M, _ = betas.shape
    D = X.shape[1]
    K = psi.K
    logpi = np.log(np.maximum(psi.pi, _TINY))
    L = np.empty((n, K, M))
    for k in range(K):
        means = betas.reshape(n * M, -1) @ psi.theta[k].T
        sq = np.sum((np.repeat(X, M, axis=0) - means) ** 2, axis=1).reshape(n, M)
        L[:, k, :] = (
            logpi[k]
            - 0.5 * D * np.log(2.0 * np.pi * psi.sigma2[k])
            - sq / (2.0 * psi.sigma2[k])
        )
    L = L.reshape(n, K * M)
    m = L.max(axis=1)
    return float(np.sum(m + np.log(np.sum(np.exp(L - m[:, None]), axis=1)) - np.log(M)))


def gimh_loglik(X: np.ndarray, psi: MixtureParams, betas: np.ndarray) -> float:
    """Monte Carlo log-likelihood with per-observation simplex draws.

    betas has shape (n, M, d); observation i uses its own M draws.
    """
    if X.shape[0] == 0:
        return 0.0
    return _chunked_gimh_loglik(X, psi, betas)


def log_prior_gimh(psi: MixtureParams, prior: PriorSpec) -> float:
    pi0 = prior.pi0_vector(psi.K)
    lp = float(
        np.sum((pi0 - 1.0) * np.log(np.maximum(psi.pi, _TINY)))
        + gammaln(pi0.sum())
        - np.sum(gammaln(pi0))
    )
    lp += float(
        -0.5 * np.sum(psi.theta**2) / prior.sigma0_sq
        - 0.5 * psi.theta.size * np.log(2.0 * np.pi * prior.sigma0_sq)
    )
    lp += float(psi.K * np.log(prior.lambda0) - prior.lambda0 * np.sum(psi.sigma2))
    return lp


def _draw_betas(rng, alpha, n, M):
    d = alpha.shape[0]
    if d == 1:
        return np.ones((n, M, 1))
    g = rng.gamma(shape=alpha, size=(n, M, d))
    s = g.sum(axis=2)
    s[s <= 0] = 1.0
    return g / s[..., None]


def gimh_step(
    state: GimhState,
    data: Dataset,
    atoms_M: int,
    prior: PriorSpec,
    rng: np.random.Generator,
    update_sigma2: bool = True,
    betas: Optional[np.ndarray] = None,
) -> GimhState:
    """One grouped-independent MH move; returns the new state.

    The proposal is a symmetric random walk: Gaussian on end-member entries,
    reflected Gaussian on variances, and a zero-sum Gaussian on the weights
    with boundary violations counted as rejections.  A fresh latent collection
    is drawn for the proposal only; the retained likelihood stands in for the
    previous collection.
    """
    psi = state.psi
    ss = state.step_sizes
    theta_new = psi.theta + ss["theta"] * rng.standard_normal(psi.theta.shape)
    if update_sigma2:
        sigma2_new = np.abs(psi.sigma2 + ss["sigma2"] * rng.standard_normal(psi.K))
        sigma2_new = np.maximum(sigma2_new, 1e-12)
    else:
        sigma2_new = psi.sigma2.copy()
    if psi.K > 1:
        move = ss["pi"] * rng.standard_normal(psi.K)
        move -= move.mean()
        pi_new = psi.pi + move
        if np.any(pi_new < 0):
            return dataclasses.replace(state, step_count=state.step_count + 1)
        pi_new /= pi_new.sum()
    else:
        pi_new = psi.pi.copy()
    psi_new = MixtureParams(theta_new, pi_new, sigma2_new, psi.alpha)
    if betas is None:
        betas = _draw_betas(rng, psi.alpha, data.n, atoms_M)
    ll_new = gimh_loglik(data.X, psi_new, betas)
    log_r = (
        log_prior_gimh(psi_new, prior)
        + ll_new
        - log_prior_gimh(psi, prior)
        - state.log_lik_tilde
    )
    if np.log(rng.uniform()) < log_r:
        return GimhState(
            psi=psi_new,
            log_lik_tilde=ll_new,
            step_sizes=state.step_sizes,
            accept_count=state.accept_count + 1,
            step_count=state.step_count + 1,
        )
    return dataclasses.replace(state, step_count=state.step_count + 1)


def _aligned_mean(samples):
    """Average samples after aligning component labels (and vertex columns)
    of each sample to the running mean."""
    acc_theta = samples[0].theta.copy()
    acc_pi = samples[0].pi.copy()
    acc_s2 = samples[0].sigma2.copy()
    for t, psi in enumerate(samples[1:], start=2):
        mean_psi = MixtureParams(
            acc_theta / (t - 1), acc_pi / np.sum(acc_pi), acc_s2 / (t - 1), psi.alpha
        )
        rep = metric_d(mean_psi, psi)
        for a in range(psi.K):
            b = rep.component_perm[a]
            perm = rep.vertex_perms[a]
            acc_theta[a] += psi.theta[b][:, perm]
            acc_pi[a] += psi.pi[b]
            acc_s2[a] += psi.sigma2[b]
    T = len(samples)
    pi = acc_pi / T
    return MixtureParams(acc_theta / T, pi / pi.sum(), acc_s2 / T, samples[0].alpha)


def run_gimh(
    data: Dataset,
    K: int,
    d: int,
    prior: PriorSpec,
    n_iter: int = 20000,
    burn_in: int = 15000,
    thin: int = 100,
    atoms_M: int = 20,
    seed: int = 0,
    alpha=None,
    step_sizes: Optional[dict] = None,
    init: Optional[MixtureParams] = None,
    update_sigma2: bool = True,
):
    """Run the grouped-independent chain; returns (samples, diagnostics).

    Retains every ``thin``-th state after ``burn_in`` (the defaults keep 50 of
    20000).  Diagnostics hold the acceptance rate and the label-aligned
    posterior mean of the retained samples.
    """
    if n_iter <= burn_in:
        raise ValueError("need n_iter > burn_in")
    rng = np.random.default_rng(seed)
    alpha = np.full(d, 1.0) if alpha is None else np.asarray(alpha, dtype=float)
    if init is None:
        pi = rng.dirichlet(prior.pi0_vector(K))
        theta = np.sqrt(prior.sigma0_sq) * rng.standard_normal((K, data.X.shape[1], d))
        sigma2 = rng.exponential(1.0 / prior.lambda0, size=K) + 1e-6
        init = MixtureParams(theta, pi, sigma2, alpha)
    betas0 = _draw_betas(rng, alpha, data.n, atoms_M)
    state = GimhState(
        psi=init,
        log_lik_tilde=gimh_loglik(data.X, init, betas0),
        step_sizes=step_sizes or {"theta": 0.02, "sigma2": 0.01, "pi": 0.02},
    )
    samples = []
    for t in range(1, n_iter + 1):
        state = gimh_step(state, data, atoms_M, prior, rng, update_sigma2)
        if t > burn_in and (t - burn_in) % thin == 0:
            samples.append(state.psi)
    diagnostics = {
        "acceptance_rate": state.accept_count / max(state.step_count, 1),
        "n_retained": len(samples),
        "posterior_mean": _aligned_mean(samples) if samples else None,
    }
    return samples, diagnostics


def gibbs_augmented_k1(
    data: Dataset,
    d: int,
    prior: PriorSpec,
    n_iter: int,
    seed: int = 0,
    alpha_step: float = 0.1,
    init_alpha=None,
    fixed_beta: Optional[np.ndarray] = None,
    update_alpha: bool = True,
    keep_beta: bool = False,
):
    """Augmented Gibbs sampler for the single-component model.

    Cycles exact conditionals for sigma2 (inverse gamma) and Theta (matrix
    normal over rows) with MH moves for each latent simplex row (Dirichlet
    proposal centered at the current value) and for the concentration vector
    (positive-constrained random walk, exponential prior).  ``fixed_beta``
    freezes the latents, which reduces the chain to the Bayesian-regression
    conditionals used by the validation oracle.

    Returns a dict of chains: theta (T, D, d), sigma2 (T,), alpha (T, d),
    optional beta (T, n, d), and MH acceptance rates.
    """
    rng = np.random.default_rng(seed)
    X = data.X
    n, D = X.shape
    alpha = np.full(d, 1.0) if init_alpha is None else np.asarray(init_alpha, dtype=float).copy()
    if fixed_beta is not None:
        beta = np.asarray(fixed_beta, dtype=float).copy()
        update_beta = False
    else:
        beta = _draw_betas(rng, alpha, n, 1)[:, 0, :] if n else np.zeros((0, d))
        update_beta = n > 0
    sigma2 = 1.0
    theta = np.zeros((D, d))
    chains = {
        "theta": np.empty((n_iter, D, d)),
        "sigma2": np.empty(n_iter),
        "alpha": np.empty((n_iter, d)),
    }
    if keep_beta:
        chains["beta"] = np.empty((n_iter, n, d))
    beta_accepts = 0
    beta_proposals = 0
    alpha_accepts = 0
    alpha_proposals = 0
    eye_d = np.eye(d)
    for t in range(n_iter):
        resid = X - beta @ theta.T if n else np.zeros((0, D))
        a_n = prior.a0 + n * D
        b_n = prior.b0 + float(np.sum(resid**2))
        sigma2 = 1.0 / rng.gamma(shape=a_n / 2.0, scale=2.0 / b_n)
        prec = eye_d / prior.sigma0_sq + (beta.T @ beta) / sigma2 if n else eye_d / prior.sigma0_sq
        cov = np.linalg.inv(prec)
        mu_n = (X.T @ beta) @ cov / sigma2 if n else np.zeros((D, d))
        chol = np.linalg.cholesky(cov)
        theta = mu_n + rng.standard_normal((D, d)) @ chol.T

        if update_beta:
            prop = _proposal_dirichlet_rows(rng, beta, prior.B)
            cur_fit = -0.5 * np.sum((X - beta @ theta.T) ** 2, axis=1) / sigma2
            new_fit = -0.5 * np.sum((X - prop @ theta.T) ** 2, axis=1) / sigma2
            log_r = (
                new_fit
                - cur_fit
                + dirichlet_logpdf(prop, alpha)
                - dirichlet_logpdf(beta, alpha)
                + dirichlet_proposal_log_ratio(beta, prop, prior.B)
            )
            accept = np.log(rng.uniform(size=n)) < log_r
            beta[accept] = prop[accept]
            beta_accepts += int(accept.sum())
            beta_proposals += n

        if update_alpha:
            alpha_prop = alpha + alpha_step * rng.standard_normal(d)
            alpha_proposals += 1
            if np.all(alpha_prop > 0):
                log_r = -prior.alpha_rate * float(np.sum(alpha_prop - alpha))
                if n:
                    log_r += float(
                        np.sum(dirichlet_logpdf(beta, alpha_prop))
                        - np.sum(dirichlet_logpdf(beta, alpha))
                    )
                if np.log(rng.uniform()) < log_r:
                    alpha = alpha_prop
                    alpha_accepts += 1

        chains["theta"][t] = theta
        chains["sigma2"][t] = sigma2
        chains["alpha"][t] = alpha
        if keep_beta:
            chains["beta"][t] = beta
    chains["beta_accept_rate"] = beta_accepts / max(beta_proposals, 1)
    chains["alpha_accept_rate"] = alpha_accepts / max(alpha_proposals, 1)
    return chains


def _proposal_dirichlet_rows(rng, beta, B):
    param = B * np.maximum(beta, 1e-10)
    g = rng.gamma(shape=param)
    s = g.sum(axis=1)
    s[s <= 0] = 1.0
    return g / s[:, None]
