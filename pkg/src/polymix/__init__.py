"""Finite mixtures of Gaussian-noised distributions on convex polytopes.

Simulation, four estimation algorithms (atomized EM, Gaussian moment
matching, spectral method of moments, MCMC), permutation-matched evaluation,
geometric identifiability checks, and BIC model selection.
"""

__version__ = "0.1.0"

from polymix.params import (  # noqa: F401
    Dataset,
    EvalReport,
    FitResult,
    LatentAtoms,
    MixtureParams,
)
