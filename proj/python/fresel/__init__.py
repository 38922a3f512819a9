"""Additive kernel regression with sparse covariate selection for metric space responses."""

from ._fresel import (
    holdout_indices,
    mix_seed,
    uniform_index,
    __version__,
    cholesky_dist_sq,
    fit,
    frechet_mean,
    simulate,
    tune,
    wasserstein_sq,
)

__all__ = [
    "__version__",
    "holdout_indices",
    "mix_seed",
    "uniform_index",
    "cholesky_dist_sq",
    "fit",
    "frechet_mean",
    "simulate",
    "tune",
    "wasserstein_sq",
]
