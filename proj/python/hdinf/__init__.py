"""Debiased lasso inference for generalized linear models."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401


def fit_cv(data, family, n_folds=10, seed=1, workers=1):
    """Lasso fit at the cross-validated lambda; returns (fit, cv)."""
    cv = cross_validate(data, family, n_folds=n_folds, seed=seed, workers=workers)  # noqa: F405
    return fit_lasso(data, family, cv.lambda_min), cv  # noqa: F405
