"""Input validation helpers shared by the estimator, dataset, and CLI layers."""

from __future__ import annotations

import numpy as np

__all__ = ["check_covariates", "check_counts", "check_X_y"]


def check_covariates(X) -> np.ndarray:
    """Coerce X to a 2d float array with finite entries."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"covariate matrix must be 2-dimensional, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValueError(f"covariate matrix contains a non-finite value at row {bad[0]}, column {bad[1]}")
    return X


def check_counts(y) -> np.ndarray:
    """Coerce y to a 1d array of non-negative integer counts."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"response must be 1-dimensional, got shape {y.shape}")
    if y.size == 0:
        raise ValueError("response is empty")
    yf = y.astype(float)
    if not np.all(np.isfinite(yf)):
        raise ValueError("response contains non-finite values")
    if np.any(yf < 0) or np.any(yf != np.floor(yf)):
        bad = int(np.argmax((yf < 0) | (yf != np.floor(yf))))
        raise ValueError(f"response must be non-negative integer counts; offending value {y[bad]!r} at row {bad}")
    return yf.astype(np.int64)


def check_X_y(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate a covariate matrix and count response of matching length."""
    X = check_covariates(X)
    y = check_counts(y)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    return X, y
