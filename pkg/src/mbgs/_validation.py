"""Input validation helpers shared by the estimators and functional APIs."""

import numpy as np
from sklearn.utils.validation import check_array


class DataError(ValueError):
    """Raised when input data violates a documented contract."""


def check_genotypes(X, allow_missing=False, name="X"):
    """Return ``X`` as a float64 2-D array of additive genotype codes.

    Non-missing entries must be exactly 0, 1 or 2. Missing cells are NaN.
    """
    try:
        X = check_array(
            X,
            dtype=np.float64,
            ensure_all_finite="allow-nan" if allow_missing else True,
            ensure_min_samples=1,
            ensure_min_features=1,
        )
    except ValueError as exc:
        raise DataError(f"{name}: {exc}") from None
    observed = X[~np.isnan(X)]
    bad = (observed != 0.0) & (observed != 1.0) & (observed != 2.0)
    if bad.any():
        raise DataError(f"{name} contains genotype codes outside {{0, 1, 2}}: {observed[bad][0]!r}")
    return X


def check_phenotype(y, n=None, name="y"):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y.ravel()
    if y.ndim != 1:
        raise DataError(f"{name} must be a vector, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DataError(f"{name} contains non-finite values")
    if n is not None and y.shape[0] != n:
        raise DataError(f"{name} has length {y.shape[0]}, expected {n}")
    return y


def check_matrix(X, name="X"):
    """Real-valued design matrix without genotype-code restrictions."""
    try:
        return check_array(X, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)
    except ValueError as exc:
        raise DataError(f"{name}: {exc}") from None


def check_non_constant(y, name="y"):
    if np.ptp(y) == 0.0:
        raise DataError(f"{name} is constant")
    return y


def check_symmetric_psd(K, tol=1e-8, name="K"):
    """Validate a kinship matrix and return its eigendecomposition.

    Eigenvalues below ``-tol * max_eigenvalue`` are rejected; smaller
    negative rounding noise is clipped to zero.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DataError(f"{name} must be square, got shape {K.shape}")
    if not np.all(np.isfinite(K)):
        raise DataError(f"{name} contains non-finite values")
    scale = max(np.abs(K).max(), 1.0)
    if np.abs(K - K.T).max() > 1e-10 * scale:
        raise DataError(f"{name} is not symmetric")
    K = 0.5 * (K + K.T)
    evals, evecs = np.linalg.eigh(K)
    top = max(evals[-1], 0.0)
    if evals[0] < -tol * max(top, 1e-300):
        raise DataError(f"{name} has a negative eigenvalue {evals[0]:.3g} (max {top:.3g})")
    return np.clip(evals, 0.0, None), evecs
