"""Pearson and partial correlation, and the Student's t test for them."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import betainc

from ._validation import DataError

# Residual norms below this fraction of the centred norm count as exact zeros.
_COLLINEAR_RTOL = 1e-10


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    df: int
    p_value: float
    partial_r: float
    untestable: bool = False


def pearson(x, y):
    """Sample Pearson correlation of two equal-length vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("pearson needs two vectors of equal length")
    if x.shape[0] < 2:
        raise DataError("pearson needs at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = np.sqrt(xc @ xc)
    sy = np.sqrt(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise DataError("zero variance")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


def projection_basis(Z, n):
    """Orthonormal basis of span([1, Z]) with dependent columns dropped.

    Returns the basis and the number of retained columns of ``Z``.
    """
    ones = np.ones((n, 1))
    if Z is None:
        return ones / np.sqrt(n), 0
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[1] == 0:
        return ones / np.sqrt(n), 0
    if Z.shape[0] != n:
        raise DataError(f"conditioning matrix has {Z.shape[0]} rows, expected {n}")
    Zc = Z - Z.mean(axis=0)
    q, r, _ = scipy.linalg.qr(Zc, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(Zc.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > max(tol, 0.0))) if diag.size and diag[0] > 0 else 0
    return np.hstack([ones / np.sqrt(n), q[:, :rank]]), rank


def _residual(v, Q):
    return v - Q @ (Q.T @ v)


def _residual_correlation(rx, ry, x, y):
    nx = np.sqrt(rx @ rx)
    ny = np.sqrt(ry @ ry)
    ref_x = np.linalg.norm(x - x.mean())
    ref_y = np.linalg.norm(y - y.mean())
    if nx <= _COLLINEAR_RTOL * ref_x or ny <= _COLLINEAR_RTOL * ref_y:
        return 0.0
    return float(np.clip((rx @ ry) / (nx * ny), -1.0, 1.0))


def partial_correlation(x, y, Z=None):
    """Correlation of ``x`` and ``y`` after regressing both on ``[1, Z]``.

    Linearly dependent conditioning columns are dropped through a pivoted QR
    factorization. When either residual vanishes (the variable lies in the
    span of the conditioning set) the partial correlation is 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Z is None or np.asarray(Z).size == 0:
        return pearson(x, y)
    Q, _ = projection_basis(Z, x.shape[0])
    return _residual_correlation(_residual(x, Q), _residual(y, Q), x, y)


def t_pvalues(r, df):
    """Two-sided p-values of the t test for (partial) correlations ``r``.

    ``t = r * sqrt(df / (1 - r^2))`` and the tail probability is evaluated
    through the regularized incomplete beta function
    ``P(|T| > |t|) = I_{df/(df + t^2)}(df/2, 1/2)``.
    Entries with ``df < 1`` get p = 1; ``|r| = 1`` gives p = 0.
    """
    r = np.asarray(r, dtype=np.float64)
    df = np.broadcast_to(np.asarray(df, dtype=np.float64), r.shape)
    r2 = np.clip(r * r, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # df / (df + t^2) simplifies to 1 - r^2.
        p = betainc(df / 2.0, 0.5, 1.0 - r2)
    p = np.where(r2 >= 1.0, 0.0, p)
    p = np.where(df < 1, 1.0, p)
    return np.clip(p, 0.0, 1.0)


def t_test_partial(r, n, z_size):
    """Exact Student's t test of a partial correlation ``r`` given ``z_size`` covariates."""
    df = int(n) - int(z_size) - 2
    if df < 1:
        return CITestResult(0.0, df, 1.0, float(r), untestable=True)
    r = float(r)
    if abs(r) >= 1.0:
        return CITestResult(float(np.copysign(np.inf, r)), df, 0.0, r)
    t = r * np.sqrt(df / (1.0 - r * r))
    return CITestResult(float(t), df, float(t_pvalues(r, df)), r)


def conditional_test(x, y, Z=None):
    """Partial-correlation t test; ``df`` uses the effective rank of ``Z``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    if Z is None or np.asarray(Z).size == 0:
        return t_test_partial(pearson(x, y), n, 0)
    Q, rank = projection_basis(Z, n)
    r = _residual_correlation(_residual(x, Q), _residual(y, Q), x, y)
    return t_test_partial(r, n, rank)


def correlation_sd(rho, n):
    """Approximate standard deviation ``(1 - rho^2) / sqrt(n - 1)`` of a correlation."""
    if n < 3:
        raise DataError("correlation_sd needs n >= 3")
    return float((1.0 - rho * rho) / np.sqrt(n - 1))
