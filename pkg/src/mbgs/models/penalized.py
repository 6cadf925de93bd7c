"""Ridge, LASSO and elastic-net regression by cyclic coordinate descent.

The objective, on the original genotype scale, is::

    (1 / (2n)) ||y - mu - X beta||^2 + lambda1 ||beta||_1 + (lambda2 / 2) ||beta||^2

Columns are centred and scaled to unit mean square internally; the penalty
is rescaled accordingly so the solution is that of the objective above.
"""

from dataclasses import dataclass

import numba
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import DataError, check_matrix, check_phenotype


class ConvergenceError(RuntimeError):
    pass


@dataclass
class PenalizedModel:
    beta: np.ndarray
    mu: float
    lambda1: float
    lambda2: float
    x_mean: np.ndarray
    x_scale: np.ndarray
    n_iter: int = 0
    converged: bool = True


@numba.njit(cache=True)
def _cd_sweeps(Xs, r, b, pen1, pen2, tol, max_sweeps):  # pragma: no cover - compiled
    n, m = Xs.shape
    inv_n = 1.0 / n
    for sweep in range(max_sweeps):
        max_delta = 0.0
        for j in range(m):
            if pen1[j] < 0.0:
                continue
            old = b[j]
            z = old
            for i in range(n):
                z += Xs[i, j] * r[i] * inv_n
            if z > pen1[j]:
                new = (z - pen1[j]) / (1.0 + pen2[j])
            elif z < -pen1[j]:
                new = (z + pen1[j]) / (1.0 + pen2[j])
            else:
                new = 0.0
            delta = new - old
            if delta != 0.0:
                for i in range(n):
                    r[i] -= Xs[i, j] * delta
                b[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            return sweep + 1, True
    return max_sweeps, False


def _standardize(X):
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    x_scale = np.sqrt(np.mean(Xc * Xc, axis=0))
    return Xc, x_mean, x_scale


def penalized_objective(X, y, beta, mu, lambda1, lambda2):
    resid = y - mu - X @ beta
    return float(
        resid @ resid / (2 * X.shape[0]) + lambda1 * np.abs(beta).sum() + 0.5 * lambda2 * beta @ beta
    )


def full_shrinkage_lambda1(X, y):
    """Smallest ``lambda1`` for which every coefficient is exactly zero."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    return float(np.max(np.abs(Xc.T @ (y - y.mean()))) / X.shape[0])


def fit_elastic_net(X, y, lambda1, lambda2, tol=1e-7, max_sweeps=100_000, beta_init=None, callback=None):
    """Coordinate-descent fit of the penalized objective.

    Converged when the largest change of a standardized coefficient in a
    sweep falls below ``tol``. ``callback(beta, mu)`` is invoked after every
    sweep when given (slow path, used for diagnostics).
    """
    X = check_matrix(X)
    y = check_phenotype(y, X.shape[0])
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("penalties must be non-negative")
    n, m = X.shape
    if n < 2:
        raise DataError("need at least two observations")
    Xc, x_mean, x_scale = _standardize(X)
    ok = x_scale > 0
    Xs = np.zeros_like(Xc)
    Xs[:, ok] = Xc[:, ok] / x_scale[ok]
    Xs = np.asfortranarray(Xs)
    pen1 = np.full(m, -1.0)
    pen2 = np.zeros(m)
    pen1[ok] = lambda1 / x_scale[ok]
    pen2[ok] = lambda2 / x_scale[ok] ** 2
    b = np.zeros(m)
    if beta_init is not None:
        b[ok] = np.asarray(beta_init, dtype=np.float64)[ok] * x_scale[ok]
    y_mean = y.mean()
    r = (y - y_mean) - Xs @ b
    if callback is None:
        n_iter, converged = _cd_sweeps(Xs, r, b, pen1, pen2, tol, max_sweeps)
    else:
        n_iter, converged = 0, False
        while n_iter < max_sweeps and not converged:
            _, converged = _cd_sweeps(Xs, r, b, pen1, pen2, tol, 1)
            n_iter += 1
            beta = np.where(ok, b / np.where(ok, x_scale, 1.0), 0.0)
            callback(beta, y_mean - x_mean @ beta)
    if not converged:
        raise ConvergenceError(
            f"coordinate descent did not converge in {n_iter} sweeps "
            f"(lambda1={lambda1:g}, lambda2={lambda2:g}, n={n}, m={m})"
        )
    beta = np.zeros(m)
    beta[ok] = b[ok] / x_scale[ok]
    return PenalizedModel(beta, float(y_mean - x_mean @ beta), float(lambda1), float(lambda2), x_mean, x_scale, int(n_iter))


def ridge_closed_form(X, y, lambda2):
    """Exact ridge solution ``(Xc'Xc/n + lambda2 I)^-1 Xc'yc / n``.

    The dual form is used when there are more columns than rows.
    """
    X = check_matrix(X)
    y = check_phenotype(y, X.shape[0])
    if not lambda2 > 0:
        raise ValueError("ridge_closed_form needs lambda2 > 0")
    n, m = X.shape
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    yc = y - y.mean()
    if m <= n:
        beta = np.linalg.solve(Xc.T @ Xc / n + lambda2 * np.eye(m), Xc.T @ yc / n)
    else:
        beta = Xc.T @ np.linalg.solve(Xc @ Xc.T / n + lambda2 * np.eye(n), yc) / n
    x_scale = np.sqrt(np.mean(Xc * Xc, axis=0))
    return PenalizedModel(beta, float(y.mean() - x_mean @ beta), 0.0, float(lambda2), x_mean, x_scale)


def ridge_path(X, y, lambdas):
    """Ridge coefficients for several ``lambda2`` values from one SVD.

    Returns ``(betas, mus)`` with ``betas`` of shape (len(lambdas), m).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    x_mean = X.mean(axis=0)
    Xc = X - x_mean
    U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    uty = U.T @ (y - y.mean())
    lambdas = np.asarray(lambdas, dtype=np.float64)
    shrink = s[None, :] / (s[None, :] ** 2 + n * lambdas[:, None])
    betas = (shrink * uty[None, :]) @ Vt
    mus = y.mean() - betas @ x_mean
    return betas, mus


def predict_linear(model, X_new):
    """Predictions ``mu + X_new beta`` of a penalized or PLS model."""
    X_new = np.asarray(X_new, dtype=np.float64)
    if X_new.ndim != 2 or X_new.shape[1] != model.beta.shape[0]:
        raise DataError(f"expected {model.beta.shape[0]} columns, got shape {X_new.shape}")
    return model.mu + X_new @ model.beta


def kkt_residuals(X, y, model):
    """Violation of the subgradient optimality conditions per coordinate."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    beta = model.beta
    grad = Xc.T @ (yc - Xc @ beta) / n - model.lambda2 * beta
    active = beta != 0
    out = np.where(active, np.abs(grad - model.lambda1 * np.sign(beta)), np.maximum(np.abs(grad) - model.lambda1, 0.0))
    return out


class PenalizedRegression(RegressorMixin, BaseEstimator):
    """Linear regression with L1 and L2 penalties on the SNP effects.

    Parameters
    ----------
    lambda1 : float, default=0.0
        L1 penalty; 0 gives ridge regression.
    lambda2 : float, default=0.0
        L2 penalty; 0 gives the LASSO.
    solver : {"auto", "cd", "closed"}
        ``"auto"`` solves ridge problems (``lambda1 == 0``, ``lambda2 > 0``)
        in closed form and everything else by coordinate descent.
    tol : float
        Coordinate-descent convergence threshold on standardized coefficients.
    max_sweeps : int
    """

    def __init__(self, lambda1=0.0, lambda2=0.0, solver="auto", tol=1e-7, max_sweeps=100_000):
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.solver = solver
        self.tol = tol
        self.max_sweeps = max_sweeps

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_phenotype(y, X.shape[0])
        closed = self.solver == "closed" or (self.solver == "auto" and self.lambda1 == 0 and self.lambda2 > 0)
        if closed:
            if self.lambda1 != 0:
                raise ValueError("closed-form solver only handles lambda1 == 0")
            self.model_ = ridge_closed_form(X, y, self.lambda2)
        else:
            self.model_ = fit_elastic_net(X, y, self.lambda1, self.lambda2, self.tol, self.max_sweeps)
        self.coef_ = self.model_.beta
        self.intercept_ = self.model_.mu
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict_linear(self.model_, check_matrix(X))
