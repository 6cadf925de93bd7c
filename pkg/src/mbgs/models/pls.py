"""Partial least squares regression for a single trait (NIPALS / PLS1)."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_matrix, check_phenotype
from .penalized import predict_linear


@dataclass
class PlsModel:
    n_components: int
    weights: np.ndarray
    loadings: np.ndarray
    y_loadings: np.ndarray
    beta: np.ndarray
    mu: float
    stopped_early: bool = False


def fit_pls(X, y, n_components):
    """Extract ``n_components`` PLS components by sequential deflation.

    Each weight vector is the normalized covariance ``X' y`` of the deflated
    data; scores ``t = X w`` deflate both ``X`` and ``y``. Extraction stops
    early, with ``stopped_early`` set, when a weight or score vanishes.
    The regression vector is ``W (P' W)^-1 q`` on the original scale.
    """
    X = check_matrix(X)
    y = check_phenotype(y, X.shape[0])
    if n_components < 0:
        raise ValueError("n_components must be non-negative")
    n, m = X.shape
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    E = X - x_mean
    f = y - y_mean
    ref_w = np.linalg.norm(E.T @ f)
    ref_t = np.linalg.norm(E)
    W, P, q = [], [], []
    stopped = False
    for _ in range(min(n_components, n - 1, m)):
        w = E.T @ f
        nw = np.linalg.norm(w)
        if nw <= 1e-10 * max(ref_w, 1e-300):
            stopped = True
            break
        w /= nw
        t = E @ w
        tt = t @ t
        if tt <= (1e-12 * ref_t) ** 2:
            stopped = True
            break
        p = E.T @ t / tt
        c = f @ t / tt
        E = E - np.outer(t, p)
        f = f - c * t
        W.append(w)
        P.append(p)
        q.append(c)
    k = len(W)
    if k:
        Wm = np.column_stack(W)
        Pm = np.column_stack(P)
        beta = Wm @ np.linalg.solve(Pm.T @ Wm, np.array(q))
    else:
        Wm = np.zeros((m, 0))
        Pm = np.zeros((m, 0))
        beta = np.zeros(m)
    return PlsModel(k, Wm, Pm, np.array(q), beta, float(y_mean - x_mean @ beta), stopped)


class PLSRegression(RegressorMixin, BaseEstimator):
    """Single-response partial least squares.

    ``n_components`` is clipped to ``min(n - 1, m)``; the number actually
    extracted is ``n_components_``.
    """

    def __init__(self, n_components=2):
        self.n_components = n_components

    def fit(self, X, y):
        X = check_matrix(X)
        y = check_phenotype(y, X.shape[0])
        self.model_ = fit_pls(X, y, self.n_components)
        self.n_components_ = self.model_.n_components
        self.coef_ = self.model_.beta
        self.intercept_ = self.model_.mu
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return predict_linear(self.model_, check_matrix(X))
