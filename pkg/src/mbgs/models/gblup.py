"""GBLUP: genomic best linear unbiased prediction with REML variance components.

Model: ``y = mu + g + e`` with ``g ~ N(0, sigma2_g K)`` and
``e ~ N(0, sigma2_e I)``. The restricted likelihood is profiled over
``delta = sigma2_e / sigma2_g`` in the eigenbasis of ``K``.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import DataError, check_non_constant, check_phenotype, check_symmetric_psd
from ..kinship import Kinship

log = logging.getLogger(__name__)

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class GblupModel:
    mu: float
    g_hat: np.ndarray
    dual_coef: np.ndarray
    sigma2_g: float
    sigma2_e: float
    delta: float
    kinship_kind: str | None = None
    boundary: bool = False
    reml_loglik: float = float("nan")

    @property
    def h2(self):
        return self.sigma2_g / (self.sigma2_g + self.sigma2_e)


class _RemlProfile:
    """REML log-likelihood of ``delta`` given eigenvalues ``d`` and rotated data."""

    def __init__(self, d, yt, xt):
        self.d = d
        self.yt = yt
        self.xt = xt
        self.n = d.shape[0]

    def gls(self, delta):
        v = self.d + delta
        xvx = np.sum(self.xt * self.xt / v)
        mu = np.sum(self.xt * self.yt / v) / xvx
        resid = self.yt - self.xt * mu
        quad = np.sum(resid * resid / v)
        return mu, quad, xvx, v

    def loglik(self, delta):
        mu, quad, xvx, v = self.gls(delta)
        dof = self.n - 1
        if quad <= 0:
            return np.inf
        return -0.5 * (
            dof * np.log(2 * np.pi * quad / dof) + np.sum(np.log(v)) + np.log(xvx) + dof
        )


def _golden_max(f, lo, hi, rtol):
    """Maximize ``f`` on ``[lo, hi]`` (log-delta scale) by golden-section search."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > rtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_gblup(K, y, kinship_kind=None, log10_range=(-5.0, 5.0), n_grid=101, rtol=1e-6):
    """Fit GBLUP on a training kinship ``K``.

    ``delta`` is chosen on a log grid over ``10**log10_range`` and refined by
    golden-section search to relative tolerance ``rtol``; ``mu`` is the GLS
    estimate and ``g_hat = K (K + delta I)^-1 (y - mu)``. A maximum at the
    grid edge sets ``boundary``.
    """
    K = K.K if hasattr(K, "K") and hasattr(K, "kind") else K
    d, U = check_symmetric_psd(K)
    y = check_non_constant(check_phenotype(y, d.shape[0]))
    n = y.shape[0]
    if n < 3:
        raise DataError("GBLUP needs at least three individuals")
    profile = _RemlProfile(d, U.T @ y, U.T @ np.ones(n))
    grid = np.linspace(log10_range[0], log10_range[1], n_grid)
    ll = np.array([profile.loglik(10.0**g) for g in grid])
    best = int(np.argmax(ll))
    boundary = best in (0, n_grid - 1)
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, n_grid - 1)]
    # rtol on delta corresponds to an absolute tolerance of rtol / ln(10) in log10 delta.
    log_delta = _golden_max(lambda g: profile.loglik(10.0**g), lo, hi, rtol / np.log(10.0))
    if profile.loglik(10.0**log_delta) < ll[best]:
        log_delta = grid[best]
    if boundary:
        log.debug("REML optimum of delta at the search boundary 1e%+.0f", grid[best])
    delta = float(10.0**log_delta)
    mu, quad, _, v = profile.gls(delta)
    sigma2_g = quad / (n - 1)
    resid_t = U.T @ (y - mu)
    dual = U @ (resid_t / v)
    g_hat = U @ (d * resid_t / v)
    return GblupModel(
        float(mu), g_hat, dual, float(sigma2_g), float(sigma2_g * delta), delta, kinship_kind,
        bool(boundary), float(profile.loglik(delta)),
    )


def predict_gblup(model, K_cross):
    """``mu + K_cross (K_train + delta I)^-1 (y_train - mu)``."""
    K_cross = np.asarray(K_cross, dtype=np.float64)
    if K_cross.ndim != 2 or K_cross.shape[1] != model.dual_coef.shape[0]:
        raise DataError(
            f"cross kinship needs {model.dual_coef.shape[0]} training columns, got shape {K_cross.shape}"
        )
    return model.mu + K_cross @ model.dual_coef


class GBLUPRegressor(RegressorMixin, BaseEstimator):
    """GBLUP on genotypes, or on a precomputed kinship.

    Parameters
    ----------
    kinship : {"k0", "k1", "k2", "k3", "precomputed"}
        With ``"precomputed"``, ``fit`` takes the training kinship and
        ``predict`` the (test x train) cross kinship.
    snp_map : SnpMap, optional
        Needed for ``"k3"``.
    ld_config : LdWeightConfig, optional
    """

    def __init__(self, kinship="k2", snp_map=None, ld_config=None):
        self.kinship = kinship
        self.snp_map = snp_map
        self.ld_config = ld_config

    def fit(self, X, y):
        if self.kinship == "precomputed":
            K = np.asarray(X, dtype=np.float64)
            self.kinship_ = None
        else:
            self.kinship_ = Kinship(self.kinship, self.snp_map, self.ld_config).fit(X)
            K = self.kinship_.K_
        self.model_ = fit_gblup(K, y, kinship_kind=self.kinship)
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        K_cross = X if self.kinship_ is None else self.kinship_.transform(X)
        return predict_gblup(self.model_, K_cross)
