"""Genomic prediction models: penalized regression, PLS and GBLUP."""

from .gblup import GBLUPRegressor, GblupModel, fit_gblup, predict_gblup
from .penalized import (
    ConvergenceError,
    PenalizedModel,
    PenalizedRegression,
    fit_elastic_net,
    full_shrinkage_lambda1,
    kkt_residuals,
    penalized_objective,
    predict_linear,
    ridge_closed_form,
    ridge_path,
)
from .pls import PLSRegression, PlsModel, fit_pls
from .tuning import FAMILIES, default_grid, make_estimator, tune_hyperparameters

__all__ = [
    "ConvergenceError",
    "FAMILIES",
    "GBLUPRegressor",
    "GblupModel",
    "PLSRegression",
    "PenalizedModel",
    "PenalizedRegression",
    "PlsModel",
    "default_grid",
    "fit_elastic_net",
    "fit_gblup",
    "fit_pls",
    "full_shrinkage_lambda1",
    "kkt_residuals",
    "make_estimator",
    "penalized_objective",
    "predict_gblup",
    "predict_linear",
    "ridge_closed_form",
    "ridge_path",
    "tune_hyperparameters",
]
