"""Model families, their default hyperparameter grids and inner-CV tuning."""

import numpy as np

from ..stats import pearson
from .gblup import GBLUPRegressor
from .penalized import PenalizedRegression, fit_elastic_net, full_shrinkage_lambda1, ridge_path
from .pls import PLSRegression

FAMILIES = ("ridge", "lasso", "enet", "pls", "gblup")

# Heritabilities whose implied ridge penalties make up the default grid.
_RIDGE_H2 = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
_LASSO_FRACTIONS = tuple(np.round(np.logspace(0, -2.5, 11), 6))
_ENET_FRACTIONS = (0.5, 0.2, 0.1, 0.05, 0.02, 0.01)
_ENET_H2 = (0.1, 0.3, 0.5, 0.7, 0.9)


def ridge_lambda_for_h2(X, h2):
    """Ridge penalty matching GBLUP with centred kinship at heritability ``h2``.

    With mean column variance ``v``, ``delta = v (1 - h2) / h2`` and the
    matching penalty is ``delta * m / n``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, m = X.shape
    v = float(np.mean(np.var(X, axis=0)))
    v = v if v > 0 else 1.0
    return v * m * (1.0 - h2) / (n * h2)


def default_grid(family, X, y, max_components=10):
    """Data-driven grid for ``family`` built from the training rows only."""
    X = np.asarray(X, dtype=np.float64)
    n, m = X.shape
    if family == "ridge":
        return [{"lambda1": 0.0, "lambda2": ridge_lambda_for_h2(X, h)} for h in _RIDGE_H2]
    if family == "lasso":
        lmax = full_shrinkage_lambda1(X, y)
        return [{"lambda1": lmax * f, "lambda2": 0.0} for f in _LASSO_FRACTIONS]
    if family == "enet":
        lmax = full_shrinkage_lambda1(X, y)
        return [
            {"lambda1": lmax * f, "lambda2": ridge_lambda_for_h2(X, h)}
            for h in _ENET_H2
            for f in _ENET_FRACTIONS
        ]
    if family == "pls":
        top = max(1, min(max_components, n - 2, m))
        return [{"n_components": k} for k in range(1, top + 1)]
    if family == "gblup":
        return [{}]
    raise ValueError(f"unknown model family {family!r}")


def validate_params(family, params):
    if family == "ridge" and params.get("lambda1", 0.0) != 0.0:
        raise ValueError("ridge has lambda1 = 0")
    if family == "lasso" and params.get("lambda2", 0.0) != 0.0:
        raise ValueError("the LASSO has lambda2 = 0")
    if family == "enet" and not (params.get("lambda1", 0) > 0 and params.get("lambda2", 0) > 0):
        raise ValueError("the elastic net needs lambda1 > 0 and lambda2 > 0")
    return params


def make_estimator(family, params=None, snp_map=None, ld_config=None, kinship="k2"):
    params = dict(params or {})
    if family in ("ridge", "lasso", "enet"):
        validate_params(family, params)
        return PenalizedRegression(params.get("lambda1", 0.0), params.get("lambda2", 0.0))
    if family == "pls":
        return PLSRegression(int(params.get("n_components", 2)))
    if family == "gblup":
        return GBLUPRegressor(params.get("kinship", kinship), snp_map, ld_config)
    raise ValueError(f"unknown model family {family!r}")


def _score(pred, y):
    if np.ptp(pred) <= 1e-12 * max(1.0, np.abs(pred).max()) or np.ptp(y) == 0:
        return 0.0
    return pearson(pred, y)


def _regularization_key(params):
    # Smaller key = stronger regularization.
    return (-params.get("lambda2", 0.0), -params.get("lambda1", 0.0), params.get("n_components", 0))


def _inner_predictions(family, grid, Xtr, ytr, Xte):
    if family == "ridge":
        lambdas = [g["lambda2"] for g in grid]
        betas, mus = ridge_path(Xtr, ytr, lambdas)
        return [mus[i] + Xte @ betas[i] for i in range(len(grid))]
    if family in ("lasso", "enet"):
        preds = [None] * len(grid)
        # Warm starts along decreasing lambda1 within each lambda2.
        order = sorted(range(len(grid)), key=lambda i: (grid[i]["lambda2"], -grid[i]["lambda1"]))
        beta, last_l2 = None, None
        for i in order:
            if grid[i]["lambda2"] != last_l2:
                beta, last_l2 = None, grid[i]["lambda2"]
            model = fit_elastic_net(Xtr, ytr, grid[i]["lambda1"], grid[i]["lambda2"], beta_init=beta)
            beta = model.beta
            preds[i] = model.mu + Xte @ model.beta
        return preds
    return [make_estimator(family, g).fit(Xtr, ytr).predict(Xte) for g in grid]


def tune_hyperparameters(X, y, family, grid=None, inner_folds=5, seed=0):
    """Pick the grid point with the best mean inner-CV predictive correlation.

    Points whose mean score is within one standard error of the best are
    treated as ties, and the most regularized of them wins (larger
    ``lambda2``, then larger ``lambda1``, then fewer components).
    Returns ``(params, table)`` where ``table`` lists mean and standard
    error per grid point.
    """
    from ..evaluation import kfold_split

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = list(grid) if grid is not None else default_grid(family, X, y)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if len(grid) == 1:
        return dict(grid[0]), [(dict(grid[0]), float("nan"), float("nan"))]
    n = X.shape[0]
    k = min(inner_folds, n)
    folds = kfold_split(n, k, seed)
    scores = np.zeros((len(grid), k))
    for f in range(k):
        test = np.flatnonzero(folds == f)
        train = np.flatnonzero(folds != f)
        preds = _inner_predictions(family, grid, X[train], y[train], X[test])
        scores[:, f] = [_score(p, y[test]) for p in preds]
    mean = scores.mean(axis=1)
    se = scores.std(axis=1, ddof=1) / np.sqrt(k) if k > 1 else np.zeros(len(grid))
    best = int(np.argmax(mean))
    ties = [i for i in range(len(grid)) if mean[i] >= mean[best] - se[best]]
    chosen = min(ties, key=lambda i: (_regularization_key(grid[i]), i))
    table = [(dict(g), float(mu), float(s)) for g, mu, s in zip(grid, mean, se)]
    return dict(grid[chosen]), table
