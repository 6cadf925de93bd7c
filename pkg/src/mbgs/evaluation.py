"""Repeated k-fold cross-validation of the selection + model pipeline, and the
random-subset and single-SNP baselines.

Every training-side estimate (blanket, allele frequencies, LD weights,
hyperparameters, model fit) is computed from the training rows of a fold
only. One predictive correlation is computed per run from the pooled
out-of-fold predictions, then averaged over runs.
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ._validation import DataError
from .kinship import LdWeightConfig
from .mblanket import MbConfig, blanket_stability, iamb
from .models.tuning import FAMILIES, make_estimator, tune_hyperparameters
from .stats import correlation_sd, pearson, t_pvalues

log = logging.getLogger(__name__)

_RUN_SEED_OFFSET = 7919
_SUBSET_SEED_OFFSET = 104729


def kfold_split(n, k, seed):
    """Fold label per individual from a seeded permutation; sizes differ by at most one."""
    if k < 1:
        raise DataError("need at least one fold")
    if n < k:
        raise DataError(f"cannot split {n} individuals into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    labels[perm] = np.arange(n) % k
    return labels


@dataclass(frozen=True)
class PipelineConfig:
    """Cross-validation settings.

    ``params`` fixes the model hyperparameters; when it is None they are
    tuned by inner CV over ``grid`` (or the family's default grid).
    """

    model: str = "ridge"
    use_markov_blanket: bool = False
    alpha: float = 0.15
    kinship_kind: str = "k2"
    kinship_from_full_snps: bool = False
    params: dict | None = None
    grid: tuple | None = None
    inner_folds: int = 5
    folds: int = 10
    runs: int = 5
    seed: int = 0
    ld_config: LdWeightConfig | None = None

    def __post_init__(self):
        if self.model not in FAMILIES:
            raise ValueError(f"unknown model {self.model!r}; expected one of {FAMILIES}")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        MbConfig(self.alpha)

    def to_dict(self):
        d = asdict(self)
        d["grid"] = None if self.grid is None else [dict(g) for g in self.grid]
        return d


def _digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        if a is None:
            h.update(b"none")
            continue
        a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]


@dataclass
class FoldResult:
    run: int
    fold: int
    test: np.ndarray
    predictions: np.ndarray
    selected: tuple | None
    hyperparameters: dict
    frequencies: np.ndarray | None = None
    weights: np.ndarray | None = None
    model_digest: str = ""

    @property
    def training_digest(self):
        """Hash of every estimate derived from the training rows."""
        sel = None if self.selected is None else np.asarray(self.selected, dtype=float)
        hyper = np.array([self.hyperparameters[k] for k in sorted(self.hyperparameters)
                          if isinstance(self.hyperparameters[k], (int, float))], dtype=float)
        return _digest(sel, self.frequencies, self.weights, hyper) + self.model_digest

    def to_dict(self):
        return {
            "run": self.run,
            "fold": self.fold,
            "n_test": int(self.test.size),
            "blanket": None if self.selected is None else list(self.selected),
            "hyperparameters": self.hyperparameters,
            "training_digest": self.training_digest,
        }


def _model_state(est):
    model = getattr(est, "model_", None)
    if model is None:
        return None, None, ""
    kin = getattr(est, "kinship_", None)
    freqs = None if kin is None or kin.frequencies_ is None else kin.frequencies_.p
    weights = None if kin is None else kin.weights_
    if hasattr(model, "beta"):
        return freqs, weights, _digest(model.beta, [model.mu])
    return freqs, weights, _digest(model.dual_coef, [model.mu, model.delta])


def marginal_ranking(X, y):
    """SNP columns ordered by marginal t-test p-value, ties to the lower index."""
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    norms = np.sqrt(np.sum(Xc * Xc, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (Xc.T @ yc) / (norms * np.sqrt(yc @ yc))
    r = np.where(norms > 0, r, 0.0)
    p = t_pvalues(np.clip(r, -1, 1), n - 2)
    return np.lexsort((np.arange(X.shape[1]), p))


def single_snp_selector(subset_size):
    def select(X, y):
        return tuple(int(j) for j in np.sort(marginal_ranking(X, y)[:subset_size]))

    return select


def fit_fold(X, y, train, test, cfg, snp_map=None, seed=0, run=0, fold=0, selector=None):
    """Fit the pipeline on ``train`` rows and predict ``test`` rows.

    ``selector(X_train, y_train)`` returns the SNP columns to model; with
    ``use_markov_blanket`` the IAMB blanket is used.
    """
    Xtr, ytr = X[train], y[train]
    selected = None
    if selector is not None:
        selected = tuple(selector(Xtr, ytr))
    elif cfg.use_markov_blanket:
        selected = iamb(Xtr, ytr, MbConfig(cfg.alpha)).selected
    if selected is None or (cfg.model == "gblup" and cfg.kinship_from_full_snps):
        columns = np.arange(X.shape[1])
    else:
        columns = np.sort(np.asarray(selected, dtype=int))
    if columns.size == 0:
        pred = np.full(len(test), ytr.mean())
        return FoldResult(run, fold, test, pred, selected, {}, model_digest=_digest([ytr.mean()]))
    sub_map = None if snp_map is None else snp_map.take(columns)
    Xs = Xtr[:, columns]
    if cfg.params is not None:
        params = dict(cfg.params)
    elif cfg.model == "gblup":
        params = {}
    else:
        params, _ = tune_hyperparameters(Xs, ytr, cfg.model, cfg.grid, cfg.inner_folds, seed)
    est = make_estimator(cfg.model, params, sub_map, cfg.ld_config, cfg.kinship_kind).fit(Xs, ytr)
    pred = est.predict(X[np.ix_(test, columns)])
    freqs, weights, digest = _model_state(est)
    if cfg.model == "gblup":
        params = {**params, "delta": est.model_.delta}
    return FoldResult(run, fold, test, pred, selected, params, freqs, weights, digest)


def _safe_corr(a, b):
    if np.ptp(a) <= 1e-12 * max(1.0, np.abs(a).max()) or np.ptp(b) == 0:
        return 0.0
    return pearson(a, b)


@dataclass
class RunResult:
    run: int
    seed: int
    fold_of: np.ndarray
    predictions: np.ndarray
    rho_cv: float
    rho_cv_fold_mean: float
    blanket_sizes: list

    def to_dict(self):
        return {
            "run": self.run,
            "seed": self.seed,
            "fold_of": self.fold_of.tolist(),
            "predictions": self.predictions.tolist(),
            "rho_cv": self.rho_cv,
            "rho_cv_fold_mean": self.rho_cv_fold_mean,
            "blanket_sizes": self.blanket_sizes,
        }


@dataclass
class CvReport:
    config: dict
    n: int
    m: int
    runs: list
    folds: list
    fitted_rho: float
    full_fit: FoldResult | None = None
    label: str = ""

    columns = ("run", "seed", "rho_cv", "rho_cv_fold_mean", "mean_blanket_size", "fitted_rho", "sd_rho_cv")

    @property
    def mean_rho_cv(self):
        return float(np.mean([r.rho_cv for r in self.runs]))

    @property
    def sd_rho_cv(self):
        return correlation_sd(self.mean_rho_cv, self.n)

    @property
    def mean_blanket_size(self):
        sizes = [s for r in self.runs for s in r.blanket_sizes if s is not None]
        return float(np.mean(sizes)) if sizes else None

    def blankets(self):
        return [f.selected for f in self.folds if f.selected is not None]

    def stability(self, snp_ids=None, snp_map=None):
        return blanket_stability(self.blankets(), self.m, snp_ids, snp_map)

    def to_records(self):
        rows = []
        for r in self.runs:
            sizes = [s for s in r.blanket_sizes if s is not None]
            rows.append({
                "run": r.run,
                "seed": r.seed,
                "rho_cv": r.rho_cv,
                "rho_cv_fold_mean": r.rho_cv_fold_mean,
                "mean_blanket_size": float(np.mean(sizes)) if sizes else None,
            })
        if self.runs:
            rows.append({
                "run": "mean",
                "rho_cv": self.mean_rho_cv,
                "rho_cv_fold_mean": float(np.mean([r.rho_cv_fold_mean for r in self.runs])),
                "mean_blanket_size": self.mean_blanket_size,
                "fitted_rho": self.fitted_rho,
                "sd_rho_cv": self.sd_rho_cv,
            })
        return rows

    def to_dict(self):
        return {
            "label": self.label,
            "config": self.config,
            "n": self.n,
            "m": self.m,
            "fitted_rho": self.fitted_rho,
            "mean_rho_cv": self.mean_rho_cv if self.runs else None,
            "sd_rho_cv": self.sd_rho_cv if self.runs else None,
            "mean_blanket_size": self.mean_blanket_size,
            "full_blanket": None if self.full_fit is None or self.full_fit.selected is None
            else list(self.full_fit.selected),
            "runs": [r.to_dict() for r in self.runs],
            "folds": [f.to_dict() for f in self.folds],
        }


def _map_jobs(fn, jobs, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [fn(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def run_seed(seed, run):
    return int(seed) + _RUN_SEED_OFFSET * int(run)


def cross_validate(dataset, cfg, n_jobs=1, selector=None, refit=True, label=""):
    """Repeated k-fold CV of ``cfg`` on a complete dataset with phenotype.

    Runs and folds are independent jobs; results are collected in
    (run, fold) order so the report does not depend on ``n_jobs``.
    """
    X = dataset.X
    y = dataset.phenotype
    if y is None:
        raise DataError("dataset has no phenotype")
    if np.isnan(X).any():
        raise DataError("cross_validate needs complete genotypes; impute first")
    n, m = X.shape
    labels = [kfold_split(n, cfg.folds, run_seed(cfg.seed, r)) for r in range(cfg.runs)]
    jobs = [(r, f) for r in range(cfg.runs) for f in range(cfg.folds)]

    def work(job):
        r, f = job
        test = np.flatnonzero(labels[r] == f)
        train = np.flatnonzero(labels[r] != f)
        inner_seed = run_seed(cfg.seed, r) + f + 1
        try:
            return fit_fold(X, y, train, test, cfg, dataset.map, inner_seed, r, f, selector)
        except Exception as exc:
            raise RuntimeError(f"run {r}, fold {f} failed: {exc}") from exc

    results = _map_jobs(work, jobs, n_jobs)
    runs = []
    for r in range(cfg.runs):
        folds = [res for res in results if res.run == r]
        pred = np.empty(n)
        for res in folds:
            pred[res.test] = res.predictions
        per_fold = [_safe_corr(res.predictions, y[res.test]) if res.test.size > 2 else np.nan for res in folds]
        per_fold = [v for v in per_fold if np.isfinite(v)]
        runs.append(RunResult(
            r, run_seed(cfg.seed, r), labels[r], pred, _safe_corr(pred, y),
            float(np.mean(per_fold)) if per_fold else float("nan"),
            [None if res.selected is None else len(res.selected) for res in folds],
        ))
    full_fit, fitted_rho = None, float("nan")
    if refit:
        everyone = np.arange(n)
        full_fit = fit_fold(X, y, everyone, everyone, cfg, dataset.map, cfg.seed, -1, -1, selector)
        fitted_rho = _safe_corr(full_fit.predictions, y)
    return CvReport(cfg.to_dict(), n, m, runs, results, fitted_rho, full_fit, label)


@dataclass
class CvComparison:
    """Correlations with and without Markov blanket selection, and their differences."""

    rho: float
    rho_mb: float
    rho_cv: float
    rho_cv_mb: float
    delta1: float = field(init=False)
    delta2: float = field(init=False)

    columns = ("rho", "rho_mb", "delta1", "rho_cv", "rho_cv_mb", "delta2")

    def __post_init__(self):
        self.delta1 = self.rho_mb - self.rho
        self.delta2 = self.rho_cv_mb - self.rho_cv

    def to_records(self):
        return [asdict(self)]

    def to_dict(self):
        return asdict(self)


def compare(full, mb):
    return CvComparison(full.fitted_rho, mb.fitted_rho, full.mean_rho_cv, mb.mean_rho_cv)


@dataclass
class BaselineResult:
    kind: str
    subset_size: int
    values: np.ndarray
    subsets: list
    reports: list = field(default_factory=list, repr=False)

    columns = ("index", "rho_cv")

    def quantile(self, q):
        return float(np.quantile(self.values, q))

    @property
    def quantiles(self):
        if self.values.size < 2:
            return {"0.5": float(self.values[0])} if self.values.size else {}
        return {str(q): self.quantile(q) for q in (0.05, 0.25, 0.5, 0.75, 0.95)}

    def to_records(self):
        return [{"index": i, "rho_cv": float(v)} for i, v in enumerate(self.values)]

    def to_dict(self):
        return {
            "kind": self.kind,
            "subset_size": self.subset_size,
            "values": self.values.tolist(),
            "quantiles": self.quantiles,
            "subsets": [list(map(int, s)) for s in self.subsets],
        }


def random_subset_baseline(dataset, subset_size, n_subsets=100, cfg=None, n_jobs=1):
    """Cross-validated correlation for ``n_subsets`` random SNP subsets of a fixed size."""
    cfg = cfg or PipelineConfig()
    if not 0 < subset_size <= dataset.m:
        raise DataError(f"subset_size must lie in [1, {dataset.m}]")
    cfg = replace(cfg, use_markov_blanket=False)
    subsets = []
    for i in range(n_subsets):
        rng = np.random.default_rng([cfg.seed, _SUBSET_SEED_OFFSET, i])
        subsets.append(np.sort(rng.choice(dataset.m, size=subset_size, replace=False)))

    def work(cols):
        return cross_validate(dataset.take_snps(cols), cfg, n_jobs=1, refit=False)

    reports = _map_jobs(work, subsets, n_jobs)
    values = np.array([rep.mean_rho_cv for rep in reports])
    return BaselineResult("random", subset_size, values, subsets, reports)


def single_snp_baseline(dataset, subset_size, cfg=None, n_jobs=1):
    """Top ``subset_size`` SNPs by marginal significance, re-ranked in every fold.

    Returns the full-data top subset and the cross-validation report.
    """
    cfg = cfg or PipelineConfig()
    if not 0 < subset_size <= dataset.m:
        raise DataError(f"subset_size must lie in [1, {dataset.m}]")
    cfg = replace(cfg, use_markov_blanket=False)
    report = cross_validate(dataset, cfg, n_jobs=n_jobs, selector=single_snp_selector(subset_size),
                            label="single-snp")
    top = tuple(int(j) for j in marginal_ranking(dataset.X, dataset.phenotype)[:subset_size])
    return top, report
