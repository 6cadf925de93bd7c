"""SNP quality control: frequency and missingness filters, kNN imputation,
correlation pruning and allele-frequency estimation."""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DataError, check_genotypes
from .dataio import GenotypeDataset


@dataclass(frozen=True)
class AlleleFrequencies:
    """Frequency of the counted allele per SNP, estimated on a set of rows."""

    p: np.ndarray
    rows: tuple = ()

    def __len__(self):
        return self.p.shape[0]


@dataclass
class PreprocessLog:
    removed_maf: list = field(default_factory=list)
    removed_missing: list = field(default_factory=list)
    removed_pruned: list = field(default_factory=list)
    imputed_cells: int = 0

    def merge(self, other):
        return PreprocessLog(
            self.removed_maf + other.removed_maf,
            self.removed_missing + other.removed_missing,
            self.removed_pruned + other.removed_pruned,
            self.imputed_cells + other.imputed_cells,
        )

    @property
    def is_empty(self):
        return not (self.removed_maf or self.removed_missing or self.removed_pruned or self.imputed_cells)


def minor_allele_frequency(X):
    """MAF per column over non-missing entries (NaN for all-missing columns)."""
    with np.errstate(invalid="ignore"):
        counts = np.sum(~np.isnan(X), axis=0)
        p = np.where(counts > 0, np.nansum(X, axis=0) / np.maximum(counts, 1) / 2.0, np.nan)
    return np.minimum(p, 1.0 - p)


def quality_mask(X, maf_min=0.01, miss_max=0.20):
    """Boolean masks ``(drop_missing, drop_maf)``; a SNP lands in at most one."""
    X = np.asarray(X, dtype=np.float64)
    drop_missing = np.isnan(X).mean(axis=0) > miss_max
    maf = minor_allele_frequency(X)
    drop_maf = ~drop_missing & (maf < maf_min)
    return drop_missing, drop_maf


def quality_filter(dataset, maf_min=0.01, miss_max=0.20):
    """Drop SNPs with MAF below ``maf_min`` or missing fraction above ``miss_max``."""
    if dataset.n < 2:
        raise DataError("quality_filter needs at least two individuals")
    drop_missing, drop_maf = quality_mask(dataset.X, maf_min, miss_max)
    keep = np.flatnonzero(~(drop_missing | drop_maf))
    if keep.size == 0:
        raise DataError("empty SNP set")
    log = PreprocessLog(
        removed_maf=[dataset.snp_ids[i] for i in np.flatnonzero(drop_maf)],
        removed_missing=[dataset.snp_ids[i] for i in np.flatnonzero(drop_missing)],
    )
    if keep.size == dataset.m:
        return dataset, log
    return dataset.take_snps(keep), log


def _pairwise_complete_corr(X, targets):
    """|r| between each target column and every column over jointly observed rows."""
    obs = ~np.isnan(X)
    O = obs.astype(np.float64)
    X0 = np.where(obs, X, 0.0)
    Ot, Xt = O[:, targets], X0[:, targets]
    cnt = Ot.T @ O
    sx = Xt.T @ O
    sy = Ot.T @ X0
    sxx = (Xt * Xt).T @ O
    syy = Ot.T @ (X0 * X0)
    sxy = Xt.T @ X0
    with np.errstate(divide="ignore", invalid="ignore"):
        cov = sxy - sx * sy / cnt
        vx = sxx - sx * sx / cnt
        vy = syy - sy * sy / cnt
        r = cov / np.sqrt(vx * vy)
    r[~np.isfinite(r)] = 0.0
    r[cnt < 2] = 0.0
    return np.clip(r, -1.0, 1.0)


def impute_knn_matrix(X, k=10):
    """Fill NaN cells from the ``k`` most correlated SNP columns.

    Neighbours of a column are ranked by absolute pairwise-complete Pearson
    correlation; ties go to the lower column index. A missing cell becomes
    the |r|-weighted mean of the neighbours observed in that row, with
    negatively correlated neighbours contributing ``2 - value``, rounded to
    the nearest genotype code. Cells with no observed neighbour fall back to
    the rounded column mean. Returns the completed matrix and the number of
    cells filled.
    """
    X = np.asarray(X, dtype=np.float64)
    missing = np.isnan(X)
    targets = np.flatnonzero(missing.any(axis=0))
    if targets.size == 0:
        return X.copy(), 0
    counts = (~missing).sum(axis=0)
    if np.any(counts[targets] == 0):
        bad = targets[counts[targets] == 0][0]
        raise DataError(f"SNP column {bad} is entirely missing")
    r = _pairwise_complete_corr(X, targets)
    out = X.copy()
    m = X.shape[1]
    for row_idx, col in enumerate(targets):
        scores = np.abs(r[row_idx]).copy()
        scores[col] = -1.0
        order = np.lexsort((np.arange(m), -scores))
        neighbours = [j for j in order if j != col and scores[j] > 0][:k]
        neighbours = np.array(neighbours, dtype=int)
        col_mean = np.nanmean(X[:, col])
        for i in np.flatnonzero(missing[:, col]):
            if neighbours.size:
                vals = X[i, neighbours]
                ok = ~np.isnan(vals)
            else:
                ok = np.zeros(0, dtype=bool)
            if ok.any():
                nb = neighbours[ok]
                v = vals[ok]
                v = np.where(r[row_idx, nb] < 0, 2.0 - v, v)
                w = np.abs(r[row_idx, nb])
                estimate = float(w @ v / w.sum())
            else:
                estimate = col_mean
            out[i, col] = float(np.clip(np.rint(estimate), 0.0, 2.0))
    return out, int(missing.sum())


def impute_knn(dataset, k=10):
    """Return a complete copy of ``dataset`` imputed by :func:`impute_knn_matrix`."""
    counts = (~np.isnan(dataset.X)).sum(axis=0)
    if np.any(counts == 0):
        raise DataError(f"SNP {dataset.snp_ids[int(np.flatnonzero(counts == 0)[0])]!r} is entirely missing")
    X, _ = impute_knn_matrix(dataset.X, k)
    return GenotypeDataset(dataset.individuals, dataset.snp_ids, X, dataset.map, dataset.phenotype)


def prune_mask(X, r_max=0.90):
    """Greedy left-to-right pruning mask.

    For each kept column ``i`` every later kept column ``j`` with
    ``|r(X_i, X_j)| > r_max`` is dropped, so the earlier of a pair survives.
    """
    X = np.asarray(X, dtype=np.float64)
    if np.isnan(X).any():
        raise DataError("prune_correlated needs a complete matrix")
    n, m = X.shape
    Z = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(Z * Z, axis=0))
    nonconst = norms > 0
    Z[:, nonconst] /= norms[nonconst]
    keep = np.ones(m, dtype=bool)
    for i in range(m - 1):
        if not keep[i] or not nonconst[i]:
            continue
        later = np.flatnonzero(keep[i + 1:]) + i + 1
        if later.size == 0:
            break
        r = Z[:, i] @ Z[:, later]
        keep[later[np.abs(r) > r_max]] = False
    return keep


def prune_correlated(dataset, r_max=0.90):
    keep = prune_mask(dataset.X, r_max)
    log = PreprocessLog(removed_pruned=[dataset.snp_ids[i] for i in np.flatnonzero(~keep)])
    if keep.all():
        return dataset, log
    return dataset.take_snps(np.flatnonzero(keep)), log


def allele_frequencies(X, rows=None):
    """Counted-allele frequency ``mean(X_i) / 2`` over ``rows``.

    Raises when a SNP is monomorphic in the selected rows; the caller is
    expected to drop it.
    """
    X = X.X if isinstance(X, GenotypeDataset) else np.asarray(X, dtype=np.float64)
    if rows is None:
        rows = np.arange(X.shape[0])
    rows = np.asarray(rows, dtype=int)
    if rows.size == 0:
        raise DataError("allele_frequencies needs at least one row")
    sub = X[rows]
    if np.isnan(sub).any():
        raise DataError("allele_frequencies needs complete rows")
    p = sub.mean(axis=0) / 2.0
    mono = (p <= 0.0) | (p >= 1.0)
    if mono.any():
        raise DataError(f"monomorphic SNP column {int(np.flatnonzero(mono)[0])} in the selected rows")
    return AlleleFrequencies(p, tuple(rows.tolist()))


def polymorphic_columns(X):
    """Indices of columns that are not constant."""
    X = np.asarray(X)
    return np.flatnonzero(np.ptp(X, axis=0) > 0)


def preprocess(dataset, maf_min=0.01, miss_max=0.20, k=10, r_max=0.90):
    """Filter, impute and prune in that order; returns the dataset and a merged log."""
    filtered, log = quality_filter(dataset, maf_min, miss_max)
    imputed_cells = int(np.isnan(filtered.X).sum())
    imputed = impute_knn(filtered, k)
    pruned, prune_log = prune_correlated(imputed, r_max)
    log = log.merge(prune_log)
    log.imputed_cells = imputed_cells
    return pruned, log


class QualityFilter(SelectorMixin, BaseEstimator):
    """Drop SNP columns by minor allele frequency and missingness.

    Parameters
    ----------
    maf_min : float
        Minimum minor allele frequency, computed on observed cells.
    miss_max : float
        Maximum tolerated fraction of missing cells.
    """

    def __init__(self, maf_min=0.01, miss_max=0.20):
        self.maf_min = maf_min
        self.miss_max = miss_max

    def fit(self, X, y=None):
        X = check_genotypes(X, allow_missing=True)
        drop_missing, drop_maf = quality_mask(X, self.maf_min, self.miss_max)
        self.support_ = ~(drop_missing | drop_maf)
        if not self.support_.any():
            raise DataError("empty SNP set")
        self.n_features_in_ = X.shape[1]
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.allow_nan = True
        return tags


class KNNGenotypeImputer(TransformerMixin, BaseEstimator):
    """Stateless kNN imputation of missing genotype calls (NaN cells)."""

    def __init__(self, n_neighbors=10):
        self.n_neighbors = n_neighbors

    def fit(self, X, y=None):
        X = check_genotypes(X, allow_missing=True)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_genotypes(X, allow_missing=True)
        out, self.imputed_cells_ = impute_knn_matrix(X, self.n_neighbors)
        return out

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.allow_nan = True
        return tags


class CorrelationPruner(SelectorMixin, BaseEstimator):
    """Keep the earlier SNP of every pair with ``|r| > r_max``."""

    def __init__(self, r_max=0.90):
        self.r_max = r_max

    def fit(self, X, y=None):
        X = check_genotypes(X)
        self.support_ = prune_mask(X, self.r_max)
        self.n_features_in_ = X.shape[1]
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_
