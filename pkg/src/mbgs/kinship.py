"""Kinship matrices from SNP genotypes.

Four constructions are provided: identity-by-state (``k0``), centred
(``k1``), standardized (``k2``) and LD-adjusted standardized (``k3``) whose
per-SNP weights come from an L1 fit that flattens local LD tagging.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DataError, check_genotypes
from .preprocess import AlleleFrequencies, allele_frequencies, polymorphic_columns
from .simplex import LinearProgramError, simplex

log = logging.getLogger(__name__)

KINDS = ("k0", "k1", "k2", "k3")


@dataclass(frozen=True)
class KinshipMatrix:
    K: np.ndarray
    kind: str
    weights: np.ndarray | None = None
    frequencies: AlleleFrequencies | None = None


@dataclass(frozen=True)
class LdWeightConfig:
    """Settings for the LD weights.

    ``lambda_cm`` is the decay scale: a pair at distance ``d`` cM has its
    squared correlation multiplied by ``exp(-d / lambda_cm)``. Pairs whose
    decay factor falls below ``window_r2_floor`` are ignored, and chromosomes
    are cut into independent regions at such gaps. Regions longer than
    ``max_region_snps`` are split into consecutive chunks.
    """

    lambda_cm: float = 1.0
    window_r2_floor: float = 0.01
    max_region_snps: int = 400
    w_floor: float = 1e-6

    def __post_init__(self):
        if not self.lambda_cm > 0:
            raise ValueError("lambda_cm must be positive")
        if not 0 < self.window_r2_floor <= 1:
            raise ValueError("window_r2_floor must lie in (0, 1]")
        if self.max_region_snps < 1:
            raise ValueError("max_region_snps must be at least 1")

    @property
    def max_distance(self):
        return -self.lambda_cm * np.log(self.window_r2_floor)


@dataclass
class LdWindows:
    """Decay-weighted squared correlations ``C`` (sparse, m x m)."""

    C: scipy.sparse.csr_matrix
    regions: list
    unmapped: np.ndarray


@dataclass
class LdWeights:
    w: np.ndarray
    objective: float
    region_objectives: list = field(default_factory=list)


def _standardize_columns(X):
    Z = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(Z * Z, axis=0))
    ok = norms > 0
    Z[:, ok] /= norms[ok]
    Z[:, ~ok] = 0.0
    return Z


def _regions(positions, order, cfg):
    """Split sorted SNP indices at gaps beyond the decay window and by size."""
    regions = []
    current = [order[0]]
    for prev, nxt in zip(order[:-1], order[1:]):
        gap = positions[nxt] - positions[prev]
        if np.exp(-gap / cfg.lambda_cm) < cfg.window_r2_floor or len(current) >= cfg.max_region_snps:
            regions.append(np.array(current))
            current = []
        current.append(nxt)
    regions.append(np.array(current))
    return regions


def squared_corr_windows(X, snp_map, cfg):
    """Rows ``C_i[j] = r^2(X_i, X_j) * exp(-d_ij / lambda)`` within LD regions.

    Only same-chromosome pairs in the same region with decay factor at least
    ``window_r2_floor`` are kept; ``C_i[i] = 1``. Unmapped SNPs get an
    identity row and are reported in ``unmapped``.
    """
    X = check_genotypes(X)
    m = X.shape[1]
    if len(snp_map) != m:
        raise DataError(f"map has {len(snp_map)} SNPs, genotype matrix has {m}")
    Z = _standardize_columns(X)
    mapped = snp_map.mapped
    rows, cols, vals = [], [], []
    regions = []
    chroms = np.array(snp_map.chromosomes, dtype=object)
    for chrom in sorted(set(chroms[mapped])):
        idx = np.flatnonzero((chroms == chrom) & mapped)
        order = idx[np.argsort(snp_map.positions[idx], kind="stable")]
        for region in _regions(snp_map.positions, order, cfg):
            regions.append(region)
            if region.size == 1:
                continue
            r = Z[:, region].T @ Z[:, region]
            pos = snp_map.positions[region]
            decay = np.exp(-np.abs(pos[:, None] - pos[None, :]) / cfg.lambda_cm)
            block = np.clip(r * r, 0.0, 1.0) * decay
            block[decay < cfg.window_r2_floor] = 0.0
            np.fill_diagonal(block, 0.0)
            ii, jj = np.nonzero(block)
            rows.append(region[ii])
            cols.append(region[jj])
            vals.append(block[ii, jj])
    diag = np.arange(m)
    rows = np.concatenate([diag, *rows]) if rows else diag
    cols = np.concatenate([diag, *cols]) if cols else diag
    vals = np.concatenate([np.ones(m), *vals]) if vals else np.ones(m)
    C = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(m, m))
    unmapped = np.flatnonzero(~mapped)
    if unmapped.size:
        log.info("%d unmapped SNPs receive weight 1", unmapped.size)
    return LdWindows(C, regions, unmapped)


def _solve_region(C, w_floor, region_id):
    """min sum_i |1 - C_i w|  s.t.  w >= w_floor, as an LP with split slacks."""
    k = C.shape[0]
    b = 1.0 - w_floor * C.sum(axis=1)
    eye = np.eye(k)
    A = np.hstack([C, eye, -eye])
    cost = np.concatenate([np.zeros(k), np.ones(2 * k)])
    try:
        x, _ = simplex(cost, A, b)
    except LinearProgramError as exc:
        raise LinearProgramError(f"LD weight LP failed in region {region_id}: {exc}") from exc
    w = w_floor + x[:k]
    return w, float(np.abs(1.0 - C @ w).sum())


def ld_weights(C, cfg=None, unmapped=None):
    """Positive SNP weights minimizing ``sum_i |1 - C_i w|``.

    ``C`` is an :class:`LdWindows` or a square matrix of decay-weighted
    squared correlations. The problem decouples over connected components of
    the nonzero pattern of ``C``, and each component is solved separately;
    isolated SNPs get ``w_i = 1 / C_ii``. Unmapped SNPs are fixed at 1.
    """
    cfg = cfg or LdWeightConfig()
    if isinstance(C, LdWindows):
        unmapped = C.unmapped if unmapped is None else unmapped
        C = C.C
    C = scipy.sparse.csr_matrix(C, dtype=np.float64)
    m = C.shape[0]
    if C.shape != (m, m):
        raise DataError("C must be square")
    w = np.ones(m)
    fixed = np.zeros(m, dtype=bool)
    if unmapped is not None and len(unmapped):
        fixed[np.asarray(unmapped, dtype=int)] = True
    n_comp, labels = connected_components(C, directed=False)
    region_objectives = []
    for comp in range(n_comp):
        idx = np.flatnonzero((labels == comp) & ~fixed)
        if idx.size == 0:
            continue
        block = C[idx][:, idx].toarray()
        if idx.size == 1:
            w[idx] = max(1.0 / block[0, 0], cfg.w_floor)
            region_objectives.append(float(abs(1.0 - block[0, 0] * w[idx[0]])))
            continue
        w_region, obj = _solve_region(block, cfg.w_floor, comp)
        w[idx] = w_region
        region_objectives.append(obj)
    objective = float(np.abs(1.0 - C @ w).sum())
    return LdWeights(w, objective, region_objectives)


def ld_objective(C, w):
    C = C.C if isinstance(C, LdWindows) else C
    return float(np.abs(1.0 - C @ np.asarray(w, dtype=np.float64)).sum())


def ibs_kinship(A, B=None):
    """Mean allele sharing ``1 - |a - b| / 2`` over SNPs between rows of A and B."""
    A = np.asarray(A, dtype=np.float64)
    B = A if B is None else np.asarray(B, dtype=np.float64)
    ind_a = [(A == g).astype(np.float64) for g in (0.0, 1.0, 2.0)]
    ind_b = ind_a if B is A else [(B == g).astype(np.float64) for g in (0.0, 1.0, 2.0)]
    a0, a1, a2 = ind_a
    b0, b1, b2 = ind_b
    dist = a0 @ b1.T + a1 @ b0.T + a1 @ b2.T + a2 @ b1.T + 2.0 * (a0 @ b2.T + a2 @ b0.T)
    return 1.0 - dist / (2.0 * A.shape[1])


def k0_ibs(X):
    X = check_genotypes(X)
    K = ibs_kinship(X)
    np.fill_diagonal(K, 1.0)
    return KinshipMatrix(K, "k0")


def _freqs(p):
    return p.p if isinstance(p, AlleleFrequencies) else np.asarray(p, dtype=np.float64)


def kinship_factor(X, p, kind, w=None):
    """Transformed genotypes ``M`` and divisor ``c`` with ``K = M M^T / c``.

    ``k1`` centres by ``2p``; ``k2`` also scales by ``sqrt(2p(1-p))``;
    ``k3`` multiplies the ``k2`` columns by ``sqrt(w)`` and divides by
    ``sum(w)``.
    """
    p = _freqs(p)
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != p.shape[0]:
        raise DataError(f"{X.shape[1]} SNP columns but {p.shape[0]} allele frequencies")
    M = X - 2.0 * p
    if kind == "k1":
        return M, float(X.shape[1])
    if np.any((p <= 0) | (p >= 1)):
        raise DataError("standardized kinship needs 0 < p < 1 for every SNP")
    M = M / np.sqrt(2.0 * p * (1.0 - p))
    if kind == "k2":
        return M, float(X.shape[1])
    if kind == "k3":
        if w is None:
            raise DataError("k3 needs LD weights")
        w = w.w if isinstance(w, LdWeights) else np.asarray(w, dtype=np.float64)
        if w.shape != p.shape or np.any(w <= 0):
            raise DataError("LD weights must be positive, one per SNP")
        # Scale-free in w; normalizing by the maximum makes equal weights exactly K2.
        w = w / w.max()
        return M * np.sqrt(w), float(w.sum())
    raise ValueError(f"unknown kinship kind {kind!r}")


def _symmetric_product(M, c):
    K = (M @ M.T) / c
    return 0.5 * (K + K.T)


def k1_centered(X, p):
    X = check_genotypes(X)
    M, c = kinship_factor(X, p, "k1")
    return KinshipMatrix(_symmetric_product(M, c), "k1", frequencies=p if isinstance(p, AlleleFrequencies) else None)


def k2_standardized(X, p):
    X = check_genotypes(X)
    M, c = kinship_factor(X, p, "k2")
    return KinshipMatrix(_symmetric_product(M, c), "k2", frequencies=p if isinstance(p, AlleleFrequencies) else None)


def k3_ld_adjusted(X, p, w):
    X = check_genotypes(X)
    M, c = kinship_factor(X, p, "k3", w)
    weights = w.w if isinstance(w, LdWeights) else np.asarray(w, dtype=np.float64)
    return KinshipMatrix(
        _symmetric_product(M, c), "k3", weights=weights, frequencies=p if isinstance(p, AlleleFrequencies) else None
    )


def cross_kinship(X_train, X_test, p_train=None, kind="k2", w=None):
    """Test x train block of a kinship built with training frequencies and weights."""
    X_train = check_genotypes(X_train, name="X_train")
    X_test = check_genotypes(X_test, name="X_test")
    if X_train.shape[1] != X_test.shape[1]:
        raise DataError("training and test genotypes have different SNP sets")
    if kind == "k0":
        return ibs_kinship(X_test, X_train)
    M_train, c = kinship_factor(X_train, p_train, kind, w)
    M_test, _ = kinship_factor(X_test, p_train, kind, w)
    return (M_test @ M_train.T) / c


def kinship_matrix(X, kind, p=None, w=None):
    """Dispatch to the construction named by ``kind``."""
    if kind == "k0":
        return k0_ibs(X)
    if p is None:
        p = allele_frequencies(X)
    if kind == "k1":
        return k1_centered(X, p)
    if kind == "k2":
        return k2_standardized(X, p)
    if kind == "k3":
        return k3_ld_adjusted(X, p, w)
    raise ValueError(f"unknown kinship kind {kind!r}")


class Kinship(TransformerMixin, BaseEstimator):
    """Kinship of new individuals with the training individuals.

    ``fit`` estimates allele frequencies (and LD weights for ``k3``) on the
    training genotypes and stores the training kinship in ``K_``;
    ``transform`` returns the (new x training) kinship block. SNPs that are
    monomorphic in the training rows are dropped for ``k1``-``k3``.

    Parameters
    ----------
    kind : {"k0", "k1", "k2", "k3"}
    snp_map : SnpMap, optional
        Required for ``k3``; must list the SNPs in column order.
    ld_config : LdWeightConfig, optional
    """

    def __init__(self, kind="k2", snp_map=None, ld_config=None):
        self.kind = kind
        self.snp_map = snp_map
        self.ld_config = ld_config

    def fit(self, X, y=None):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kinship kind {self.kind!r}")
        X = check_genotypes(X)
        self.n_features_in_ = X.shape[1]
        if self.kind == "k0":
            self.columns_ = np.arange(X.shape[1])
        else:
            self.columns_ = polymorphic_columns(X)
            if self.columns_.size == 0:
                raise DataError("no polymorphic SNPs in the training rows")
        Xs = X[:, self.columns_]
        self.frequencies_ = None if self.kind == "k0" else allele_frequencies(Xs)
        self.weights_ = None
        if self.kind == "k3":
            if self.snp_map is None:
                raise DataError("k3 kinship needs a SNP map")
            cfg = self.ld_config or LdWeightConfig()
            windows = squared_corr_windows(Xs, self.snp_map.take(self.columns_), cfg)
            self.ld_weights_ = ld_weights(windows, cfg)
            self.weights_ = self.ld_weights_.w
        self.X_fit_ = Xs
        self.K_ = kinship_matrix(Xs, self.kind, self.frequencies_, self.weights_).K
        return self

    def transform(self, X):
        check_is_fitted(self, "K_")
        X = check_genotypes(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} SNP columns, got {X.shape[1]}")
        return cross_kinship(self.X_fit_, X[:, self.columns_], self.frequencies_, self.kind, self.weights_)
