"""Markov blanket estimation of a trait with the IAMB algorithm."""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import DataError, check_genotypes, check_non_constant, check_phenotype
from .stats import t_pvalues

log = logging.getLogger(__name__)

_COLLINEAR_RTOL = 1e-8


@dataclass(frozen=True)
class MbConfig:
    alpha: float = 0.15
    max_blanket: int | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_blanket is not None and self.max_blanket < 0:
            raise ValueError("max_blanket must be non-negative")


@dataclass(frozen=True)
class TrailRecord:
    phase: str
    snp: int
    p_value: float
    blanket_size: int


@dataclass
class MarkovBlanket:
    """Selected SNP column indices (admission order) and the IAMB audit trail."""

    selected: tuple
    trail: list = field(default_factory=list)

    def __len__(self):
        return len(self.selected)

    @property
    def capped(self):
        return any(rec.phase == "cap" for rec in self.trail)


def _forward(Xc, yc, alpha, max_blanket, trail):
    n, m = Xc.shape
    R = Xc.copy()
    ry = yc.copy()
    ref = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    ref_y = np.sqrt(yc @ yc)
    in_blanket = np.zeros(m, dtype=bool)
    blanket = []
    while True:
        if len(blanket) >= max_blanket:
            trail.append(TrailRecord("cap", -1, float("nan"), len(blanket)))
            log.info("IAMB forward phase stopped at the blanket cap of %d SNPs", max_blanket)
            break
        ny = np.sqrt(ry @ ry)
        if ny <= _COLLINEAR_RTOL * ref_y:
            break
        rn = np.sqrt(np.einsum("ij,ij->j", R, R))
        testable = (~in_blanket) & (rn > _COLLINEAR_RTOL * np.maximum(ref, 1e-300))
        if not testable.any():
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (ry @ R) / (rn * ny)
        p = np.ones(m)
        df = n - len(blanket) - 2
        p[testable] = t_pvalues(np.clip(r[testable], -1.0, 1.0), df)
        p[in_blanket] = np.inf
        best = int(np.argmin(p))
        if not p[best] < alpha:
            break
        q = R[:, best] / rn[best]
        R -= np.outer(q, q @ R)
        ry -= q * (q @ ry)
        R[:, best] = 0.0
        in_blanket[best] = True
        blanket.append(best)
        trail.append(TrailRecord("forward", best, float(p[best]), len(blanket)))
    return blanket


def _precision(W):
    """Inverse Gram matrix of the columns of ``W`` through a QR factorization."""
    _, Rf = np.linalg.qr(W)
    Rinv = np.linalg.solve(Rf, np.eye(Rf.shape[0]))
    return Rinv @ Rinv.T


def backward_pvalues(Xc, yc, blanket):
    """p-values of ``y`` vs each member given the rest of ``blanket``."""
    n = Xc.shape[0]
    if not blanket:
        return np.zeros(0)
    P = _precision(np.column_stack([yc, Xc[:, blanket]]))
    r = -P[0, 1:] / np.sqrt(P[0, 0] * np.diag(P)[1:])
    return t_pvalues(np.clip(r, -1.0, 1.0), n - (len(blanket) - 1) - 2)


def _backward(Xc, yc, blanket, alpha, trail):
    n = Xc.shape[0]
    blanket = list(blanket)
    while blanket:
        removed_any = False
        P = _precision(np.column_stack([yc, Xc[:, blanket]]))
        members = list(blanket)
        alive = list(members)
        for snp in members:
            k = alive.index(snp) + 1
            denom = P[0, 0] * P[k, k]
            r = -P[0, k] / np.sqrt(denom) if denom > 0 else 0.0
            df = n - (len(alive) - 1) - 2
            p = float(t_pvalues(np.clip(r, -1.0, 1.0), df))
            if p >= alpha:
                keep = np.r_[0:k, k + 1:P.shape[0]]
                P = P[np.ix_(keep, keep)] - np.outer(P[keep, k], P[k, keep]) / P[k, k]
                alive.remove(snp)
                removed_any = True
                trail.append(TrailRecord("backward", snp, p, len(alive)))
        blanket = alive
        if not removed_any:
            break
    return blanket


def iamb(X, y, cfg=None):
    """Estimate the Markov blanket of ``y`` among the columns of ``X``.

    Forward phase: repeatedly test every SNP outside the blanket for
    independence of ``y`` given the current blanket and admit the one with
    the lowest p-value if it is below ``alpha`` (ties to the lowest index).
    Backward phase: in admission order, drop each member that is independent
    of ``y`` given the remaining members, repeating full passes until none is
    dropped.

    Tests are exact t tests on partial correlations, computed by sequential
    orthogonalization of the residuals against the admitted SNPs.
    """
    cfg = cfg or MbConfig()
    X = check_genotypes(X)
    y = check_non_constant(check_phenotype(y, X.shape[0]))
    n = X.shape[0]
    max_blanket = n - 3 if cfg.max_blanket is None else min(cfg.max_blanket, n - 3)
    max_blanket = max(max_blanket, 0)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    trail = []
    blanket = _forward(Xc, yc, cfg.alpha, max_blanket, trail)
    blanket = _backward(Xc, yc, blanket, cfg.alpha, trail)
    return MarkovBlanket(tuple(int(b) for b in blanket), trail)


@dataclass
class StabilityTable:
    """Per-SNP inclusion fraction of a collection of blankets."""

    snp_ids: list
    chromosomes: list
    positions: np.ndarray
    inclusion_fraction: np.ndarray
    n_blankets: int

    columns = ("snp_id", "chromosome", "position", "inclusion_fraction")

    @property
    def n_at_least_half(self):
        return int(np.sum(self.inclusion_fraction >= 0.5))

    def to_records(self):
        return [
            {
                "snp_id": s,
                "chromosome": c,
                "position": None if np.isnan(p) else float(p),
                "inclusion_fraction": float(f),
            }
            for s, c, p, f in zip(self.snp_ids, self.chromosomes, self.positions, self.inclusion_fraction)
        ]

    def to_dict(self):
        return {
            "n_blankets": self.n_blankets,
            "n_at_least_half": self.n_at_least_half,
            "snps": self.to_records(),
        }


def blanket_stability(blankets, m, snp_ids=None, snp_map=None):
    """Fraction of ``blankets`` that contain each of the ``m`` SNP columns."""
    blankets = list(blankets)
    if not blankets:
        raise DataError("blanket_stability needs at least one blanket")
    counts = np.zeros(m)
    for b in blankets:
        selected = b.selected if isinstance(b, MarkovBlanket) else b
        counts[np.asarray(list(selected), dtype=int)] += 1
    if snp_ids is None:
        snp_ids = [str(i) for i in range(m)]
    if snp_map is not None:
        chroms = list(snp_map.subset(snp_ids).chromosomes)
        positions = snp_map.subset(snp_ids).positions
    else:
        chroms = [""] * m
        positions = np.full(m, np.nan)
    return StabilityTable(list(snp_ids), chroms, positions, counts / len(blankets), len(blankets))


class MarkovBlanketSelector(SelectorMixin, BaseEstimator):
    """Select the SNP columns in the estimated Markov blanket of the target.

    Parameters
    ----------
    alpha : float, default=0.15
        Type I error threshold of the conditional independence tests.
    max_blanket : int or None
        Cap on the blanket size; defaults to ``n - 3``.
    """

    def __init__(self, alpha=0.15, max_blanket=None):
        self.alpha = alpha
        self.max_blanket = max_blanket

    def fit(self, X, y):
        X = check_genotypes(X)
        self.blanket_ = iamb(X, y, MbConfig(self.alpha, self.max_blanket))
        self.support_ = np.zeros(X.shape[1], dtype=bool)
        self.support_[list(self.blanket_.selected)] = True
        self.n_features_in_ = X.shape[1]
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_
