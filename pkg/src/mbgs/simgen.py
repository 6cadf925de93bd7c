"""Synthetic genotypes with local LD and additive phenotypes with known truth."""

from dataclasses import asdict, dataclass

import numpy as np

from ._validation import DataError
from .dataio import GenotypeDataset, SnpMap


@dataclass(frozen=True)
class SimConfig:
    n: int = 300
    m: int = 2000
    chromosomes: int = 5
    adjacent_ld: float = 0.5
    maf_range: tuple = (0.05, 0.5)
    n_causal: int = 20
    h2: float = 0.5
    map_spacing_cM: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.adjacent_ld < 1:
            raise ValueError("adjacent_ld must lie in [0, 1)")
        lo, hi = self.maf_range
        if not 0 < lo <= hi <= 0.5:
            raise ValueError("maf_range must lie within (0, 0.5]")
        if not 0 <= self.n_causal <= self.m:
            raise ValueError("n_causal must lie in [0, m]")
        if not 0 <= self.h2 <= 1:
            raise ValueError("h2 must lie in [0, 1]")
        if self.chromosomes < 1 or self.chromosomes > self.m:
            raise ValueError("need between 1 and m chromosomes")

    def to_dict(self):
        return asdict(self)


@dataclass
class SimTruth:
    causal_indices: np.ndarray
    true_beta: np.ndarray
    true_genetic_values: np.ndarray
    realized_h2: float

    columns = ("snp_index", "beta")

    def to_records(self):
        return [{"snp_index": int(i), "beta": float(self.true_beta[i])} for i in self.causal_indices]

    def to_dict(self):
        return {
            "causal_indices": self.causal_indices.tolist(),
            "true_beta": self.true_beta[self.causal_indices].tolist(),
            "realized_h2": self.realized_h2,
        }


def _chromosome_sizes(m, c):
    base, extra = divmod(m, c)
    return [base + (1 if i < extra else 0) for i in range(c)]


def _haplotypes(rng, n_hap, freqs, rho):
    """First-order chain: each site copies the previous allele with prob ``rho``,
    otherwise draws afresh from its own frequency."""
    k = freqs.shape[0]
    fresh = rng.random((n_hap, k)) < freqs
    copy = rng.random((n_hap, k)) < rho
    hap = np.empty((n_hap, k), dtype=bool)
    hap[:, 0] = fresh[:, 0]
    for j in range(1, k):
        hap[:, j] = np.where(copy[:, j], hap[:, j - 1], fresh[:, j])
    return hap


def simulate_genotypes(cfg):
    """Genotype dataset and map; chromosomes use independent child seeds."""
    root = np.random.SeedSequence(cfg.seed)
    freq_rng = np.random.default_rng(root.spawn(1)[0])
    freqs = freq_rng.uniform(cfg.maf_range[0], cfg.maf_range[1], size=cfg.m)
    chrom_seeds = np.random.SeedSequence([cfg.seed, 1]).spawn(cfg.chromosomes)
    blocks, chroms, positions = [], [], []
    start = 0
    for c, (size, seq) in enumerate(zip(_chromosome_sizes(cfg.m, cfg.chromosomes), chrom_seeds)):
        rng = np.random.default_rng(seq)
        f = freqs[start:start + size]
        hap = _haplotypes(rng, 2 * cfg.n, f, cfg.adjacent_ld)
        blocks.append(hap[: cfg.n].astype(np.float64) + hap[cfg.n:].astype(np.float64))
        chroms += [str(c + 1)] * size
        positions.append(np.arange(size) * cfg.map_spacing_cM)
        start += size
    X = np.hstack(blocks)
    snp_ids = [f"snp{j + 1}" for j in range(cfg.m)]
    individuals = [f"ind{i + 1}" for i in range(cfg.n)]
    snp_map = SnpMap(snp_ids, chroms, np.concatenate(positions))
    return GenotypeDataset(individuals, snp_ids, X, map=snp_map), snp_map


def simulate_phenotype(X, cfg):
    """Additive trait ``y = X beta + e`` with ``var(g) / (var(g) + var(e)) = h2``.

    ``h2 = 0`` gives ``beta = 0`` and unit-variance noise; ``h2 = 1`` gives
    ``y = g``.
    """
    X = X.X if isinstance(X, GenotypeDataset) else np.asarray(X, dtype=np.float64)
    n, m = X.shape
    if np.isnan(X).any():
        raise DataError("simulate_phenotype needs complete genotypes")
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2]))
    causal = np.sort(rng.choice(m, size=cfg.n_causal, replace=False))
    beta = np.zeros(m)
    beta[causal] = rng.standard_normal(cfg.n_causal)
    noise = rng.standard_normal(n)
    if cfg.h2 == 0:
        beta[:] = 0.0
        g = np.zeros(n)
        y = noise
    else:
        g = X @ beta
        var_g = g.var()
        if np.ptp(g) == 0:
            raise DataError("genetic values have zero variance")
        if cfg.h2 == 1:
            y = g.copy()
        else:
            y = g + noise * np.sqrt(var_g * (1 - cfg.h2) / cfg.h2)
    realized = float(g.var() / y.var()) if y.var() > 0 else 0.0
    return y, SimTruth(causal, beta, g, realized)


def simulate(cfg):
    """Genotypes, map, phenotype and truth in one call."""
    dataset, snp_map = simulate_genotypes(cfg)
    y, truth = simulate_phenotype(dataset.X, cfg)
    dataset.phenotype = y
    return dataset, truth
