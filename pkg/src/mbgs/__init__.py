"""Markov blanket SNP selection, kinship matrices and genomic prediction."""

from ._validation import DataError
from .dataio import GenotypeDataset, ParseError, SnpMap, load_genotypes, load_map, load_phenotypes
from .evaluation import PipelineConfig, compare, cross_validate, random_subset_baseline, single_snp_baseline
from .kinship import Kinship, LdWeightConfig, kinship_matrix, ld_weights
from .mblanket import MarkovBlanketSelector, MbConfig, iamb
from .models import GBLUPRegressor, PenalizedRegression, PLSRegression
from .simgen import SimConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "GBLUPRegressor",
    "GenotypeDataset",
    "Kinship",
    "LdWeightConfig",
    "MarkovBlanketSelector",
    "MbConfig",
    "PLSRegression",
    "ParseError",
    "PenalizedRegression",
    "PipelineConfig",
    "SimConfig",
    "SnpMap",
    "__version__",
    "compare",
    "cross_validate",
    "iamb",
    "kinship_matrix",
    "ld_weights",
    "load_genotypes",
    "load_map",
    "load_phenotypes",
    "random_subset_baseline",
    "simulate",
    "single_snp_baseline",
]
