import numpy as np
import pytest

from mbgs._validation import DataError
from mbgs.dataio import GenotypeDataset
from mbgs.preprocess import (
    CorrelationPruner,
    KNNGenotypeImputer,
    QualityFilter,
    allele_frequencies,
    impute_knn,
    impute_knn_matrix,
    minor_allele_frequency,
    preprocess,
    prune_correlated,
    prune_mask,
    quality_filter,
)
from tests.conftest import random_genotypes


def dataset(X):
    X = np.asarray(X, dtype=float)
    return GenotypeDataset([f"i{i}" for i in range(X.shape[0])], [f"s{j}" for j in range(X.shape[1])], X)


def test_maf_folded():
    X = np.array([[2, 0], [2, 0], [2, 1], [1, 0]], dtype=float)
    np.testing.assert_allclose(minor_allele_frequency(X), [1 / 8, 1 / 8])


def test_low_maf_removed(rng):
    X = random_genotypes(rng, 100, 3, 0.2, 0.5)
    X[:, 1] = 0
    X[0, 1] = 1  # MAF = 1 / 200 = 0.005
    out, log = quality_filter(dataset(X))
    assert log.removed_maf == ["s1"]
    assert out.snp_ids == ["s0", "s2"]


def test_missing_fraction_removed(rng):
    X = random_genotypes(rng, 100, 3, 0.2, 0.5)
    X[:21, 2] = np.nan
    X[:20, 0] = np.nan  # exactly 20% is kept
    out, log = quality_filter(dataset(X))
    assert log.removed_missing == ["s2"]
    assert out.snp_ids == ["s0", "s1"]


def test_clean_dataset_unchanged(rng):
    ds = dataset(random_genotypes(rng, 50, 4, 0.2, 0.5))
    out, log = quality_filter(ds)
    assert out is ds and log.is_empty


def test_empty_snp_set():
    with pytest.raises(DataError, match="empty SNP set"):
        quality_filter(dataset(np.zeros((10, 3))))


def test_impute_no_missing_identity(rng):
    ds = dataset(random_genotypes(rng, 20, 5))
    np.testing.assert_array_equal(impute_knn(ds).X, ds.X)


def test_impute_from_duplicate_column(rng):
    X = random_genotypes(rng, 30, 6, 0.2, 0.5)
    X[:, 4] = X[:, 1]
    truth = X[7, 1]
    X[7, 1] = np.nan
    out, filled = impute_knn_matrix(X, k=1)
    assert filled == 1
    assert out[7, 1] == truth


def test_impute_negatively_correlated_neighbour(rng):
    X = random_genotypes(rng, 30, 4, 0.2, 0.5)
    X[:, 2] = 2 - X[:, 0]
    truth = X[3, 0]
    X[3, 0] = np.nan
    out, _ = impute_knn_matrix(X, k=1)
    assert out[3, 0] == truth


def test_impute_exhaustive_oracle(rng):
    """Brute-force kNN over the small matrix."""
    X = random_genotypes(rng, 25, 6, 0.2, 0.5)
    X[rng.random(X.shape) < 0.1] = np.nan
    k = 3
    out, _ = impute_knn_matrix(X, k)
    for col in range(X.shape[1]):
        scores = []
        for j in range(X.shape[1]):
            ok = ~np.isnan(X[:, col]) & ~np.isnan(X[:, j])
            a, b = X[ok, col], X[ok, j]
            r = 0.0 if j == col or a.std() == 0 or b.std() == 0 else np.corrcoef(a, b)[0, 1]
            scores.append(r)
        scores = np.array(scores)
        nbrs = [j for j in sorted(range(X.shape[1]), key=lambda j: (-abs(scores[j]), j))
                if j != col and abs(scores[j]) > 0][:k]
        for i in np.flatnonzero(np.isnan(X[:, col])):
            vals = [(abs(scores[j]), X[i, j] if scores[j] > 0 else 2 - X[i, j]) for j in nbrs
                    if not np.isnan(X[i, j])]
            if vals:
                w = np.array([v[0] for v in vals])
                est = w @ np.array([v[1] for v in vals]) / w.sum()
            else:
                est = np.nanmean(X[:, col])
            assert out[i, col] == np.clip(np.rint(est), 0, 2)


def test_impute_k_larger_than_available(rng):
    X = random_genotypes(rng, 15, 3, 0.2, 0.5)
    X[0, 0] = np.nan
    out, _ = impute_knn_matrix(X, k=50)
    assert not np.isnan(out).any()


def test_impute_entirely_missing_named():
    X = np.array([[0, np.nan], [1, np.nan], [2, np.nan]])
    with pytest.raises(DataError, match="'s1' is entirely missing"):
        impute_knn(dataset(X))


def test_prune_duplicate_later_removed(rng):
    X = random_genotypes(rng, 40, 4, 0.2, 0.5)
    X[:, 3] = X[:, 1]
    out, log = prune_correlated(dataset(X))
    assert log.removed_pruned == ["s3"]
    assert out.snp_ids == ["s0", "s1", "s2"]


def _chain(rng):
    # A, B, C with r(A,B) > 0.9, r(B,C) > 0.9 and r(A,C) <= 0.9.
    while True:
        A = rng.integers(0, 3, 200).astype(float)
        B = A.copy()
        B[rng.choice(200, 12, replace=False)] = rng.integers(0, 3, 12)
        C = B.copy()
        C[rng.choice(200, 12, replace=False)] = rng.integers(0, 3, 12)
        R = np.abs(np.corrcoef([A, B, C]))
        if R[0, 1] > 0.9 and R[1, 2] > 0.9 and R[0, 2] <= 0.9:
            return np.column_stack([A, B, C]), R


def test_prune_chain_keeps_ends(rng):
    X, R = _chain(rng)
    np.testing.assert_array_equal(prune_mask(X), [True, False, True])
    # Oracle: greedy pass over all pairs.
    keep = [0]
    for j in (1, 2):
        if all(R[i, j] <= 0.9 for i in keep):
            keep.append(j)
    assert keep == [0, 2]


def test_prune_absolute_correlation(rng):
    X = random_genotypes(rng, 40, 2, 0.2, 0.5)
    X[:, 1] = 2 - X[:, 0]
    np.testing.assert_array_equal(prune_mask(X), [True, False])


def test_prune_no_op(rng):
    ds = dataset(random_genotypes(rng, 100, 5, 0.2, 0.5))
    out, log = prune_correlated(ds)
    assert out is ds and not log.removed_pruned


@pytest.mark.parametrize(("col", "p"), [([1, 1, 1, 1], 0.5), ([0, 1, 2, 1], 0.5), ([2, 2, 1, 0], 5 / 8)])
def test_allele_frequencies(col, p):
    assert allele_frequencies(np.array(col, float)[:, None]).p[0] == pytest.approx(p)


def test_allele_frequencies_monomorphic():
    with pytest.raises(DataError, match="monomorphic"):
        allele_frequencies(np.zeros((4, 1)))
    X = np.array([[0.0], [0.0], [2.0]])
    with pytest.raises(DataError, match="monomorphic"):
        allele_frequencies(X, rows=[0, 1])
    assert allele_frequencies(X, rows=[0, 2]).p[0] == 0.5


def test_preprocess_pipeline(rng):
    X = random_genotypes(rng, 60, 8, 0.2, 0.5)
    X[:, 5] = X[:, 2]
    X[:, 7] = 0
    X[3, 1] = np.nan
    out, log = preprocess(dataset(X))
    assert log.removed_maf == ["s7"]
    assert log.removed_pruned == ["s5"]
    assert log.imputed_cells == 1
    assert not np.isnan(out.X).any()


def test_estimators(rng):
    X = random_genotypes(rng, 50, 6, 0.2, 0.5)
    X[:, 4] = 0
    X[:, 5] = X[:, 0]
    X[2, 1] = np.nan
    qf = QualityFilter().fit(X)
    np.testing.assert_array_equal(qf.get_support(), [True, True, True, True, False, True])
    Xi = KNNGenotypeImputer(3).fit_transform(X)
    assert not np.isnan(Xi).any()
    pr = CorrelationPruner().fit(Xi[:, :4])
    assert pr.get_support().all()
    np.testing.assert_array_equal(CorrelationPruner().fit(Xi).get_support(),
                                  [True, True, True, True, True, False])
