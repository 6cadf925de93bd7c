import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, settings
from hypothesis import strategies as st

from mbgs._validation import DataError
from mbgs.dataio import SnpMap
from mbgs.kinship import (
    Kinship,
    LdWeightConfig,
    cross_kinship,
    k0_ibs,
    k1_centered,
    k2_standardized,
    k3_ld_adjusted,
    kinship_factor,
    kinship_matrix,
    ld_objective,
    ld_weights,
    squared_corr_windows,
)
from mbgs.preprocess import allele_frequencies
from mbgs.simgen import SimConfig, simulate_genotypes
from tests.conftest import random_genotypes


def psd_ok(K):
    ev = np.linalg.eigvalsh(K)
    return ev[0] >= -1e-8 * max(ev[-1], 1e-300)


def test_k0_hand_examples():
    K = k0_ibs(np.array([[0, 1, 2], [1, 1, 0]], float)).K
    assert K[0, 1] == pytest.approx(0.5)
    np.testing.assert_array_equal(np.diag(K), [1.0, 1.0])
    assert k0_ibs(np.array([[0, 2], [2, 0]], float)).K[0, 1] == 0.0


def test_k0_bruteforce(rng):
    X = random_genotypes(rng, 8, 15)
    K = k0_ibs(X).K
    ref = np.array([[np.mean(1 - np.abs(a - b) / 2) for b in X] for a in X])
    np.testing.assert_allclose(K, ref, atol=1e-14)
    assert K.min() >= 0 and K.max() <= 1


def test_k1_hand_example():
    X = np.array([[0, 2], [1, 1], [2, 0]], float)
    K = k1_centered(X, np.array([0.5, 0.5])).K
    ref = np.array([[1, 0, -1], [0, 0, 0], [-1, 0, 1]], float)
    np.testing.assert_allclose(K, ref)
    assert K[0, 0] == 1.0  # ((0-1)^2 + (2-1)^2) / 2


def test_k1_constant_column_is_zero():
    X = np.ones((4, 3))
    np.testing.assert_array_equal(k1_centered(X, np.full(3, 0.5)).K, 0.0)


def test_k1_rows_sum_to_zero(rng):
    X = random_genotypes(rng, 12, 30)
    K = k1_centered(X, allele_frequencies(X)).K
    np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-12)


def test_k2_single_snp_values():
    X = np.array([[0.0], [1.0], [2.0]])
    M, c = kinship_factor(X, np.array([0.5]), "k2")
    np.testing.assert_allclose(M[:, 0], (X[:, 0] - 1) / np.sqrt(0.5))
    assert c == 1.0


def test_k2_is_twice_k1_at_half(rng):
    X = random_genotypes(rng, 10, 20)
    p = np.full(20, 0.5)
    np.testing.assert_allclose(k2_standardized(X, p).K, 2 * k1_centered(X, p).K, atol=1e-13)


def test_k2_rejects_boundary_frequency(rng):
    with pytest.raises(DataError):
        k2_standardized(random_genotypes(rng, 5, 2), np.array([0.0, 0.5]))


@pytest.mark.parametrize("c", [1.0, 0.37, 5.0])
def test_k3_equal_weights_is_k2(rng, c):
    X = random_genotypes(rng, 10, 20)
    p = allele_frequencies(X)
    np.testing.assert_array_equal(k3_ld_adjusted(X, p, np.full(20, c)).K, k2_standardized(X, p).K)


def test_k3_concentrated_weight(rng):
    X = random_genotypes(rng, 10, 6)
    p = allele_frequencies(X)
    w = np.full(6, 1e-6)
    w[2] = 1.0
    M, _ = kinship_factor(X, p, "k2")
    np.testing.assert_allclose(k3_ld_adjusted(X, p, w).K, np.outer(M[:, 2], M[:, 2]), atol=1e-4)


@pytest.mark.parametrize("kind", ["k1", "k2", "k3"])
def test_factor_reconstruction(rng, kind):
    X = random_genotypes(rng, 12, 25)
    p = allele_frequencies(X)
    w = rng.uniform(0.1, 2, 25)
    M, c = kinship_factor(X, p, kind, w)
    K = kinship_matrix(X, kind, p, w).K
    np.testing.assert_allclose(K, M @ M.T / c, atol=1e-10)


def test_psd_symmetry_random_instances(rng):
    for _ in range(20):
        X = random_genotypes(rng, 15, 30)
        X = X[:, np.ptp(X, axis=0) > 0]
        p = allele_frequencies(X)
        w = rng.uniform(1e-6, 3, X.shape[1])
        for K in (k1_centered(X, p).K, k2_standardized(X, p).K, k3_ld_adjusted(X, p, w).K):
            assert np.abs(K - K.T).max() <= 1e-12
            assert psd_ok(K)
        K0 = k0_ibs(X).K
        assert np.abs(K0 - K0.T).max() <= 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from(["k0", "k1", "k2", "k3"]))
def test_permutation_equivariance(seed, kind):
    rng = np.random.default_rng(seed)
    X = random_genotypes(rng, 9, 14, 0.2, 0.5)
    X[0] = 0
    X[1] = 2  # every SNP polymorphic
    w = rng.uniform(0.1, 1, 14)
    perm = rng.permutation(9)
    K = kinship_matrix(X, kind, w=w).K
    Kp = kinship_matrix(X[perm], kind, w=w).K
    np.testing.assert_allclose(Kp, K[np.ix_(perm, perm)], atol=1e-12)


@pytest.mark.parametrize("kind", ["k0", "k1", "k2", "k3"])
def test_cross_kinship_stacked_oracle(rng, kind):
    Xtr = random_genotypes(rng, 12, 20, 0.2, 0.5)
    Xtr[0], Xtr[1] = 0, 2
    Xte = random_genotypes(rng, 4, 20)
    p = allele_frequencies(Xtr)
    w = rng.uniform(0.1, 2, 20)
    cross = cross_kinship(Xtr, Xte, p, kind, w)
    full = kinship_matrix(np.vstack([Xtr, Xte]), kind, p, w).K
    np.testing.assert_allclose(cross, full[12:, :12], atol=1e-12)


def test_cross_kinship_duplicate_row_and_self(rng):
    Xtr = random_genotypes(rng, 10, 15, 0.2, 0.5)
    Xtr[0], Xtr[1] = 0, 2
    p = allele_frequencies(Xtr)
    K1 = k1_centered(Xtr, p).K
    np.testing.assert_allclose(cross_kinship(Xtr, Xtr, p, "k1"), K1, atol=1e-13)
    np.testing.assert_allclose(cross_kinship(Xtr, Xtr[[3]], p, "k2")[0], k2_standardized(Xtr, p).K[3], atol=1e-13)
    with pytest.raises(DataError, match="different SNP sets"):
        cross_kinship(Xtr, Xtr[:, :5], p, "k1")


def simple_map(chroms, positions):
    return SnpMap([f"s{i}" for i in range(len(chroms))], chroms, positions)


def test_windows_different_chromosomes(rng):
    X = random_genotypes(rng, 30, 2)
    X[:, 1] = X[:, 0]
    W = squared_corr_windows(X, simple_map(["1", "2"], [0.0, 0.0]), LdWeightConfig())
    np.testing.assert_array_equal(W.C.toarray(), np.eye(2))


def test_windows_duplicate_and_decay(rng):
    X = random_genotypes(rng, 40, 3, 0.2, 0.5)
    X[:, 1] = X[:, 0]
    cfg = LdWeightConfig(lambda_cm=2.0)
    C = squared_corr_windows(X, simple_map(["1"] * 3, [5.0, 5.0, 7.0]), cfg).C.toarray()
    assert C[0, 1] == pytest.approx(1.0, abs=1e-12)
    r = np.corrcoef(X[:, 0], X[:, 2])[0, 1]
    assert C[0, 2] == pytest.approx(r * r * np.exp(-1.0), rel=1e-10)
    assert np.exp(-1.0) == pytest.approx(0.3679, abs=1e-4)
    np.testing.assert_array_equal(np.diag(C), 1.0)


def test_windows_floor_and_unmapped(rng):
    X = random_genotypes(rng, 40, 3, 0.2, 0.5)
    X[:, 1] = X[:, 0]
    X[:, 2] = X[:, 0]
    cfg = LdWeightConfig(lambda_cm=1.0, window_r2_floor=0.01)
    W = squared_corr_windows(X, simple_map(["1"] * 3, [0.0, 5.0, np.nan]), cfg)
    np.testing.assert_array_equal(W.C.toarray(), np.eye(3))  # exp(-5) < 0.01
    np.testing.assert_array_equal(W.unmapped, [2])
    lw = ld_weights(W, cfg)
    assert lw.w[2] == 1.0


def test_region_size_cap(rng):
    X = random_genotypes(rng, 30, 10, 0.2, 0.5)
    cfg = LdWeightConfig(lambda_cm=100.0, max_region_snps=4)
    W = squared_corr_windows(X, simple_map(["1"] * 10, np.arange(10.0)), cfg)
    assert [len(r) for r in W.regions] == [4, 4, 2]
    C = W.C.toarray()
    assert C[3, 4] == 0 and C[0, 3] > 0


def test_ld_weights_identity():
    lw = ld_weights(scipy.sparse.identity(5))
    np.testing.assert_array_equal(lw.w, 1.0)
    assert lw.objective == 0.0


def test_ld_weights_duplicate_pair():
    lw = ld_weights(np.ones((2, 2)))
    assert lw.objective == pytest.approx(0.0, abs=1e-12)
    assert lw.w.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.all(lw.w >= 1e-6)


def test_ld_weights_optimal_against_highs(rng):
    from scipy.optimize import linprog

    for _ in range(10):
        k = 6
        C = rng.random((k, k)) ** 3
        C = (C + C.T) / 2
        np.fill_diagonal(C, 1.0)
        lw = ld_weights(C)
        floor = 1e-6
        A = np.vstack([np.hstack([C, -np.eye(k)]), np.hstack([-C, -np.eye(k)])])
        b = np.concatenate([np.ones(k), -np.ones(k)])
        ref = linprog(np.r_[np.zeros(k), np.ones(k)], A_ub=A, b_ub=b,
                      bounds=[(floor, None)] * k + [(0, None)] * k, method="highs")
        assert lw.objective == pytest.approx(ref.fun, abs=1e-8)


def test_ld_weights_flatness_simulated():
    for seed in range(5):
        ds, snp_map = simulate_genotypes(SimConfig(n=80, m=60, chromosomes=2, adjacent_ld=0.8, seed=seed))
        cfg = LdWeightConfig(lambda_cm=3.0)
        W = squared_corr_windows(ds.X, snp_map, cfg)
        lw = ld_weights(W, cfg)
        assert lw.objective <= ld_objective(W, np.ones(60)) + 1e-9
        rng = np.random.default_rng(seed)
        for _ in range(20):
            assert lw.objective <= ld_objective(W, rng.uniform(1e-6, 2, 60)) + 1e-9
        assert np.all(lw.w >= cfg.w_floor)


def test_ld_config_validation():
    with pytest.raises(ValueError):
        LdWeightConfig(lambda_cm=0.0)


def test_kinship_transformer(rng):
    ds, snp_map = simulate_genotypes(SimConfig(n=30, m=40, chromosomes=2, seed=4))
    X = ds.X.copy()
    X[:25, 5] = 0  # monomorphic in the training rows
    tr, te = X[:25], X[25:]
    for kind in ("k0", "k1", "k2", "k3"):
        kin = Kinship(kind, snp_map).fit(tr)
        assert kin.K_.shape == (25, 25)
        if kind != "k0":
            assert 5 not in kin.columns_
        cross = kin.transform(te)
        assert cross.shape == (5, 25)
        np.testing.assert_allclose(kin.transform(tr), kin.K_, atol=1e-12)
    with pytest.raises(DataError, match="needs a SNP map"):
        Kinship("k3").fit(tr)
