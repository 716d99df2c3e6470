import itertools

import numpy as np
import pytest

from nodefuse import (Split, ari, clustering_accuracy, evaluate_clustering,
                      kmeans, linear_probe, nmi)
from nodefuse.errors import ContractError
from nodefuse.evaluation import lloyd


def blobs(rng, k=3, per=30, f=4, spread=0.05):
    centers = 10.0 * rng.normal(size=(k, f))
    x = np.concatenate([c + spread * rng.normal(size=(per, f)) for c in centers])
    y = np.repeat(np.arange(k), per)
    perm = rng.permutation(len(y))
    return x[perm], y[perm]


def even_split(n, seed):
    rng = np.random.default_rng(seed)
    idx = rng.permutation(n)
    a, b = int(0.5 * n), int(0.75 * n)
    return Split(train=idx[:a], val=idx[a:b], test=idx[b:], seed=seed)


class TestLinearProbe:
    def test_separable_blobs_perfect(self):
        rng = np.random.default_rng(0)
        x, y = blobs(rng)
        splits = [even_split(len(y), s) for s in range(3)]
        res = linear_probe(x, y, splits)
        assert res.mean == 1.0
        assert res.std == 0.0

    def test_shuffled_labels_near_chance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(1000, 6))
        y = rng.integers(0, 5, size=1000)
        splits = [even_split(1000, s) for s in range(3)]
        res = linear_probe(x, y, splits, epochs=100)
        assert 0.14 <= res.mean <= 0.26

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        x, y = blobs(rng, spread=2.0)
        splits = [even_split(len(y), 7)]
        a = linear_probe(x, y, splits)
        b = linear_probe(x, y, splits)
        assert a.accuracies == b.accuracies

    def test_single_class_train_rejected(self):
        x = np.random.default_rng(3).normal(size=(10, 4))
        y = np.array([0] * 5 + [1] * 5)
        s = Split(train=np.arange(5), val=np.array([5, 6]),
                  test=np.array([7, 8, 9]), seed=0)
        with pytest.raises(ContractError):
            linear_probe(x, y, [s])


class TestKmeans:
    def test_separable_blobs_recovered(self):
        rng = np.random.default_rng(4)
        x, y = blobs(rng)
        assign = kmeans(x, 3, seed=0)
        assert clustering_accuracy(assign, y) == 1.0

    def test_k_equals_n_zero_wcss(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(8, 3))
        assign, centers, history = lloyd(x, x.copy())
        assert history[-1] == 0.0
        assert sorted(assign) == list(range(8))

    def test_lloyd_wcss_monotone(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(60, 4))
        centers = x[rng.choice(60, size=4, replace=False)]
        _, _, history = lloyd(x, centers)
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(50, 3))
        a = kmeans(x, 4, seed=11)
        b = kmeans(x, 4, seed=11)
        assert np.array_equal(a, b)

    def test_bad_k_rejected(self):
        x = np.zeros((5, 2))
        with pytest.raises(ContractError):
            kmeans(x, 6, seed=0)
        with pytest.raises(ContractError):
            kmeans(x, 0, seed=0)


class TestClusteringAccuracy:
    def test_permutation_invariant(self):
        truth = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([2, 2, 0, 0, 1, 1])
        assert clustering_accuracy(pred, truth) == 1.0

    def test_half_agreement(self):
        assert clustering_accuracy([0, 0, 1, 1], [0, 1, 0, 1]) == 0.5

    def test_matches_brute_force_over_mappings(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            pred = rng.integers(0, 3, size=12)
            truth = rng.integers(0, 3, size=12)
            best = max(
                sum(int(m[p] == t) for p, t in zip(pred, truth))
                for m in itertools.permutations(range(3))
            ) / 12
            assert abs(clustering_accuracy(pred, truth) - best) < 1e-12

    def test_single_cluster_at_least_majority(self):
        rng = np.random.default_rng(9)
        truth = rng.integers(0, 4, size=100)
        pred = np.zeros(100, dtype=int)
        majority = np.bincount(truth).max() / 100
        assert clustering_accuracy(pred, truth) >= majority - 1e-12


class TestAgreementMetrics:
    def test_identity_labelings(self):
        y = np.array([0, 1, 2, 0, 1, 2])
        assert nmi(y, y) == pytest.approx(1.0)
        assert ari(y, y) == pytest.approx(1.0)

    def test_relabel_invariance(self):
        truth = np.array([0, 0, 1, 1, 2, 2, 0, 1])
        pred = np.array([1, 1, 2, 2, 0, 0, 1, 2])
        assert nmi(pred, truth) == pytest.approx(1.0)
        assert ari(pred, truth) == pytest.approx(1.0)

    def test_hand_counted_pair_case(self):
        # contingency [[2,1,0],[0,1,2]]: sum_ij=2, a=(C(3,2)*2)=6, b=3, total=15
        pred = np.array([0, 0, 0, 1, 1, 1])
        truth = np.array([0, 0, 1, 1, 2, 2])
        expected = 6.0 * 3.0 / 15.0
        got = ari(pred, truth)
        assert got == pytest.approx((2.0 - expected) / (0.5 * (6 + 3) - expected))

    def test_null_model_near_zero_ari(self):
        rng = np.random.default_rng(10)
        pred = rng.integers(0, 5, size=2000)
        truth = rng.integers(0, 5, size=2000)
        assert abs(ari(pred, truth)) < 0.05
        assert nmi(pred, truth) < 0.05

    def test_constant_labeling_conventions(self):
        const = np.zeros(6, dtype=int)
        varied = np.array([0, 1, 2, 0, 1, 2])
        assert nmi(const, const) == 1.0
        assert nmi(const, varied) == 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractError):
            nmi([0, 1], [0, 1, 2])


def test_evaluate_clustering_end_to_end():
    rng = np.random.default_rng(11)
    x, y = blobs(rng, k=4, per=20)
    res = evaluate_clustering(x, y, seed=0)
    assert res.acc == 1.0
    assert res.nmi == pytest.approx(1.0)
    assert res.ari == pytest.approx(1.0)
    assert len(res.assignment) == len(y)
