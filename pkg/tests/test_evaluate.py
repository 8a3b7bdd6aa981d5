"""Tests for recovery scoring and column alignment."""

import itertools

import numpy as np
import pytest

from dinaq.evaluate import (
    align_columns,
    align_columns_greedy,
    mean_recovery,
    negative_elbo_fit,
    recovery_rate,
)
from dinaq.model import CapacityError, QMatrix
from dinaq.simulate import SimConfig, builtin_true_q, generate


def brute_force_best_rate(q_hat, reference):
    """Independent scorer over every column permutation."""
    k = q_hat.n_attributes
    best = -1.0
    for perm in itertools.permutations(range(k)):
        rate = recovery_rate(QMatrix(q_hat.entries[:, perm]), reference)
        best = max(best, rate)
    return best


class TestRecoveryRate:
    def test_identical(self):
        q = builtin_true_q("table2-k4")
        assert recovery_rate(q, q) == 1.0

    def test_single_flip(self):
        q = builtin_true_q("table2-k4")
        flipped = q.entries.copy()
        flipped[0, 0] = 1 - flipped[0, 0]
        assert recovery_rate(QMatrix(flipped), q) == pytest.approx(1 - 1 / 60)

    def test_complement(self):
        q = builtin_true_q("table2-k4")
        assert recovery_rate(QMatrix(1 - q.entries), q) == 0.0

    def test_symmetry(self):
        rng = np.random.default_rng(0)
        a = QMatrix(rng.integers(0, 2, (8, 3)).astype(np.uint8))
        b = QMatrix(rng.integers(0, 2, (8, 3)).astype(np.uint8))
        assert recovery_rate(a, b) == recovery_rate(b, a)

    def test_shared_permutation_invariance(self):
        rng = np.random.default_rng(1)
        a = QMatrix(rng.integers(0, 2, (8, 4)).astype(np.uint8))
        b = QMatrix(rng.integers(0, 2, (8, 4)).astype(np.uint8))
        perm = rng.permutation(4)
        assert recovery_rate(QMatrix(a.entries[:, perm]),
                             QMatrix(b.entries[:, perm])) == recovery_rate(a, b)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            recovery_rate(QMatrix([[1, 0]]), QMatrix([[1, 0, 1]]))


class TestAlignColumns:
    def test_recovers_column_swap(self):
        ref = QMatrix([[1, 0], [0, 1], [1, 1], [1, 0]])
        swapped = QMatrix(ref.entries[:, [1, 0]])
        aligned, perm = align_columns(swapped, ref)
        np.testing.assert_array_equal(aligned.entries, ref.entries)
        assert perm == (1, 0)

    def test_identity_when_already_aligned(self):
        ref = builtin_true_q("table2-k4")
        aligned, perm = align_columns(ref, ref)
        assert perm == (0, 1, 2, 3)
        np.testing.assert_array_equal(aligned.entries, ref.entries)

    def test_matches_brute_force_scorer(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            q_hat = QMatrix(rng.integers(0, 2, (15, 4)).astype(np.uint8))
            ref = QMatrix(rng.integers(0, 2, (15, 4)).astype(np.uint8))
            aligned, _ = align_columns(q_hat, ref)
            assert recovery_rate(aligned, ref) == pytest.approx(
                brute_force_best_rate(q_hat, ref))

    def test_alignment_never_hurts(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            q_hat = QMatrix(rng.integers(0, 2, (10, 3)).astype(np.uint8))
            ref = QMatrix(rng.integers(0, 2, (10, 3)).astype(np.uint8))
            aligned, _ = align_columns(q_hat, ref)
            assert recovery_rate(aligned, ref) >= recovery_rate(q_hat, ref)

    def test_tie_breaks_lexicographically(self):
        # an all-zero estimate scores identically under every permutation
        q_hat = QMatrix(np.zeros((4, 3), dtype=np.uint8))
        ref = QMatrix(np.eye(3, 4, dtype=np.uint8).T)
        _, perm = align_columns(q_hat, ref)
        assert perm == (0, 1, 2)

    def test_capacity_guard(self):
        q = QMatrix(np.ones((2, 11), dtype=np.uint8))
        with pytest.raises(CapacityError, match="provisional"):
            align_columns(q, q)

    def test_greedy_agrees_on_small_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            q_hat = QMatrix(rng.integers(0, 2, (12, 4)).astype(np.uint8))
            ref = QMatrix(rng.integers(0, 2, (12, 4)).astype(np.uint8))
            exact, _ = align_columns(q_hat, ref)
            greedy, _ = align_columns_greedy(q_hat, ref)
            assert recovery_rate(greedy, ref) == pytest.approx(
                recovery_rate(exact, ref))


class TestMeanRecovery:
    def test_average_of_two(self):
        truth = builtin_true_q("table2-k4")
        flipped = truth.entries.copy()
        flipped[:3, 0] = 1 - flipped[:3, 0]
        flipped[:3, 1] = 1 - flipped[:3, 1]  # 6 flips -> rate 0.9
        report = mean_recovery([truth, QMatrix(flipped)], truth, align=False)
        np.testing.assert_allclose(report.rates, [1.0, 0.9])
        assert report.mrr == pytest.approx(0.95)

    def test_all_identical(self):
        truth = builtin_true_q("table2-k5")
        report = mean_recovery([truth, truth, truth], truth)
        assert report.mrr == 1.0

    def test_alignment_applied_per_dataset(self):
        truth = builtin_true_q("table2-k4")
        swapped = QMatrix(truth.entries[:, [1, 0, 2, 3]])
        report = mean_recovery([swapped], truth, align=True)
        assert report.mrr == 1.0
        assert report.permutations[0] == (1, 0, 2, 3)


@pytest.fixture(scope="module")
def fit_dataset():
    q_true = builtin_true_q("table2-k4")
    data = generate(SimConfig(true_q=q_true, n_respondents=400, rho=0.1, seed=21))
    return data.responses, q_true


class TestNegativeElboFit:
    def test_identical_q_identical_value(self, fit_dataset):
        x, q = fit_dataset
        a = negative_elbo_fit(x, q, seed=3)
        b = negative_elbo_fit(x, QMatrix(q.entries.copy()), seed=3)
        assert a == b

    def test_true_q_beats_corrupted(self, fit_dataset):
        x, q = fit_dataset
        rng = np.random.default_rng(5)
        corrupted = q.entries.copy()
        flip = rng.random(corrupted.shape) < 0.2
        corrupted = np.where(flip, 1 - corrupted, corrupted).astype(np.uint8)
        corrupted[corrupted.sum(axis=1) == 0, 0] = 1
        assert negative_elbo_fit(x, q) < negative_elbo_fit(x, QMatrix(corrupted))

    def test_more_restarts_never_worse(self, fit_dataset):
        x, q = fit_dataset
        assert (negative_elbo_fit(x, q, restarts=5, seed=1)
                <= negative_elbo_fit(x, q, restarts=1, seed=1) + 1e-9)

    def test_column_permutation_invariance(self, fit_dataset):
        x, q = fit_dataset
        permuted = QMatrix(q.entries[:, [2, 0, 3, 1]])
        a = negative_elbo_fit(x, q, seed=2)
        b = negative_elbo_fit(x, permuted, seed=2)
        assert b == pytest.approx(a, rel=1e-4)

    def test_restarts_validated(self, fit_dataset):
        x, q = fit_dataset
        with pytest.raises(ValueError, match="restarts"):
            negative_elbo_fit(x, q, restarts=0)
