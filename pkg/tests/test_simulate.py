"""Tests for the data generator and the built-in benchmark matrices."""

import numpy as np
import pytest
from scipy.stats import norm

from dinaq.model import ideal_table
from dinaq.simulate import (
    SimConfig,
    builtin_names,
    builtin_true_q,
    gen_attributes,
    gen_responses,
    generate,
    mastery_thresholds,
)


class TestBuiltinMatrices:
    def test_names(self):
        assert builtin_names() == ["appendix-a1", "table2-k4", "table2-k5"]

    def test_k4_shape_and_rows(self):
        q = builtin_true_q("table2-k4")
        assert q.entries.shape == (15, 4)
        np.testing.assert_array_equal(q.entries[0], [1, 0, 0, 0])
        np.testing.assert_array_equal(q.entries[14], [1, 1, 1, 1])

    def test_k4_is_complete(self):
        # contains a single-attribute row for every attribute
        q = builtin_true_q("table2-k4").entries
        singles = q[q.sum(axis=1) == 1]
        assert {tuple(r) for r in singles} == {
            (1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)}

    def test_k5_shape_and_rows(self):
        q = builtin_true_q("table2-k5")
        assert q.entries.shape == (15, 5)
        np.testing.assert_array_equal(q.entries[0], [0, 1, 0, 1, 0])

    def test_k5_is_incomplete(self):
        q = builtin_true_q("table2-k5").entries
        assert (q.sum(axis=1) >= 2).all()

    def test_a1_identity_stacking(self):
        q = builtin_true_q("appendix-a1")
        assert q.entries.shape == (60, 8)
        np.testing.assert_array_equal(q.entries[:8], np.eye(8, dtype=np.uint8))
        np.testing.assert_array_equal(q.entries[8:16], np.eye(8, dtype=np.uint8))

    def test_a1_attribute_mix(self):
        counts = builtin_true_q("appendix-a1").entries.sum(axis=1)
        assert (counts[16:38] == 2).all() and (counts[38:] == 3).all()

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown built-in"):
            builtin_true_q("table9")


class TestThresholds:
    def test_quantile_values(self):
        thr = mastery_thresholds(4)
        expected = norm.ppf(np.arange(1, 5) / 5)
        np.testing.assert_allclose(thr, expected, atol=1e-10)
        assert thr[0] == pytest.approx(-0.8416, abs=5e-5)


class TestGenAttributes:
    def test_marginals_match_quantile_construction(self):
        rng = np.random.default_rng(0)
        alpha, _ = gen_attributes(200_000, 4, 0.1, rng)
        np.testing.assert_allclose(alpha.mean(axis=0),
                                   [0.8, 0.6, 0.4, 0.2], atol=0.01)

    def test_independent_latents_when_rho_zero(self):
        rng = np.random.default_rng(1)
        _, latent = gen_attributes(200_000, 3, 0.0, rng)
        corr = np.corrcoef(latent.T)
        off = corr[~np.eye(3, dtype=bool)]
        np.testing.assert_allclose(off, 0.0, atol=0.01)

    def test_latent_correlation_matches_rho(self):
        rng = np.random.default_rng(2)
        _, latent = gen_attributes(200_000, 2, 0.5, rng)
        corr = np.corrcoef(latent.T)[0, 1]
        assert corr == pytest.approx(0.5, abs=0.01)

    def test_k1_allows_any_rho_in_range(self):
        alpha, _ = gen_attributes(100, 1, 0.0, np.random.default_rng(3))
        assert alpha.shape == (100, 1)


class TestGenResponses:
    def test_noiseless_equals_ideal(self):
        rng = np.random.default_rng(4)
        q = builtin_true_q("table2-k4")
        alpha, _ = gen_attributes(200, 4, 0.1, rng)
        x = gen_responses(alpha, q, 0.0, 0.0, rng)
        np.testing.assert_array_equal(x.entries, ideal_table(alpha, q.entries))

    def test_correct_rate_under_mastery(self):
        rng = np.random.default_rng(5)
        alpha = np.ones((100_000, 1), dtype=np.uint8)
        from dinaq.model import QMatrix

        x = gen_responses(alpha, QMatrix([[1]]), 0.2, 0.2, rng)
        assert x.entries.mean() == pytest.approx(0.8, abs=0.01)

    def test_bit_reproducible(self):
        q = builtin_true_q("table2-k4")
        a = generate(SimConfig(true_q=q, n_respondents=50, seed=77))
        b = generate(SimConfig(true_q=q, n_respondents=50, seed=77))
        np.testing.assert_array_equal(a.responses.entries, b.responses.entries)
        np.testing.assert_array_equal(a.attributes, b.attributes)
        np.testing.assert_array_equal(a.latent, b.latent)

    def test_different_seeds_differ(self):
        q = builtin_true_q("table2-k4")
        a = generate(SimConfig(true_q=q, n_respondents=200, seed=1))
        b = generate(SimConfig(true_q=q, n_respondents=200, seed=2))
        assert (a.responses.entries != b.responses.entries).any()


class TestSimConfig:
    def test_rho_bounds(self):
        q = builtin_true_q("table2-k4")
        with pytest.raises(ValueError, match="rho"):
            SimConfig(true_q=q, n_respondents=10, rho=1.5)
        with pytest.raises(ValueError, match="rho"):
            SimConfig(true_q=q, n_respondents=10, rho=-0.2)

    def test_probability_bounds(self):
        q = builtin_true_q("table2-k4")
        with pytest.raises(ValueError, match="slip"):
            SimConfig(true_q=q, n_respondents=10, slip=0.0)
        with pytest.raises(ValueError, match="guess"):
            SimConfig(true_q=q, n_respondents=10, guess=1.0)

    def test_sample_size(self):
        with pytest.raises(ValueError, match="n_respondents"):
            SimConfig(true_q=builtin_true_q("table2-k4"), n_respondents=0)

    def test_per_item_vectors_accepted(self):
        q = builtin_true_q("table2-k4")
        slip = np.full(15, 0.1)
        data = generate(SimConfig(true_q=q, n_respondents=20, slip=slip, seed=0))
        assert data.responses.n_items == 15
