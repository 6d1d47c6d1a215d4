"""Gaussian estimation, PSD square roots and the Frechet distance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvpseudo.errors import (
    DimensionMismatch,
    InsufficientSamples,
    InvalidData,
    NotPositiveSemiDefinite,
    NotSymmetric,
    NumericalFailure,
)
from mvpseudo.gaussian import EmbeddingSet, GaussianSummary, estimate_gaussian, frechet_distance, sqrt_psd


def _random_spd(rng, d, cond=None):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    if cond is None:
        w = rng.uniform(0.1, 5.0, size=d)
    else:
        w = np.logspace(0, -np.log10(cond), d)
    return (q * w) @ q.T


def _brute_covariance(x):
    n, d = x.shape
    mean = [sum(x[i, j] for i in range(n)) / n for j in range(d)]
    cov = np.zeros((d, d))
    for i in range(n):
        dev = [x[i, j] - mean[j] for j in range(d)]
        for a in range(d):
            for b in range(d):
                cov[a, b] += dev[a] * dev[b]
    return np.array(mean), cov / (n - 1)


def _nonsymmetric_oracle(mu_a, cov_a, mu_b, cov_b):
    # tr sqrt(A B) from the eigenvalues of the (non-symmetric) product
    lam = np.linalg.eigvals(cov_a @ cov_b)
    cross = np.sum(np.sqrt(np.clip(lam.real, 0.0, None)))
    diff = mu_a - mu_b
    return diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * cross


class TestEmbeddingSet:
    def test_single_vector_promoted_to_row(self):
        s = EmbeddingSet(np.array([1.0, 2.0]))
        assert s.n == 1 and s.dim == 2

    @pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(InvalidData):
            EmbeddingSet(np.array([[0.0, bad]]))

    def test_empty_rejected(self):
        with pytest.raises(InvalidData):
            EmbeddingSet(np.zeros((0, 3)))

    def test_vectors_are_read_only_copies(self):
        raw = np.zeros((2, 2))
        s = EmbeddingSet(raw)
        raw[0, 0] = 5.0
        assert s.vectors[0, 0] == 0.0
        with pytest.raises(ValueError):
            s.vectors[0, 0] = 1.0

    def test_concat_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            EmbeddingSet.concat([EmbeddingSet(np.zeros((2, 2))), EmbeddingSet(np.zeros((2, 3)))])


class TestEstimateGaussian:
    def test_two_point_example(self):
        g = estimate_gaussian(np.array([[0.0, 0.0], [2.0, 2.0]]), ridge=0.0)
        np.testing.assert_array_equal(g.mean, [1.0, 1.0])
        np.testing.assert_array_equal(g.covariance, [[2.0, 2.0], [2.0, 2.0]])

    def test_constant_rows_plus_ridge(self):
        g = estimate_gaussian(np.full((3, 2), 5.0), ridge=0.1)
        np.testing.assert_array_equal(g.mean, [5.0, 5.0])
        np.testing.assert_allclose(g.covariance, 0.1 * np.eye(2), atol=1e-15)

    def test_matches_brute_force_double_loop(self):
        x = np.random.default_rng(7).normal(size=(50, 4))
        g = estimate_gaussian(x, ridge=0.0)
        mean, cov = _brute_covariance(x)
        np.testing.assert_allclose(g.mean, mean, atol=1e-10)
        np.testing.assert_allclose(g.covariance, cov, atol=1e-10)
        assert g.sample_count == 50

    def test_needs_two_rows(self):
        with pytest.raises(InsufficientSamples):
            estimate_gaussian(np.ones((1, 3)))

    def test_negative_ridge(self):
        with pytest.raises(InvalidData):
            estimate_gaussian(np.eye(3), ridge=-1.0)

    def test_summary_is_symmetrized(self):
        g = GaussianSummary(np.zeros(2), [[1.0, 0.2], [0.0, 1.0]])
        np.testing.assert_array_equal(g.covariance, g.covariance.T)


class TestSqrtPsd:
    def test_identity(self):
        np.testing.assert_allclose(sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)

    def test_diagonal(self):
        np.testing.assert_allclose(sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)

    def test_multiply_back_5x5(self):
        b = np.random.default_rng(3).normal(size=(5, 5))
        a = b.T @ b
        r = sqrt_psd(a)
        assert np.linalg.norm(r @ r - a) <= 1e-8
        np.testing.assert_allclose(r, r.T, atol=0)

    def test_rank_deficient_round_off_clamped(self):
        v = np.random.default_rng(1).normal(size=(4, 1))
        r = sqrt_psd(v @ v.T)
        assert np.all(np.isfinite(r))
        assert np.linalg.norm(r @ r - v @ v.T) <= 1e-8

    def test_negative_eigenvalue_raises(self):
        with pytest.raises(NotPositiveSemiDefinite):
            sqrt_psd(np.diag([1.0, -1e-3]))

    def test_asymmetric_raises(self):
        with pytest.raises(NotSymmetric):
            sqrt_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_non_square_raises(self):
        with pytest.raises(DimensionMismatch):
            sqrt_psd(np.ones((2, 3)))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1), st.floats(1.0, 1e6))
    def test_reconstruction_property(self, d, seed, cond):
        a = _random_spd(np.random.default_rng(seed), d, cond)
        r = sqrt_psd(a)
        assert np.linalg.norm(r @ r - a) <= 1e-8


class TestFrechetDistance:
    def test_identical(self):
        g = GaussianSummary(np.array([1.0, -2.0]), np.diag([2.0, 3.0]))
        assert frechet_distance(g, g) <= 1e-9

    def test_scalar_closed_form(self):
        d = frechet_distance(GaussianSummary([0.0], [[1.0]]), GaussianSummary([1.0], [[4.0]]))
        assert d == pytest.approx(2.0, abs=1e-12)

    def test_diagonal_closed_form(self):
        d = frechet_distance(
            GaussianSummary([0.0, 0.0], np.diag([1.0, 4.0])),
            GaussianSummary([3.0, 0.0], np.diag([1.0, 1.0])),
        )
        assert d == pytest.approx(10.0, abs=1e-12)

    def test_random_6d_against_nonsymmetric_eigen_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            mu_a, mu_b = rng.normal(size=6), rng.normal(size=6)
            a, b = _random_spd(rng, 6), _random_spd(rng, 6)
            got = frechet_distance(GaussianSummary(mu_a, a), GaussianSummary(mu_b, b))
            assert got == pytest.approx(_nonsymmetric_oracle(mu_a, a, mu_b, b), abs=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            frechet_distance(GaussianSummary(np.zeros(2), np.eye(2)), GaussianSummary(np.zeros(3), np.eye(3)))

    def test_large_negative_residual_is_an_error(self, monkeypatch):
        import mvpseudo.gaussian as gaussian

        real = gaussian.sqrt_psd
        # inflate the cross term so the residual goes clearly negative
        monkeypatch.setattr(gaussian, "sqrt_psd", lambda m: 2.0 * real(m))
        g = GaussianSummary(np.zeros(2), np.eye(2))
        with pytest.raises(NumericalFailure):
            frechet_distance(g, GaussianSummary(np.zeros(2), np.eye(2)))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_symmetric_non_negative_translation_invariant(self, d, seed):
        rng = np.random.default_rng(seed)
        a = GaussianSummary(rng.normal(size=d), _random_spd(rng, d))
        b = GaussianSummary(rng.normal(size=d), _random_spd(rng, d))
        ab, ba = frechet_distance(a, b), frechet_distance(b, a)
        assert ab >= 0.0
        assert abs(ab - ba) <= 1e-8
        shift = rng.normal(size=d) * 10
        moved = frechet_distance(
            GaussianSummary(a.mean + shift, a.covariance), GaussianSummary(b.mean + shift, b.covariance)
        )
        assert abs(moved - ab) <= 1e-8

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_diagonal_property(self, d, seed):
        rng = np.random.default_rng(seed)
        sa, sb = rng.uniform(0.01, 9.0, d), rng.uniform(0.01, 9.0, d)
        ma, mb = rng.normal(size=d), rng.normal(size=d)
        want = np.sum((ma - mb) ** 2) + np.sum((np.sqrt(sa) - np.sqrt(sb)) ** 2)
        got = frechet_distance(GaussianSummary(ma, np.diag(sa)), GaussianSummary(mb, np.diag(sb)))
        assert got == pytest.approx(want, abs=1e-8)
