"""Per-class Gaussian fitting, shrinkage behavior, and replay sampling."""

import numpy as np
import pytest

from rapf.errors import ContractViolation, InsufficientDataError
from rapf.gaussian import ClassStats, fit_class, sample


def make_stats(mean, cov, class_id=0, n=2):
    cov = np.asarray(cov, dtype=np.float64)
    return ClassStats(
        class_id=class_id,
        mean=np.asarray(mean, dtype=np.float64),
        covariance=cov,
        chol_factor=np.linalg.cholesky(cov),
        sample_count=n,
    )


class TestFit:
    def test_zero_variance_gives_pure_ridge(self):
        v = np.array([0.5, 0.5, 0.5, 0.5])
        stats = fit_class(np.stack([v, v]), shrinkage=0.1)
        np.testing.assert_allclose(stats.mean, v)
        np.testing.assert_allclose(stats.covariance, 0.1 * np.eye(4), atol=1e-15)

    def test_hand_computed_covariance(self):
        # unbiased covariance of the 2x2 grid corners
        x = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
        stats = fit_class(x, shrinkage=0.0)
        np.testing.assert_allclose(stats.mean, [1.0, 1.0])
        np.testing.assert_allclose(stats.covariance, (4.0 / 3.0) * np.eye(2), atol=1e-12)

    def test_monte_carlo_recovery(self):
        # fit on draws from a known Gaussian; mean error is O(sigma/sqrt(N))
        rng = np.random.default_rng(7)
        d, n = 3, 10_000
        mu = np.array([1.0, -2.0, 0.5])
        a = rng.standard_normal((d, d))
        cov = a @ a.T + 0.5 * np.eye(d)
        chol = np.linalg.cholesky(cov)
        draws = mu + rng.standard_normal((n, d)) @ chol.T
        stats = fit_class(draws, shrinkage=1e-6)
        bound = 5.0 * np.sqrt(np.diag(cov) / n)
        assert np.all(np.abs(stats.mean - mu) < bound)

    def test_chol_reconstructs_covariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((50, 6))
        stats = fit_class(x, shrinkage=0.1)
        recon = stats.chol_factor @ stats.chol_factor.T
        rel = np.linalg.norm(recon - stats.covariance) / np.linalg.norm(stats.covariance)
        assert rel < 1e-8

    def test_shrinkage_monotonicity(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((8, 6))  # n < d: singular sample covariance
        min_eigs = [
            np.linalg.eigvalsh(fit_class(x, shrinkage=g).covariance).min()
            for g in (1e-4, 1e-2, 0.5, 2.0)
        ]
        assert all(b >= a for a, b in zip(min_eigs, min_eigs[1:]))

    def test_errors(self):
        with pytest.raises(InsufficientDataError):
            fit_class(np.ones((1, 4)), shrinkage=0.1)
        bad = np.ones((3, 4))
        bad[1, 2] = np.nan
        with pytest.raises(ContractViolation):
            fit_class(bad, shrinkage=0.1)

    def test_singular_without_shrinkage_reports_eigenvalue(self):
        from rapf.errors import NumericalError

        rng = np.random.default_rng(2)
        x = rng.standard_normal((3, 6))  # rank-2 covariance, no ridge
        with pytest.raises(NumericalError, match="eigenvalue"):
            fit_class(x, shrinkage=0.0)


class TestSample:
    def test_degenerate_spread_stays_near_mean(self):
        gamma = 1e-10
        d = 6
        stats = make_stats(np.full(d, 2.0), gamma * np.eye(d))
        draws = sample(stats, 200, rng_seed=0)
        dev = np.linalg.norm(draws - stats.mean, axis=1)
        assert np.all(dev < np.sqrt(gamma) * 10 * np.sqrt(d))

    def test_determinism(self):
        stats = make_stats([0.0, 1.0], [[2.0, 0.3], [0.3, 1.0]])
        a = sample(stats, 17, rng_seed=99)
        b = sample(stats, 17, rng_seed=99)
        np.testing.assert_array_equal(a, b)

    def test_empirical_covariance_converges(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((4, 4))
        cov = a @ a.T + 0.3 * np.eye(4)
        stats = make_stats(np.zeros(4), cov)
        draws = sample(stats, 100_000, rng_seed=21)
        emp = np.cov(draws.T, ddof=1)
        rel = np.linalg.norm(emp - cov) / np.linalg.norm(cov)
        assert rel < 0.05

    def test_count_precondition(self):
        stats = make_stats([0.0], [[1.0]])
        with pytest.raises(ContractViolation):
            sample(stats, 0, rng_seed=0)
