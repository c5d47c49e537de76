import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matstats import (
    SpdMatrix,
    digamma,
    gamma_moments,
    log_multivariate_gamma,
    multivariate_digamma,
    spd_solve_logdet,
    sym_eigen,
    wishart_moments,
)
from matstats.errors import DimensionError, DomainError, NotPositiveDefiniteError

from conftest import random_spd


class TestDigamma:
    def test_euler_mascheroni(self):
        # oracle: 50-digit series evaluation
        assert digamma(1.0) == pytest.approx(float(mpmath.digamma(1)), abs=1e-12)
        assert digamma(1.0) == pytest.approx(-0.57721566490153286, abs=1e-12)

    def test_half(self):
        # identity psi(1/2) = -gamma - 2 ln 2
        gamma = 0.57721566490153286
        assert digamma(0.5) == pytest.approx(-gamma - 2 * math.log(2), abs=1e-12)
        assert digamma(0.5) == pytest.approx(-1.9635100260214235, abs=1e-12)

    @pytest.mark.parametrize("x", [0.5, 1.0, 3.7])
    def test_recurrence_examples(self, x):
        assert digamma(x + 1) - digamma(x) == pytest.approx(1.0 / x, abs=1e-12)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(min_value=1e-2, max_value=1e3))
    def test_recurrence_property(self, x):
        assert digamma(x + 1) - digamma(x) == pytest.approx(1.0 / x, rel=0, abs=1e-12)

    def test_against_high_precision_grid(self):
        for x in [1e-3, 0.02, 0.3, 1.5, 5.999, 6.0, 17.2, 440.0, 1e5]:
            assert digamma(x) == pytest.approx(float(mpmath.digamma(x)), abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            digamma(0.0)
        with pytest.raises(DomainError):
            digamma(-1.0)


class TestMultivariateDigamma:
    def test_reduces_to_digamma(self):
        assert multivariate_digamma(2.3, 1) == pytest.approx(digamma(2.3), abs=1e-14)

    def test_definition_unrolled(self):
        assert multivariate_digamma(3.0, 2) == pytest.approx(digamma(3.0) + digamma(2.5), abs=1e-13)

    def test_is_derivative_of_log_gamma(self):
        x, d, h = 4.0, 3, 1e-5
        fd = (log_multivariate_gamma(x + h, d) - log_multivariate_gamma(x - h, d)) / (2 * h)
        assert multivariate_digamma(x, d) == pytest.approx(fd, abs=1e-6)

    def test_domain(self):
        with pytest.raises(DomainError):
            multivariate_digamma(1.0, 3)
        with pytest.raises(DomainError):
            multivariate_digamma(1.0, 0)


class TestLogMultivariateGamma:
    def test_reduces_to_lgamma(self):
        assert log_multivariate_gamma(5.0, 1) == pytest.approx(math.log(24.0), abs=1e-13)

    def test_d2_definition(self):
        expected = 0.5 * math.log(math.pi) + math.lgamma(1.5) + math.lgamma(1.0)
        assert log_multivariate_gamma(1.5, 2) == pytest.approx(expected, abs=1e-13)

    def test_product_oracle(self):
        # direct product of shifted Gamma values at 50 digits
        x, d = 6.0, 4
        with mpmath.workdps(50):
            prod = mpmath.pi ** (d * (d - 1) / 4.0)
            for i in range(1, d + 1):
                prod *= mpmath.gamma(x + (1 - i) / 2.0)
            expected = float(mpmath.log(prod))
        assert log_multivariate_gamma(x, d) == pytest.approx(expected, abs=1e-11)


class TestGammaMoments:
    def test_unit_mean(self):
        for nu in (0.3, 1.0, 7.5):
            mean, _ = gamma_moments(nu / 2, nu / 2)
            assert mean == pytest.approx(1.0, abs=0)

    def test_mean(self):
        assert gamma_moments(3.0, 2.0)[0] == pytest.approx(1.5)

    def test_mean_log_via_recurrence(self):
        # psi(4) = 1 + 1/2 + 1/3 - gamma
        gamma = 0.57721566490153286
        _, mean_log = gamma_moments(4.0, 1.0)
        assert mean_log == pytest.approx(1 + 0.5 + 1 / 3 - gamma, abs=1e-12)

    def test_monte_carlo(self):
        rng = np.random.default_rng(5)
        alpha, beta = 2.5, 1.7
        draws = rng.gamma(alpha, 1 / beta, size=200_000)
        mean, mean_log = gamma_moments(alpha, beta)
        assert mean == pytest.approx(draws.mean(), abs=3 * draws.std() / math.sqrt(draws.size))
        logs = np.log(draws)
        assert mean_log == pytest.approx(logs.mean(), abs=3 * logs.std() / math.sqrt(draws.size))

    def test_domain(self):
        with pytest.raises(DomainError):
            gamma_moments(-1.0, 2.0)
        with pytest.raises(DomainError):
            gamma_moments(1.0, 0.0)


class TestWishartMoments:
    def test_scalar_multiple(self):
        mean, _ = wishart_moments(np.eye(2), 5.0)
        np.testing.assert_allclose(mean, 5 * np.eye(2))

    def test_dim1_matches_chi_square(self):
        # W_1(sigma^2, nu) is sigma^2 * chi^2_nu
        sigma2, nu = 2.3, 7.0
        rng = np.random.default_rng(11)
        draws = sigma2 * rng.chisquare(nu, size=200_000)
        _, mean_logdet = wishart_moments(np.array([[sigma2]]), nu)
        logs = np.log(draws)
        assert mean_logdet == pytest.approx(logs.mean(), abs=3 * logs.std() / math.sqrt(logs.size))

    def test_monte_carlo_mean(self):
        from scipy.stats import wishart

        rng = np.random.default_rng(3)
        psi = random_spd(rng, 3)
        nu = 9.0
        draws = wishart.rvs(df=nu, scale=psi, size=100_000, random_state=rng)
        mean, mean_logdet = wishart_moments(psi, nu)
        se = draws.std(axis=0) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(mean - draws.mean(axis=0)) <= 3 * se + 1e-12)
        logdets = np.linalg.slogdet(draws)[1]
        assert mean_logdet == pytest.approx(logdets.mean(), abs=3 * logdets.std() / math.sqrt(logdets.size))

    def test_domain(self):
        with pytest.raises(DomainError):
            wishart_moments(np.eye(3), 1.5)


class TestSpdSolveLogdet:
    def test_identity(self, rng):
        b = rng.standard_normal((4, 2))
        x, logdet = spd_solve_logdet(np.eye(4), b)
        np.testing.assert_allclose(x, b)
        assert logdet == pytest.approx(0.0, abs=1e-14)

    def test_diagonal(self):
        _, logdet = spd_solve_logdet(np.diag([2.0, 8.0]), np.eye(2))
        assert logdet == pytest.approx(math.log(16.0), rel=1e-12)

    def test_residual(self, rng):
        a = random_spd(rng, 5)
        b = rng.standard_normal((5, 3))
        x, logdet = spd_solve_logdet(a, b)
        assert np.linalg.norm(a @ x - b) < 1e-10
        assert logdet == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-10)

    def test_inverse_roundtrip(self, rng):
        a = random_spd(rng, 8, lo=1e-4, hi=1e3)
        x, _ = spd_solve_logdet(a, np.eye(8))
        assert np.linalg.norm(a @ x - np.eye(8)) < 1e-9

    def test_not_positive_definite_pivot(self):
        a = np.diag([1.0, -1.0, 2.0])
        with pytest.raises(NotPositiveDefiniteError) as exc:
            spd_solve_logdet(a, np.eye(3))
        assert exc.value.pivot == 2


class TestSymEigen:
    def test_diagonal(self):
        eig = sym_eigen(np.diag([4.0, 1.0]))
        np.testing.assert_allclose(eig.values, [4.0, 1.0])
        np.testing.assert_allclose(np.abs(eig.vectors), np.eye(2), atol=1e-14)
        assert eig.vectors[0, 0] > 0 and eig.vectors[1, 1] > 0

    def test_tie_break_by_index(self):
        eig = sym_eigen(np.eye(3))
        np.testing.assert_allclose(eig.values, np.ones(3))
        np.testing.assert_allclose(eig.vectors, np.eye(3))

    def test_reconstruction(self, rng):
        a = random_spd(rng, 6)
        eig = sym_eigen(a)
        rec = (eig.vectors * eig.values) @ eig.vectors.T
        assert np.linalg.norm(rec - a) / np.linalg.norm(a) < 1e-8

    def test_orthonormal_and_descending_large(self, rng):
        a = random_spd(rng, 100)
        eig = sym_eigen(a)
        assert np.all(np.diff(eig.values) <= 1e-12)
        assert np.linalg.norm(eig.vectors.T @ eig.vectors - np.eye(100)) < 1e-10
        rec = (eig.vectors * eig.values) @ eig.vectors.T
        assert np.linalg.norm(rec - a) / np.linalg.norm(a) < 1e-8

    def test_sign_convention(self, rng):
        a = random_spd(rng, 5)
        eig = sym_eigen(a)
        for k in range(5):
            v = eig.vectors[:, k]
            assert v[np.abs(v).argmax()] > 0

    def test_rejects_non_symmetric(self, rng):
        with pytest.raises(DomainError):
            sym_eigen(rng.standard_normal((4, 4)))


class TestSpdMatrix:
    def test_symmetrizes_drift(self, rng):
        a = random_spd(rng, 4)
        drift = a + 1e-14 * np.triu(np.ones((4, 4)), 1)
        spd = SpdMatrix(drift)
        np.testing.assert_allclose(spd.values, spd.values.T)

    def test_rejects_asymmetry(self, rng):
        a = random_spd(rng, 4)
        with pytest.raises(DomainError):
            SpdMatrix(a + 1e-6 * np.triu(np.ones((4, 4)), 1))

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefiniteError):
            SpdMatrix(np.diag([1.0, 0.0]))

    def test_rejects_non_square(self, rng):
        with pytest.raises(DimensionError):
            SpdMatrix(rng.standard_normal((3, 4)))

    def test_logdet_and_solve(self, rng):
        a = random_spd(rng, 5)
        spd = SpdMatrix(a)
        assert spd.logdet == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-10)
        b = rng.standard_normal(5)
        np.testing.assert_allclose(a @ spd.solve(b), b, atol=1e-10)
