"""Tests for the exact GP regression reference implementation."""

import numpy as np
import pytest

from sgpbench import exact_gpr, kernels
from sgpbench.kernels import KernelSpec

from oracles import (
    central_difference,
    dense_gpr_predict,
    mvn_logpdf,
    random_problem,
)

ALL_FAMILIES = list(kernels.FAMILIES)


class TestLml:
    def test_single_point_unit_prior(self):
        """N=1, y=0, k(x,x)=1, noise 1: value is -log(2 pi)/2 - log(2)/2."""
        spec = KernelSpec("se", 1.0, lengthscales=[1.0])
        value = exact_gpr.lml(np.zeros((1, 1)), np.zeros(1), spec, 1.0)
        assert value == pytest.approx(-0.5 * np.log(2 * np.pi) - 0.5 * np.log(2.0))
        assert value == pytest.approx(-1.26551, abs=1e-5)

    def test_zero_targets_leave_only_volume_terms(self):
        rng = np.random.default_rng(0)
        spec, noise, x, _ = random_problem(rng, 12, 2)
        y = np.zeros(12)
        cov = kernels.gram(spec, x) + noise * np.eye(12)
        expected = -0.5 * 12 * np.log(2 * np.pi) - 0.5 * np.linalg.slogdet(cov)[1]
        assert exact_gpr.lml(x, y, spec, noise) == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_matches_multivariate_normal_oracle(self, family):
        rng = np.random.default_rng(1)
        for _ in range(5):
            n = int(rng.integers(2, 51))
            spec, noise, x, y = random_problem(rng, n, 2, family)
            cov = kernels.gram(spec, x) + noise * np.eye(n)
            assert exact_gpr.lml(x, y, spec, noise) == pytest.approx(
                mvn_logpdf(y, cov), abs=1e-8, rel=1e-8
            )

    def test_permutation_invariance(self):
        rng = np.random.default_rng(2)
        spec, noise, x, y = random_problem(rng, 25, 3)
        base = exact_gpr.lml(x, y, spec, noise)
        perm = rng.permutation(25)
        assert exact_gpr.lml(x[perm], y[perm], spec, noise) == pytest.approx(
            base, abs=1e-8
        )


class TestLmlGradient:
    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_matches_finite_differences(self, family):
        rng = np.random.default_rng(3)
        spec, noise, x, y = random_problem(rng, 20, 2, family)
        values = kernels.pack(spec, noise)

        def objective(u):
            spec_u, noise_u = kernels.unpack(u, family, 2)
            return exact_gpr.lml(x, y, spec_u, noise_u)

        fd = central_difference(objective, values)
        grad = exact_gpr.lml_gradient(x, y, values, family)
        scale = max(np.max(np.abs(fd)), np.max(np.abs(grad)), 1e-8)
        assert np.max(np.abs(fd - grad)) / scale < 1e-4

    def test_noise_gradient_negative_for_zero_targets(self):
        """With y = 0 the data-fit term vanishes and the noise derivative is
        -tr((K + s I)^-1)/2 < 0."""
        rng = np.random.default_rng(4)
        spec, noise, x, _ = random_problem(rng, 15, 2)
        values = kernels.pack(spec, noise)
        grad = exact_gpr.lml_gradient(x, np.zeros(15), values, "se")
        assert grad[-1] < 0.0


class TestGprPredict:
    def test_interpolates_at_small_noise(self):
        rng = np.random.default_rng(5)
        x = rng.uniform(-2, 2, size=(20, 1))
        y = np.sin(x[:, 0])
        spec = KernelSpec("se", 1.0, lengthscales=[1.0])
        posterior = exact_gpr.fit_posterior(x, y, spec, 1e-5)
        mean, _, _ = exact_gpr.gpr_predict(posterior, x)
        np.testing.assert_allclose(mean, y, atol=1e-3)

    def test_empty_query(self):
        rng = np.random.default_rng(6)
        spec, noise, x, y = random_problem(rng, 5, 2)
        posterior = exact_gpr.fit_posterior(x, y, spec, noise)
        mean, lat, obs = exact_gpr.gpr_predict(posterior, np.zeros((0, 2)))
        assert mean.shape == lat.shape == obs.shape == (0,)

    def test_far_from_data_reverts_to_prior(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-1, 1, size=(30, 1))
        y = rng.standard_normal(30)
        spec = KernelSpec("se", 1.7, lengthscales=[1.0])
        posterior = exact_gpr.fit_posterior(x, y, spec, 0.1)
        mean, lat, obs = exact_gpr.gpr_predict(posterior, np.array([[100.0]]))
        assert mean[0] == pytest.approx(0.0, abs=1e-6)
        assert lat[0] == pytest.approx(1.7, abs=1e-6)
        assert obs[0] == pytest.approx(1.8, abs=1e-6)

    @pytest.mark.parametrize("family", ALL_FAMILIES)
    def test_matches_dense_oracle(self, family):
        rng = np.random.default_rng(8)
        spec, noise, x, y = random_problem(rng, 25, 2, family)
        x_star = rng.standard_normal((7, 2))
        posterior = exact_gpr.fit_posterior(x, y, spec, noise)
        mean, lat, _ = exact_gpr.gpr_predict(posterior, x_star)
        mean_o, var_o = dense_gpr_predict(spec, noise, x, y, x_star)
        np.testing.assert_allclose(mean, mean_o, atol=1e-8)
        np.testing.assert_allclose(lat, var_o, atol=1e-8)

    def test_posterior_contraction(self):
        rng = np.random.default_rng(9)
        for family in ("se", "matern32", "arccos1"):
            spec, noise, x, y = random_problem(rng, 20, 2, family)
            posterior = exact_gpr.fit_posterior(x, y, spec, noise)
            x_star = rng.standard_normal((10, 2))
            _, lat, _ = exact_gpr.gpr_predict(posterior, x_star)
            prior = kernels.gram_diag(spec, x_star)
            assert np.all(lat <= prior + 1e-10)

    def test_reconstruction_invariant(self):
        rng = np.random.default_rng(10)
        for n in (1, 17, 200):
            spec, noise, x, y = random_problem(rng, n, 2)
            posterior = exact_gpr.fit_posterior(x, y, spec, noise)
            cov = kernels.gram(spec, x) + (
                noise + posterior.chol.jitter_used
            ) * np.eye(n)
            np.testing.assert_allclose(
                cov @ posterior.alpha, y, rtol=1e-6, atol=1e-6 * max(1, np.abs(y).max())
            )
