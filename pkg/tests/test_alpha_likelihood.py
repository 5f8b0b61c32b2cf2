"""Objective values, derivatives, and the population functional."""

from __future__ import annotations

import math

import numpy as np
import pytest

from dpdbayes import (
    Contaminated,
    Dataset,
    InModel,
    LinearKnownSigma,
    Logistic,
    alpha_likelihood,
    alpha_likelihood_batch,
    alpha_likelihood_functional,
    alpha_likelihood_functional_batch,
    dpd_loss,
)

INV_SQRT_2PI = (2.0 * math.pi) ** -0.5


class TestObjectiveValue:
    def test_frozen_linear_example(self):
        # sigma=1, n=1, z=1, beta=0, x=0, a=1.  The raw value keeps the -1/a
        # constant of the definition; the scaled-constant variant of the
        # family-specific closed form differs by exactly n(c - 1)/a with
        # c = (2 pi)^{-a/2} sigma^{-a}.
        model = LinearKnownSigma(np.array([[1.0]]), 1.0)
        data = Dataset([0.0], [[1.0]])
        value = alpha_likelihood(model, data, [0.0], 1.0).value
        c = INV_SQRT_2PI
        assert value == pytest.approx(c - 0.5 * c * 2**-0.5 - 1.0, abs=1e-12)
        assert value == pytest.approx(-0.7421051154855064, abs=1e-12)
        scaled_constant_variant = c * (1.0 - 2.0**-1.5 - 1.0)
        assert scaled_constant_variant == pytest.approx(-0.1410473958869391, abs=1e-12)
        assert value - scaled_constant_variant == pytest.approx(c - 1.0, abs=1e-12)

    def test_frozen_logistic_example(self):
        # z=0 makes the success probability 1/2 for any beta.
        model = Logistic(np.array([[0.0]]))
        data = Dataset([1.0], [[0.0]])
        for beta in [-1.0, 0.0, 2.5]:
            value = alpha_likelihood(model, data, [beta], 1.0).value
            assert value == pytest.approx(-0.75, abs=1e-14)

    def test_small_alpha_approaches_loglikelihood_minus_n(self):
        # The gap scales like alpha * n, so the stated 1e-4 bound is a
        # desk-scale statement; checked here at n = 12.
        gen = np.random.default_rng(41)
        design = np.column_stack([np.ones(12), gen.standard_normal(12)])
        model = LinearKnownSigma(design, 1.0)
        beta = np.array([5.0, 2.0])
        data = Dataset(model.sample_responses(beta, gen), design)
        loglik = float(np.sum(model.log_density_terms(data.responses, beta)))
        near = alpha_likelihood(model, data, beta, 1e-6).value
        exact = alpha_likelihood(model, data, beta, 0.0).value
        assert exact == pytest.approx(loglik - model.n, abs=1e-12)
        assert abs(near - (loglik - model.n)) < 1e-4
        tinier = alpha_likelihood(model, data, beta, 1e-8).value
        assert abs(tinier - (loglik - model.n)) < 1e-6

    def test_loss_sum_identity_up_to_constant(self, linear_problem):
        # Q + n/a = -(1/(1+a)) sum_i V_i exactly.
        model, data, beta = linear_problem
        gen = np.random.default_rng(5)
        for _ in range(5):
            theta = beta + 0.3 * gen.standard_normal(2)
            alpha = float(gen.uniform(0.05, 1.0))
            q = alpha_likelihood(model, data, theta, alpha).value
            loss_sum = sum(
                dpd_loss(model, i, data.responses[i], theta, alpha)
                for i in range(model.n)
            )
            assert q + model.n / alpha == pytest.approx(-loss_sum / (1 + alpha), abs=1e-10)

    def test_batch_matches_scalar(self, logistic_problem):
        model, data, beta = logistic_problem
        gen = np.random.default_rng(6)
        thetas = beta + 0.2 * gen.standard_normal((7, 2))
        for alpha in [0.0, 0.4]:
            batch = alpha_likelihood_batch(model, data, thetas, alpha)
            single = [alpha_likelihood(model, data, t, alpha).value for t in thetas]
            assert np.allclose(batch, single, atol=1e-12)

    def test_rejects_negative_alpha(self, linear_problem):
        model, data, beta = linear_problem
        with pytest.raises(ValueError):
            alpha_likelihood(model, data, beta, -0.1)

    def test_hessian_symmetric(self, unknown_sigma_problem):
        model, data, theta = unknown_sigma_problem
        state = alpha_likelihood(model, data, theta, 0.3, derivatives=True)
        assert np.allclose(state.hessian, state.hessian.T, atol=1e-10)


class TestObjectiveDerivatives:
    def test_gradient_and_hessian_match_finite_differences(self, unknown_sigma_problem):
        model, data, theta0 = unknown_sigma_problem
        gen = np.random.default_rng(11)
        for alpha in [0.0, 0.25, 0.8]:
            theta = theta0 + np.append(0.2 * gen.standard_normal(2), 0.1)
            state = alpha_likelihood(model, data, theta, alpha, derivatives=True)
            h = 1e-6
            for j in range(model.dim):
                e = np.zeros(model.dim)
                e[j] = h * max(1.0, abs(theta[j]))
                qp = alpha_likelihood(model, data, theta + e, alpha).value
                qm = alpha_likelihood(model, data, theta - e, alpha).value
                fd = (qp - qm) / (2 * e[j])
                denom = abs(fd) + abs(state.gradient[j]) + 1e-10
                assert abs(state.gradient[j] - fd) / denom < 1e-6
                gp = alpha_likelihood(model, data, theta + e, alpha, derivatives=True).gradient
                gm = alpha_likelihood(model, data, theta - e, alpha, derivatives=True).gradient
                fd_row = (gp - gm) / (2 * e[j])
                scale = np.abs(fd_row) + np.abs(state.hessian[j]) + 1e-10
                assert np.max(np.abs(state.hessian[j] - fd_row) / scale) < 1e-6


class TestFunctional:
    def test_in_model_frozen_value(self):
        # theta = theta_g, sigma=1, alpha=1, one unit design point:
        # (1/a) int f^a dG - (1/(1+a)) int f^{1+a} - 1/a
        #   = c/sqrt(2) - c/(2 sqrt 2) - 1 with c = (2 pi)^{-1/2}.
        model = LinearKnownSigma(np.array([[1.0]]), 1.0)
        value = alpha_likelihood_functional(model, InModel([0.4]), [0.4], 1.0)
        c = INV_SQRT_2PI
        expected = c * 2**-0.5 - 0.5 * c * 2**-0.5 - 1.0
        assert value == pytest.approx(expected, abs=1e-12)
        assert value == pytest.approx(-0.8589526041130609, abs=1e-12)

    def test_in_model_value_vs_monte_carlo(self, rng):
        # Oracle: average the observed-data objective over draws from G.
        design = np.array([[1.0], [2.0]])
        model = LinearKnownSigma(design, 1.0)
        theta_g = np.array([0.7])
        theta = np.array([0.3])
        alpha = 0.5
        closed = alpha_likelihood_functional(model, InModel(theta_g), theta, alpha)
        draws = 200_000
        gen = np.random.default_rng(99)
        total = np.zeros(draws)
        for i, z in enumerate([1.0, 2.0]):
            x = z * 0.7 + gen.standard_normal(draws)
            ll = -0.5 * np.log(2 * np.pi) - 0.5 * (x - z * 0.3) ** 2
            term = np.expm1(alpha * ll) / alpha - float(
                np.exp(model.log_power_integral_terms(theta, alpha))[i]
            ) / (1 + alpha)
            total += term
        mc, se = float(total.mean()), float(total.std(ddof=1) / math.sqrt(draws))
        assert abs(closed - mc) < 3 * se

    def test_zero_contamination_reduces_to_in_model(self, location_problem):
        model, theta_g = location_problem
        theta = np.array([4.2])
        for alpha in [0.0, 0.3]:
            clean = alpha_likelihood_functional(model, InModel(theta_g), theta, alpha)
            eps0 = alpha_likelihood_functional(
                model, Contaminated(theta_g, 0.0, 17.0), theta, alpha
            )
            assert clean == pytest.approx(eps0, abs=1e-12)

    def test_maximizer_is_true_parameter(self, location_problem):
        model, theta_g = location_problem
        grid = np.linspace(3.0, 7.0, 801)
        for alpha in [0.2, 0.7]:
            vals = alpha_likelihood_functional_batch(
                model, InModel(theta_g), grid[:, None], alpha
            )
            best = grid[int(np.argmax(vals))]
            assert abs(best - theta_g[0]) <= (grid[1] - grid[0])

    def test_contaminated_mixture_formula(self, location_problem):
        model, theta_g = location_problem
        theta = np.array([4.5])
        alpha, eps, point = 0.4, 0.25, 11.0
        mixed = alpha_likelihood_functional(
            model, Contaminated(theta_g, eps, point), theta, alpha
        )
        clean_part = np.exp(
            model.log_power_expectation_terms(theta, alpha, theta_g)
        )
        atom_part = np.exp(alpha * model.log_density_terms(np.full(model.n, point), theta))
        ints = np.exp(model.log_power_integral_terms(theta, alpha))
        expected = float(
            np.sum(
                ((1 - eps) * clean_part + eps * atom_part - 1.0) / alpha
                - ints / (1 + alpha)
            )
        )
        assert mixed == pytest.approx(expected, rel=1e-10)

    def test_small_alpha_functional_stability(self, location_problem):
        model, theta_g = location_problem
        theta = np.array([4.8])
        tiny = alpha_likelihood_functional(model, InModel(theta_g), theta, 1e-8)
        zero = alpha_likelihood_functional(model, InModel(theta_g), theta, 0.0)
        assert abs(tiny - zero) < 1e-5


class TestDataFit:
    def test_objective_grid_maximum_at_point_estimate(self):
        from dpdbayes import fit

        gen = np.random.default_rng(71)
        design = np.ones((40, 1))
        model = LinearKnownSigma(design, 1.0)
        data = Dataset(model.sample_responses([5.0], gen), design)
        for alpha in [0.2, 0.6]:
            point = fit(model, data, alpha).theta_hat[0]
            grid = np.linspace(3.0, 7.0, 2001)
            values = alpha_likelihood_batch(model, data, grid[:, None], alpha)
            best = grid[int(np.argmax(values))]
            assert abs(best - point) <= grid[1] - grid[0]
