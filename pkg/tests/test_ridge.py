"""Coupling-space penalty, regularized gradients, stabilized Hessian."""

import numpy as np
import pytest

from fourspin import hobm, pbf, rbm, ridge


@pytest.fixture
def hobm_model(rng):
    masks = np.arange(1, 32)
    return hobm.HigherOrderModel(
        pbf.SubsetVector(5, masks, 0.3 * rng.standard_normal(31))
    )


class TestConfig:
    def test_defaults(self):
        config = ridge.RidgeConfig()
        assert config.mode == "exact"
        assert config.space == "coupling"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lam": -1.0},
            {"mode": "bootstrap"},
            {"space": "spectral"},
            {"mode": "stochastic", "n_samples": 1},
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            ridge.RidgeConfig(**kwargs)


class TestPenalty:
    def test_hobm_coupling_space_is_squared_norm(self, hobm_model):
        expected = float(np.dot(hobm_model.couplings.values, hobm_model.couplings.values))
        assert ridge.penalty(hobm_model, ridge.RidgeConfig()) == pytest.approx(expected)

    def test_rbm_exact_matches_parseval(self, small_rbm):
        coup = rbm.extract_couplings_exact(small_rbm)
        expected = float(np.dot(coup.values, coup.values))
        got = ridge.penalty(small_rbm, ridge.RidgeConfig())
        assert got == pytest.approx(expected, rel=1e-12)

    def test_parameter_space_is_theta_norm(self, small_rbm):
        theta = small_rbm.to_vector()
        config = ridge.RidgeConfig(space="parameter")
        assert ridge.penalty(small_rbm, config) == pytest.approx(theta @ theta)

    def test_stochastic_is_seeded(self, small_rbm):
        config = ridge.RidgeConfig(mode="stochastic", n_samples=500, seed=3)
        assert ridge.penalty(small_rbm, config) == ridge.penalty(small_rbm, config)

    def test_stochastic_is_unbiased(self, small_rbm):
        exact = ridge.penalty(small_rbm, ridge.RidgeConfig())
        estimates = [
            ridge.penalty(
                small_rbm, ridge.RidgeConfig(mode="stochastic", n_samples=2048, seed=s)
            )
            for s in range(30)
        ]
        se = np.std(estimates, ddof=1) / np.sqrt(len(estimates))
        assert abs(np.mean(estimates) - exact) < 4 * se

    def test_stochastic_hobm_matches_energy_variance_scale(self, hobm_model):
        exact = ridge.penalty(hobm_model, ridge.RidgeConfig())
        est = ridge.penalty(
            hobm_model, ridge.RidgeConfig(mode="stochastic", n_samples=200_000, seed=0)
        )
        assert est == pytest.approx(exact, rel=0.05)


class TestRidgeNll:
    def test_composition(self, small_rbm, chain6):
        data = chain6.distribution()
        with pytest.raises(ValueError):
            # distribution over 6 sites cannot score a 4-site model
            ridge.ridge_nll(small_rbm, data, ridge.RidgeConfig())

    def test_value(self, hobm_model, random_table):
        config = ridge.RidgeConfig(lam=0.1)
        expected = hobm.neg_log_likelihood(hobm_model, random_table)
        expected += 0.05 * ridge.penalty(hobm_model, config)
        assert ridge.ridge_nll(hobm_model, random_table, config) == pytest.approx(
            expected
        )


class TestGradient:
    def finite_difference_hobm(self, model, data, config, eps=1e-6):
        values = model.couplings.values
        grad = np.empty_like(values)
        for j in range(len(values)):
            up = values.copy()
            up[j] += eps
            down = values.copy()
            down[j] -= eps
            plus = hobm.HigherOrderModel(model.couplings.with_values(up))
            minus = hobm.HigherOrderModel(model.couplings.with_values(down))
            grad[j] = (
                ridge.ridge_nll(plus, data, config) - ridge.ridge_nll(minus, data, config)
            ) / (2 * eps)
        return grad

    def finite_difference_rbm(self, model, data, config, eps=1e-6):
        theta = model.to_vector()
        grad = np.empty_like(theta)
        for j in range(len(theta)):
            up = theta.copy()
            up[j] += eps
            down = theta.copy()
            down[j] -= eps
            plus = rbm.SpinRbm.from_vector(up, model.n_visible, model.n_hidden)
            minus = rbm.SpinRbm.from_vector(down, model.n_visible, model.n_hidden)
            grad[j] = (
                ridge.ridge_nll(plus, data, config) - ridge.ridge_nll(minus, data, config)
            ) / (2 * eps)
        return grad

    def test_hobm_gradient_matches_fd(self, hobm_model, random_table):
        config = ridge.RidgeConfig(lam=0.2)
        grad = ridge.ridge_gradient(hobm_model, random_table, config)
        fd = self.finite_difference_hobm(hobm_model, random_table, config)
        assert np.allclose(grad.values, fd, atol=1e-8)

    @pytest.mark.parametrize("space", ["coupling", "parameter"])
    def test_rbm_gradient_matches_fd(self, small_rbm, space):
        data = rbm.initialize(4, 2, seed=9, weight_std=0.5).distribution()
        config = ridge.RidgeConfig(lam=0.3, space=space)
        grad = ridge.ridge_gradient(small_rbm, data, config).to_vector()
        fd = self.finite_difference_rbm(small_rbm, data, config)
        assert np.allclose(grad, fd, atol=1e-7)

    def test_rbm_stochastic_gradient_matches_fd(self, small_rbm):
        data = rbm.initialize(4, 2, seed=9, weight_std=0.5).distribution()
        config = ridge.RidgeConfig(lam=0.3, mode="stochastic", n_samples=256, seed=1)
        grad = ridge.ridge_gradient(small_rbm, data, config).to_vector()
        fd = self.finite_difference_rbm(small_rbm, data, config)
        assert np.allclose(grad, fd, atol=1e-6)

    def test_zero_lambda_reduces_to_plain_gradient(self, hobm_model, random_table):
        config = ridge.RidgeConfig(lam=0.0)
        grad = ridge.ridge_gradient(hobm_model, random_table, config)
        plain = hobm.nll_gradient(hobm_model, random_table)
        assert np.array_equal(grad.values, plain.values)


class TestFixedPointResidual:
    def test_converged_hobm_fit_satisfies_condition(self, random_table):
        lam = 1e-2
        result = hobm.fit(
            random_table, hobm.FitConfig(tolerance=1e-7, ridge_lambda=lam)
        )
        residual = ridge.ridge_fixed_point_residual(
            result.model, random_table, ridge.RidgeConfig(lam=lam)
        )
        assert residual.sup_norm() < 1e-6

    def test_composition_against_manual_moments(self, small_rbm, random_table):
        data = rbm.initialize(4, 2, seed=4, weight_std=0.4).distribution()
        config = ridge.RidgeConfig(lam=0.05)
        residual = ridge.ridge_fixed_point_residual(small_rbm, data, config)
        coup = rbm.extract_couplings_exact(small_rbm)
        m_model = small_rbm.distribution().moments_full()[coup.masks]
        m_data = data.moments_full()[coup.masks]
        expected = m_data - m_model - config.lam * coup.values
        assert np.allclose(residual.values, expected, atol=1e-12)

    def test_unregularized_data_consistent_point(self, small_rbm):
        residual = ridge.ridge_fixed_point_residual(
            small_rbm, small_rbm.distribution(), ridge.RidgeConfig(lam=0.0)
        )
        assert residual.sup_norm() < 1e-12


class TestEffectiveCouplings:
    def test_hobm_dispatch(self, hobm_model):
        coup = ridge.effective_couplings(hobm_model, max_order=2)
        assert coup.masks.tolist() == pbf.masks_up_to_order(5, 2).tolist()
        for mask in coup.masks:
            assert coup.get(int(mask)) == pytest.approx(
                hobm_model.couplings.get(int(mask))
            )

    def test_rbm_dispatch(self, small_rbm):
        coup = ridge.effective_couplings(small_rbm)
        direct = rbm.extract_couplings_exact(small_rbm)
        assert np.array_equal(coup.masks, direct.masks)
        assert np.allclose(coup.values, direct.values)


class TestHessianCheck:
    def test_hobm_sandwich_exact_and_positive(self, hobm_model, random_table):
        lam = 1e-3
        report = ridge.ridge_hessian_check(
            hobm_model, random_table, ridge.RidgeConfig(lam=lam)
        )
        assert report.max_sandwich_deviation == 0.0
        assert report.kernel_dimension == 0
        assert report.min_eigenvalue >= 0.9 * lam

    def test_full_rank_rbm_strictly_positive(self, rng):
        model = rbm.SpinRbm(
            0.5 * rng.standard_normal((4, 2)),
            0.3 * rng.standard_normal(2),
            0.2 * rng.standard_normal(4),
        )
        assert model.n_parameters < 2**4 - 1
        report = ridge.ridge_hessian_check(
            model, model.distribution(), ridge.RidgeConfig(lam=1e-2)
        )
        assert report.kernel_dimension == 0
        assert report.min_eigenvalue > 0
        assert report.row_space_min_eigenvalue == report.min_eigenvalue

    def test_overparametrized_rbm_reports_kernel(self, rng):
        model = rbm.SpinRbm(
            0.4 * rng.standard_normal((3, 8)),
            0.3 * rng.standard_normal(8),
            0.2 * rng.standard_normal(3),
        )
        # 3*8 + 8 + 3 = 35 parameters but only 7 nonempty subsets
        report = ridge.ridge_hessian_check(
            model, model.distribution(), ridge.RidgeConfig(lam=1e-2)
        )
        assert report.kernel_dimension == model.n_parameters - 7
        assert report.row_space_min_eigenvalue > 0

    def test_sandwich_matches_direct_hessian_at_stationary_point(self, random_table):
        result = hobm.fit(random_table, hobm.FitConfig(tolerance=1e-8))
        report = ridge.ridge_hessian_check(
            result.model, random_table, ridge.RidgeConfig(lam=0.0)
        )
        assert report.max_sandwich_deviation < 1e-6
