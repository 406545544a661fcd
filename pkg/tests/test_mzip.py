import pytest
import numpy as np
from scipy.special import expit, gammaln

from models.mediation import MediatorType
from models.simulation import MediatorConfig, ScenarioConfig
from services.errors import (
    DegenerateOutcomeError,
    DimensionMismatchError,
    InvalidInputError,
    RankDeficientError,
)
from services.glm import fit_poisson, poisson_loglik, poisson_score
from services.mediation import outcome_design
from services.mzip import (
    MzipFit,
    mzip_fit,
    mzip_hessian,
    mzip_loglik,
    mzip_means,
    mzip_obs_scores,
    mzip_score,
)
from services.optimizer import finite_diff_gradient, finite_diff_hessian
from services.simulation import PRESETS, generate


def _random_problem(rng, n, p):
    design = np.column_stack([np.ones(n), rng.normal(scale=0.5, size=(n, p - 1))])
    counts = rng.poisson(1.5, size=n)
    y = np.where(rng.random(n) < 0.3, 0, counts).astype(float)
    return design, y


def _brute_force_loglik(alpha, gamma, design, y) -> float:
    """ψ + (1−ψ)e^{−μ} calculado diretamente em precisão estendida."""
    g = design.astype(np.longdouble) @ gamma.astype(np.longdouble)
    a = design.astype(np.longdouble) @ alpha.astype(np.longdouble)
    psi = 1 / (1 + np.exp(-g))
    mu = np.exp(a) / (1 - psi)
    yl = y.astype(np.longdouble)
    zero = np.log(psi + (1 - psi) * np.exp(-mu))
    positive = np.log(1 - psi) - mu + yl * np.log(mu) - gammaln(y + 1.0).astype(np.longdouble)
    return float(np.sum(np.where(y == 0, zero, positive)))


class TestMzipLoglik:
    """Testes para a log-verossimilhança MZIP"""

    def test_zero_observation_closed_form(self):
        """Teste y=0 com ψ=0.5, μ=1: log(0.5 + 0.5e⁻¹)"""
        value = mzip_loglik([-np.log(2.0)], [0.0], np.ones((1, 1)), [0.0])

        assert value == pytest.approx(np.log(0.5 + 0.5 * np.exp(-1.0)), rel=1e-12)
        assert value == pytest.approx(-0.37989, abs=1e-5)

    def test_positive_observation_closed_form(self):
        """Teste y=3 com ψ=0.5, μ=1: log 0.5 − 1 − log 6"""
        value = mzip_loglik([-np.log(2.0)], [0.0], np.ones((1, 1)), [3.0])

        assert value == pytest.approx(np.log(0.5) - 1.0 - np.log(6.0), rel=1e-12)

    def test_matches_extended_precision(self, rng):
        """Teste contra o cálculo direto em long double"""
        design, y = _random_problem(rng, 50, 3)
        for _ in range(5):
            alpha = rng.normal(scale=0.4, size=3)
            gamma = rng.normal(scale=0.8, size=3)
            expected = _brute_force_loglik(alpha, gamma, design, y)

            assert mzip_loglik(alpha, gamma, design, y) == pytest.approx(expected, rel=1e-10)

    def test_poisson_limit(self, rng):
        """Teste ψ→0 (γ0 = −30) reproduz a Poisson com média exp(Zα)"""
        design, y = _random_problem(rng, 40, 3)
        alpha = np.array([0.3, -0.2, 0.1])
        gamma = np.array([-30.0, 0.0, 0.0])

        assert mzip_loglik(alpha, gamma, design, y) == pytest.approx(
            poisson_loglik(alpha, design, y), rel=1e-9
        )
        np.testing.assert_allclose(
            mzip_score(alpha, gamma, design, y)[3:], poisson_score(alpha, design, y), rtol=1e-8, atol=1e-10
        )

    def test_dimension_mismatch(self):
        """Teste α e γ de tamanhos diferentes"""
        with pytest.raises(DimensionMismatchError):
            mzip_loglik([0.0, 1.0], [0.0], np.ones((3, 2)), [0.0, 1.0, 2.0])


class TestMzipDerivatives:
    """Testes para score e hessiana analíticos"""

    @pytest.mark.parametrize("p", [2, 4, 6])
    def test_score_matches_finite_differences(self, rng, p):
        """Teste score (γ, α) vs diferenças finitas em 10 pontos"""
        design, y = _random_problem(rng, 80, p)
        for _ in range(10):
            params = rng.normal(scale=0.3, size=2 * p)
            analytic = mzip_score(params[p:], params[:p], design, y)
            numeric = finite_diff_gradient(lambda t: mzip_loglik(t[p:], t[:p], design, y), params)
            scale = max(1.0, np.max(np.abs(analytic)))

            assert np.max(np.abs(analytic - numeric)) / scale < 1e-6

    @pytest.mark.parametrize("p", [2, 4])
    def test_hessian_matches_finite_differences(self, rng, p):
        """Teste hessiana analítica vs diferenças finitas do score"""
        design, y = _random_problem(rng, 80, p)
        params = rng.normal(scale=0.3, size=2 * p)
        analytic = mzip_hessian(params[p:], params[:p], design, y)
        numeric = finite_diff_hessian(lambda t: mzip_score(t[p:], t[:p], design, y), params)
        scale = max(1.0, np.max(np.abs(analytic)))

        assert np.max(np.abs(analytic - numeric)) / scale < 1e-5
        assert np.array_equal(analytic, analytic.T)

    def test_obs_scores_sum_to_score(self, rng):
        """Teste soma dos scores individuais"""
        design, y = _random_problem(rng, 30, 3)
        alpha, gamma = rng.normal(size=3) * 0.2, rng.normal(size=3) * 0.2
        scores = mzip_obs_scores(alpha, gamma, design, y)

        assert scores.shape == (30, 6)
        np.testing.assert_allclose(scores.sum(axis=0), mzip_score(alpha, gamma, design, y))

    def test_alpha_score_vanishes_when_psi_near_one(self):
        """Teste ψ≈1 em dados só de zeros: score de α ≈ 0"""
        design = np.ones((20, 1))
        score = mzip_score([-30.0], [30.0], design, np.zeros(20))

        assert abs(score[1]) < 1e-10


class TestMzipFit:
    """Testes para o ajuste MZIP"""

    def test_fixture_fit_converges(self, scenario1_mzip):
        """Teste convergência, score ≈ 0 e covariâncias válidas (n=5000)"""
        design, y, fit = scenario1_mzip

        assert fit.converged
        assert fit.iterations <= 50
        assert fit.n == 5000 and fit.p == 4
        assert np.max(np.abs(mzip_score(fit.alpha, fit.gamma, design, y))) <= 1e-6
        for cov in (fit.cov_joint, fit.cov_joint_robust):
            assert cov.shape == (8, 8)
            np.testing.assert_allclose(cov, cov.T, atol=1e-12)
            assert np.all(np.diag(cov) > 0)

    def test_fit_loglik_matches_function(self, scenario1_mzip):
        """Teste loglik reportada = mzip_loglik nos estimadores"""
        design, y, fit = scenario1_mzip

        assert fit.loglik == pytest.approx(mzip_loglik(fit.alpha, fit.gamma, design, y), rel=1e-12)

    def test_alpha_close_to_truth(self, scenario1_mzip):
        """Teste α̂ próximo de (−0.6, 0.41, 0.15, 0.25) com n=5000"""
        _, _, fit = scenario1_mzip
        se = np.sqrt(np.diag(fit.alpha_cov()))

        assert np.all(np.abs(fit.alpha - np.array([-0.6, 0.41, 0.15, 0.25])) < 4 * se)

    def test_deterministic(self, small_scenario1_data):
        """Teste duas execuções idênticas"""
        data = small_scenario1_data
        design = outcome_design(data.exposure, data.mediator, data.covariates, interaction=False)
        first = mzip_fit(design, data.outcome)
        second = mzip_fit(design, data.outcome)

        assert np.array_equal(first.alpha, second.alpha)
        assert np.array_equal(first.gamma, second.gamma)
        assert np.array_equal(first.cov_joint, second.cov_joint)

    @pytest.mark.parametrize(
        "y, error",
        [
            (np.arange(1.0, 21.0), DegenerateOutcomeError),
            (np.zeros(20), DegenerateOutcomeError),
            (np.r_[np.zeros(10), np.full(9, 2.0), -1.0], InvalidInputError),
            (np.r_[np.zeros(10), np.full(9, 2.0), 1.5], InvalidInputError),
        ],
    )
    def test_invalid_outcomes(self, y, error):
        """Teste desfechos degenerados ou inválidos"""
        design = np.column_stack([np.ones(20), np.arange(20.0) % 3])
        with pytest.raises(error):
            mzip_fit(design, y)

    def test_too_few_observations(self):
        """Teste n ≤ 2p"""
        design = np.column_stack([np.ones(6), np.arange(6.0), np.arange(6.0) % 2])
        with pytest.raises(InvalidInputError):
            mzip_fit(design, np.array([0.0, 1.0, 0.0, 2.0, 0.0, 3.0]))

    def test_rank_deficient(self):
        """Teste colunas colineares"""
        x = np.arange(20.0) % 4
        design = np.column_stack([np.ones(20), x, 3 * x])
        y = np.tile([0.0, 1.0, 2.0, 0.0], 5)
        with pytest.raises(RankDeficientError):
            mzip_fit(design, y)


class TestMzipMeans:
    """Testes para as médias ajustadas"""

    def test_closed_form_and_identity(self, rng):
        """Teste ν = exp(Zα), ψ = expit(Zγ) e ν = (1−ψ)μ"""
        alpha = np.array([0.2, -0.3])
        gamma = np.array([-0.5, 0.8])
        fit = MzipFit(
            alpha=alpha, gamma=gamma, loglik=0.0, cov_joint=np.eye(4), cov_joint_robust=np.eye(4),
            converged=True, n=10, p=2,
        )
        design = np.column_stack([np.ones(10), rng.normal(size=10)])
        means = mzip_means(fit, design)

        np.testing.assert_allclose(means.nu, np.exp(design @ alpha), rtol=1e-14)
        np.testing.assert_allclose(means.psi, expit(design @ gamma), rtol=1e-14)
        np.testing.assert_allclose((1.0 - means.psi) * means.mu, means.nu, rtol=1e-12)

    def test_wrong_design_width(self, scenario1_mzip):
        """Teste desenho com número errado de colunas"""
        _, _, fit = scenario1_mzip
        with pytest.raises(DimensionMismatchError):
            mzip_means(fit, np.ones((3, 2)))


@pytest.mark.integration
class TestMzipRecovery:
    """Testes de recuperação com amostras grandes"""

    def test_marginal_mean_matches_generator(self):
        """Teste E[Y | Z] = exp(Zα) nos dados gerados (C < 4)"""
        config = PRESETS["scenario1"].model_copy(update={"n": 200000})
        data = generate(config, seed=11)
        design = outcome_design(data.exposure, data.mediator, data.covariates, interaction=False)
        nu = np.exp(design @ np.asarray(config.alpha))
        rows = data.covariates[:, 0] < 4.0

        assert data.outcome[rows].mean() == pytest.approx(nu[rows].mean(), rel=0.02)

    def test_scenario1_recovery(self):
        """Teste α̂ e γ̂ próximos dos verdadeiros com n=100000"""
        config = PRESETS["scenario1"].model_copy(update={"n": 100000})
        data = generate(config, seed=5)
        design = outcome_design(data.exposure, data.mediator, data.covariates, interaction=False)
        fit = mzip_fit(design, data.outcome)

        assert fit.converged
        np.testing.assert_allclose(fit.alpha, config.alpha, atol=0.03)
        np.testing.assert_allclose(fit.gamma, config.gamma, atol=0.06)

    def test_rare_excess_zeros_agree_with_poisson(self):
        """Teste γ = (−10, 0, 0, 0): α̂ do MZIP coincide com a Poisson mesmo sem convergir em γ"""
        config = ScenarioConfig(
            gamma=[-10.0, 0.0, 0.0, 0.0],
            alpha=[-0.6, 0.41, 0.15, 0.25],
            mediator=MediatorConfig(type=MediatorType.CONTINUOUS, theta=[0.0, 1.0, 0.5], sigma2=3.0),
            n=20000,
        )
        data = generate(config, seed=21)
        design = outcome_design(data.exposure, data.mediator, data.covariates, interaction=False)
        fit = mzip_fit(design, data.outcome)
        poisson = fit_poisson(design, data.outcome)

        assert poisson.converged
        np.testing.assert_allclose(fit.alpha, poisson.coefficients, atol=1e-3)

    @pytest.mark.parametrize("replicate", [63, 81, 161])
    def test_heavy_tailed_replicates_converge(self, replicate):
        """Teste réplicas do cenário 2 que começam em região indefinida da hessiana"""
        config = PRESETS["scenario2"].model_copy(update={"n": 1000})
        data = generate(config, [1, replicate])
        design = outcome_design(data.exposure, data.mediator, data.covariates, interaction=False)
        fit = mzip_fit(design, data.outcome)

        assert fit.converged
        assert np.all(np.isfinite(fit.alpha_cov()))
        if replicate == 63:
            assert fit.loglik == pytest.approx(-1228.77, abs=0.01)
            np.testing.assert_allclose(fit.alpha, [-0.598, 0.325, 0.168, 0.283], atol=2e-3)
