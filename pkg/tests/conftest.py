import pytest
import numpy as np
from typing import Callable, Optional, Sequence

from models.dataset import Dataset
from models.mediation import MediationSpec
from services.dataset_service import DatasetService
from services.glm import GlmFit, LinearFit
from services.mediation import outcome_design
from services.mzip import MzipFit, mzip_fit
from services.simulation import PRESETS, generate


@pytest.fixture
def rng() -> np.random.Generator:
    """Gerador com semente fixa para testes de propriedades"""
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def scenario1_data() -> Dataset:
    """Dados do cenário 1 com n=5000"""
    return generate(PRESETS["scenario1"].model_copy(update={"n": 5000}), seed=2024)


@pytest.fixture(scope="session")
def small_scenario1_data() -> Dataset:
    """Dados do cenário 1 com n=400, para bootstrap e CLI"""
    return generate(PRESETS["scenario1"].model_copy(update={"n": 400}), seed=7)


@pytest.fixture(scope="session")
def scenario1_mzip(scenario1_data):
    """Desenho, desfecho e ajuste MZIP do cenário 1"""
    data = scenario1_data
    design = outcome_design(data.exposure, data.mediator, data.covariates, interaction=False)
    return design, data.outcome, mzip_fit(design, data.outcome)


@pytest.fixture
def scenario_csv(tmp_path, small_scenario1_data) -> str:
    """CSV temporário exportado do cenário 1"""
    path = tmp_path / "scenario1.csv"
    DatasetService.to_csv(small_scenario1_data, str(path))
    return str(path)


@pytest.fixture
def make_fits() -> Callable:
    """Fábrica de ajustes sintéticos (desfecho MZIP + mediador) com covariâncias controladas"""

    def _make(
        alpha: Sequence[float],
        theta: Sequence[float] = (0.0, 1.0, 0.5),
        sigma2: float = 3.0,
        binary: bool = False,
        alpha_cov: Optional[np.ndarray] = None,
        alpha_cov_robust: Optional[np.ndarray] = None,
        gamma: Optional[Sequence[float]] = None,
        converged: bool = True,
    ):
        alpha = np.asarray(alpha, dtype=float)
        theta = np.asarray(theta, dtype=float)
        p = alpha.shape[0]
        cov = np.eye(2 * p) * 0.01
        if alpha_cov is not None:
            cov[p:, p:] = alpha_cov
        robust = cov.copy()
        if alpha_cov_robust is not None:
            robust[p:, p:] = alpha_cov_robust
        out_fit = MzipFit(
            alpha=alpha,
            gamma=np.zeros(p) if gamma is None else np.asarray(gamma, dtype=float),
            loglik=0.0,
            cov_joint=cov,
            cov_joint_robust=robust,
            converged=converged,
            n=1000,
            p=p,
        )
        theta_cov = np.eye(theta.shape[0]) * 0.01
        if binary:
            med_fit = GlmFit(
                coefficients=theta,
                cov_model=theta_cov,
                cov_robust=theta_cov,
                loglik=0.0,
                converged=True,
                family="logistic",
                n=1000,
            )
        else:
            med_fit = LinearFit(
                theta=theta,
                sigma2=sigma2,
                sigma2_var=2.0 * sigma2 ** 2 / (1000 - theta.shape[0]),
                cov_theta=theta_cov,
                n=1000,
                p=theta.shape[0],
            )
        return out_fit, med_fit

    return _make


@pytest.fixture
def ratio_spec() -> MediationSpec:
    """Contraste x=1 vs x*=0 na escala de razão, c=2"""
    return MediationSpec(x=1.0, x_star=0.0, c=[2.0])
