import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, gammaln

from models.settings import OptimSettings
from services.errors import (
    DimensionMismatchError,
    InvalidInputError,
    RankDeficientError,
    SingularHessianError,
)
from services.optimizer import maximize

logger = logging.getLogger(__name__)

# |coeficiente| acima disso indica separação / MLE no infinito
SEPARATION_BOUND = 30.0


@dataclass
class LinearFit:
    theta: np.ndarray
    sigma2: float
    sigma2_var: float
    cov_theta: np.ndarray
    n: int
    p: int


@dataclass
class GlmFit:
    coefficients: np.ndarray
    cov_model: np.ndarray
    cov_robust: np.ndarray
    loglik: float
    converged: bool
    family: str
    n: int = 0
    iterations: int = 0


def _check_design(design, response):
    design = np.asarray(design, dtype=float)
    response = np.asarray(response, dtype=float)
    if design.ndim != 2 or response.ndim != 1 or design.shape[0] != response.shape[0]:
        raise DimensionMismatchError(
            f"desenho {design.shape} incompatível com resposta {response.shape}"
        )
    n, p = design.shape
    if n <= p:
        raise DimensionMismatchError(f"n={n} precisa ser maior que p={p}")
    if np.linalg.matrix_rank(design) < p:
        raise RankDeficientError("matriz de desenho sem posto coluna completo")
    return design, response


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def inverse_information(hessian: np.ndarray) -> np.ndarray:
    """Covariância baseada no modelo: (−H)⁻¹, simetrizada."""
    information = -np.asarray(hessian, dtype=float)
    if not np.all(np.isfinite(information)) or np.linalg.cond(information) > 1.0 / np.finfo(float).eps:
        raise SingularHessianError("hessiana singular ou mal condicionada")
    return _symmetrize(np.linalg.inv(information))


def sandwich_covariance(per_obs_scores: np.ndarray, hessian: np.ndarray) -> np.ndarray:
    """
    Covariância robusta A⁻¹ B A⁻¹.

    Args:
        per_obs_scores: Matriz n×p de scores individuais sᵢ
        hessian: Hessiana p×p da log-verossimilhança total (A = −H)

    Returns:
        Matriz p×p simétrica
    """
    scores = np.asarray(per_obs_scores, dtype=float)
    bread = inverse_information(hessian)
    meat = scores.T @ scores
    return _symmetrize(bread @ meat @ bread)


def _covariances(hessian: np.ndarray, scores: np.ndarray, converged: bool):
    try:
        return inverse_information(hessian), sandwich_covariance(scores, hessian)
    except SingularHessianError:
        if converged:
            raise
        p = hessian.shape[0]
        return np.full((p, p), np.nan), np.full((p, p), np.nan)


def fit_linear(design, response) -> LinearFit:
    """Mínimos quadrados com σ̂² = RSS/(n−p) e Var(σ̂²) = 2σ̂⁴/(n−p)."""
    design, response = _check_design(design, response)
    n, p = design.shape
    theta, *_ = np.linalg.lstsq(design, response, rcond=None)
    residuals = response - design @ theta
    sigma2 = float(residuals @ residuals) / (n - p)
    cov_theta = _symmetrize(sigma2 * np.linalg.inv(design.T @ design))
    return LinearFit(
        theta=theta,
        sigma2=sigma2,
        sigma2_var=2.0 * sigma2 ** 2 / (n - p),
        cov_theta=cov_theta,
        n=n,
        p=p,
    )


def logistic_loglik(beta, design, response) -> float:
    eta = design @ beta
    return float(np.sum(response * eta - np.logaddexp(0.0, eta)))


def logistic_score(beta, design, response) -> np.ndarray:
    return design.T @ (response - expit(design @ beta))


def logistic_hessian(beta, design) -> np.ndarray:
    prob = expit(design @ beta)
    return -(design * (prob * (1.0 - prob))[:, None]).T @ design


def poisson_loglik(beta, design, response) -> float:
    eta = design @ beta
    return float(np.sum(response * eta - np.exp(eta) - gammaln(response + 1.0)))


def poisson_score(beta, design, response) -> np.ndarray:
    return design.T @ (response - np.exp(design @ beta))


def poisson_hessian(beta, design) -> np.ndarray:
    mu = np.exp(design @ beta)
    return -(design * mu[:, None]).T @ design


def fit_logistic(design, response, settings: Optional[OptimSettings] = None) -> GlmFit:
    """
    Regressão logística por máxima verossimilhança.

    Separação é reportada como converged=False (coeficientes acima de SEPARATION_BOUND).
    """
    design, response = _check_design(design, response)
    if not np.all((response == 0) | (response == 1)):
        raise InvalidInputError("resposta da regressão logística deve ser 0/1")

    result = maximize(
        lambda b: logistic_loglik(b, design, response),
        lambda b: logistic_score(b, design, response),
        np.zeros(design.shape[1]),
        settings,
        hessian=lambda b: logistic_hessian(b, design),
        parameter_bound=SEPARATION_BOUND,
    )
    beta = result.parameters
    scores = design * (response - expit(design @ beta))[:, None]
    cov_model, cov_robust = _covariances(result.hessian, scores, result.converged)
    if not result.converged:
        logger.warning("regressão logística não convergiu (%s)", result.message)
    return GlmFit(
        coefficients=beta,
        cov_model=cov_model,
        cov_robust=cov_robust,
        loglik=result.loglik,
        converged=result.converged,
        family="logistic",
        n=design.shape[0],
        iterations=result.iterations,
    )


def fit_poisson(design, response, settings: Optional[OptimSettings] = None) -> GlmFit:
    """
    Regressão de Poisson log-linear, partindo do intercepto log(média).

    Resposta toda zero não tem MLE finito: o ajuste é devolvido com converged=False.

    Args:
        design: Matriz de desenho com intercepto
        response: Contagens
        settings: Critérios do otimizador

    Returns:
        GlmFit com covariâncias do modelo e sanduíche
    """
    design, response = _check_design(design, response)
    if np.any(response < 0) or np.any(response != np.floor(response)):
        raise InvalidInputError("resposta de Poisson deve ser contagem inteira não negativa")

    all_zero = not np.any(response > 0)
    init = np.zeros(design.shape[1])
    if not all_zero:
        init[0] = np.log(response.mean())

    result = maximize(
        lambda b: poisson_loglik(b, design, response),
        lambda b: poisson_score(b, design, response),
        init,
        settings,
        hessian=lambda b: poisson_hessian(b, design),
        parameter_bound=SEPARATION_BOUND,
    )
    converged = result.converged and not all_zero
    beta = result.parameters
    scores = design * (response - np.exp(design @ beta))[:, None]
    cov_model, cov_robust = _covariances(result.hessian, scores, converged)
    if not converged:
        logger.warning("regressão de Poisson não convergiu (%s)", "resposta toda zero" if all_zero else result.message)
    return GlmFit(
        coefficients=beta,
        cov_model=cov_model,
        cov_robust=cov_robust,
        loglik=result.loglik,
        converged=converged,
        family="poisson",
        n=design.shape[0],
        iterations=result.iterations,
    )
