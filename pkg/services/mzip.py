import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, gammaln

from models.settings import OptimSettings
from services.errors import (
    DegenerateOutcomeError,
    DimensionMismatchError,
    InvalidInputError,
    NonFiniteError,
    RankDeficientError,
    SingularHessianError,
)
from services.glm import fit_logistic, fit_poisson, inverse_information, sandwich_covariance
from services.optimizer import maximize

logger = logging.getLogger(__name__)

# limite dos valores iniciais vindos das regressões auxiliares
_START_CLIP = 10.0


@dataclass
class MzipFit:
    """Ajuste MZIP; as covariâncias seguem a ordem (γ, α)."""

    alpha: np.ndarray
    gamma: np.ndarray
    loglik: float
    cov_joint: np.ndarray
    cov_joint_robust: np.ndarray
    converged: bool
    n: int
    p: int
    iterations: int = 0
    gradient_norm: float = 0.0

    def alpha_cov(self, robust: bool = False) -> np.ndarray:
        cov = self.cov_joint_robust if robust else self.cov_joint
        return cov[self.p:, self.p:]

    def gamma_cov(self, robust: bool = False) -> np.ndarray:
        cov = self.cov_joint_robust if robust else self.cov_joint
        return cov[:self.p, :self.p]


@dataclass
class MzipMeans:
    nu: np.ndarray
    psi: np.ndarray
    mu: np.ndarray


def _prepare(alpha, gamma, design, y):
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if design.ndim != 2 or alpha.shape != gamma.shape or alpha.shape[0] != design.shape[1]:
        raise DimensionMismatchError(
            f"alpha {alpha.shape}, gamma {gamma.shape} e desenho {design.shape} incompatíveis"
        )
    if y.shape != (design.shape[0],):
        raise DimensionMismatchError(f"y {y.shape} incompatível com desenho {design.shape}")
    return alpha, gamma, design, y


def _components(alpha, gamma, design):
    g = design @ gamma
    a = design @ alpha
    softplus = np.logaddexp(0.0, g)
    log_mu = a + softplus
    with np.errstate(over="ignore"):
        mu = np.exp(log_mu)
    return g, softplus, log_mu, mu


def _observation_logliks(alpha, gamma, design, y) -> np.ndarray:
    g, softplus, log_mu, mu = _components(alpha, gamma, design)
    positive = -softplus - mu + y * log_mu - gammaln(y + 1.0)
    # log(ψ + (1−ψ)e^{−μ}) em espaço log
    zero = np.logaddexp(g, -mu) - softplus
    return np.where(y == 0, zero, positive)


def mzip_loglik(alpha, gamma, design, y) -> float:
    """Log-verossimilhança MZIP com ψ = expit(Zγ) e μ = exp(Zα + softplus(Zγ))."""
    alpha, gamma, design, y = _prepare(alpha, gamma, design, y)
    with np.errstate(over="ignore", invalid="ignore"):
        total = float(np.sum(_observation_logliks(alpha, gamma, design, y)))
    if not np.isfinite(total):
        raise NonFiniteError("log-verossimilhança MZIP não finita")
    return total


def _derivative_weights(alpha, gamma, design, y):
    """Derivadas de ℓᵢ em relação aos preditores lineares g = Zγ e a = Zα."""
    g, _, _, mu = _components(alpha, gamma, design)
    psi = expit(g)
    zero = y == 0
    # peso posterior do componente Poisson numa observação zero
    w = expit(-(g + mu))

    d_a = np.where(zero, -w * mu, y - mu)
    d_g = np.where(zero, 1.0 - w - w * mu * psi - psi, psi * (y - 1.0 - mu))
    return g, psi, mu, w, zero, d_g, d_a


def mzip_obs_scores(alpha, gamma, design, y) -> np.ndarray:
    """Scores individuais n×2p na ordem (γ, α)."""
    alpha, gamma, design, y = _prepare(alpha, gamma, design, y)
    with np.errstate(over="ignore", invalid="ignore"):
        *_, d_g, d_a = _derivative_weights(alpha, gamma, design, y)
        scores = np.hstack([design * d_g[:, None], design * d_a[:, None]])
    if not np.all(np.isfinite(scores)):
        raise NonFiniteError("score MZIP não finito")
    return scores


def mzip_score(alpha, gamma, design, y) -> np.ndarray:
    return mzip_obs_scores(alpha, gamma, design, y).sum(axis=0)


def mzip_hessian(alpha, gamma, design, y) -> np.ndarray:
    """Hessiana analítica 2p×2p na ordem (γ, α)."""
    alpha, gamma, design, y = _prepare(alpha, gamma, design, y)
    with np.errstate(over="ignore", invalid="ignore"):
        g, psi, mu, w, zero, _, _ = _derivative_weights(alpha, gamma, design, y)
        psi_var = psi * expit(-g)
        mu_psi = mu * psi
        w_var = w * (1.0 - w)

        d_aa = np.where(zero, w * mu * ((1.0 - w) * mu - 1.0), -mu)
        d_ag = np.where(zero, w_var * (1.0 + mu_psi) * mu - w * mu_psi, -mu_psi)
        d_gg = np.where(
            zero,
            w_var * (1.0 + mu_psi) ** 2 - w * mu_psi - psi_var,
            psi_var * (y - 1.0 - mu) - mu_psi * psi,
        )

        h_gg = (design * d_gg[:, None]).T @ design
        h_ag = (design * d_ag[:, None]).T @ design
        h_aa = (design * d_aa[:, None]).T @ design
    hessian = np.block([[h_gg, h_ag.T], [h_ag, h_aa]])
    if not np.all(np.isfinite(hessian)):
        raise NonFiniteError("hessiana MZIP não finita")
    return 0.5 * (hessian + hessian.T)


def _validate_outcome(design, y):
    design = np.asarray(design, dtype=float)
    y = np.asarray(y, dtype=float)
    if design.ndim != 2 or y.shape != (design.shape[0],):
        raise DimensionMismatchError(f"y {y.shape} incompatível com desenho {design.shape}")
    n, p = design.shape
    if n <= 2 * p:
        raise InvalidInputError(f"MZIP precisa de n > 2p (n={n}, p={p})")
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise InvalidInputError("desfecho deve ser contagem inteira não negativa")
    if not np.any(y == 0) or not np.any(y > 0):
        raise DegenerateOutcomeError("desfecho precisa de ao menos um zero e uma contagem positiva")
    if np.linalg.matrix_rank(design) < p:
        raise RankDeficientError("matriz de desenho sem posto coluna completo")
    return design, y


def mzip_fit(design, y, settings: Optional[OptimSettings] = None) -> MzipFit:
    """
    Ajusta o modelo MZIP por máxima verossimilhança.

    Valores iniciais: γ da logística de 1{y=0} em Z, α da regressão de Poisson.

    Args:
        design: Matriz Z (n×p) com intercepto, usada nos dois componentes
        y: Contagens observadas
        settings: Critérios do otimizador

    Returns:
        MzipFit com covariâncias do modelo e sanduíche
    """
    design, y = _validate_outcome(design, y)
    n, p = design.shape

    gamma0 = fit_logistic(design, (y == 0).astype(float), settings).coefficients
    alpha0 = fit_poisson(design, y, settings).coefficients
    init = np.clip(np.concatenate([gamma0, alpha0]), -_START_CLIP, _START_CLIP)

    result = maximize(
        lambda t: mzip_loglik(t[p:], t[:p], design, y),
        lambda t: mzip_score(t[p:], t[:p], design, y),
        init,
        settings,
        hessian=lambda t: mzip_hessian(t[p:], t[:p], design, y),
    )
    gamma, alpha = result.parameters[:p], result.parameters[p:]

    try:
        cov_joint = inverse_information(result.hessian)
        cov_robust = sandwich_covariance(mzip_obs_scores(alpha, gamma, design, y), result.hessian)
    except SingularHessianError:
        if result.converged:
            raise
        cov_joint = np.full((2 * p, 2 * p), np.nan)
        cov_robust = np.full((2 * p, 2 * p), np.nan)

    if result.converged:
        logger.info("MZIP n=%d p=%d loglik=%.6f iterações=%d", n, p, result.loglik, result.iterations)
    else:
        logger.warning("MZIP não convergiu (%s) após %d iterações", result.message, result.iterations)

    return MzipFit(
        alpha=alpha,
        gamma=gamma,
        loglik=result.loglik,
        cov_joint=cov_joint,
        cov_joint_robust=cov_robust,
        converged=result.converged,
        n=n,
        p=p,
        iterations=result.iterations,
        gradient_norm=result.gradient_norm,
    )


def mzip_means(fit: MzipFit, design) -> MzipMeans:
    design = np.asarray(design, dtype=float)
    if design.ndim != 2 or design.shape[1] != fit.p:
        raise DimensionMismatchError(f"desenho com {design.shape[-1]} colunas, modelo tem p={fit.p}")
    g = design @ fit.gamma
    psi = expit(g)
    nu = np.exp(design @ fit.alpha)
    return MzipMeans(nu=nu, psi=psi, mu=nu / expit(-g))
