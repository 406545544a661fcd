import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import block_diag
from scipy.special import expit
from scipy.stats import norm

from models.dataset import ColumnRoles, Dataset
from models.mediation import (
    Effect,
    EffectSet,
    MediationSpec,
    MediatorType,
    OutcomeModel,
    Scale,
    SeMethod,
)
from models.settings import OptimSettings
from services.errors import (
    InvalidInputError,
    MediationError,
    NonPositiveEstimateError,
    NotConvergedError,
    NullTotalEffectError,
    SingularCovarianceError,
    SpecMismatchError,
    TooManyFailuresError,
)
from services.glm import GlmFit, LinearFit, fit_linear, fit_logistic, fit_poisson
from services.mzip import MzipFit, mzip_fit

logger = logging.getLogger(__name__)

EFFECT_NAMES = ("nde", "nie", "cde", "te")
MAX_FAILURE_RATE = 0.10

OutcomeFit = Union[MzipFit, GlmFit]
MediatorFit = Union[LinearFit, GlmFit]


@dataclass(frozen=True)
class ParameterLayout:
    """
    Posições no vetor de parâmetros do método delta:
    (θ0, θ1, θ4′, α0, α1, α2, [α3], α4′, [σ²]).

    σ² entra sempre que o mediador é contínuo; onde ele não influencia o efeito
    a derivada é zero.
    """

    k: int
    interaction: bool
    mediator_type: MediatorType

    @property
    def continuous(self) -> bool:
        return self.mediator_type == MediatorType.CONTINUOUS

    @property
    def theta4(self) -> slice:
        return slice(2, 2 + self.k)

    @property
    def a0(self) -> int:
        return 2 + self.k

    @property
    def a3(self) -> Optional[int]:
        return self.a0 + 3 if self.interaction else None

    @property
    def a4(self) -> slice:
        start = self.a0 + 3 + int(self.interaction)
        return slice(start, start + self.k)

    @property
    def size(self) -> int:
        return self.a4.stop + int(self.continuous)

    @property
    def s2(self) -> Optional[int]:
        return self.size - 1 if self.continuous else None


class _Coefs(NamedTuple):
    theta0: float
    theta1: float
    theta4: np.ndarray
    alpha0: float
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: np.ndarray
    sigma2: float


def _unpack(params: np.ndarray, layout: ParameterLayout) -> _Coefs:
    a0 = layout.a0
    return _Coefs(
        theta0=params[0],
        theta1=params[1],
        theta4=params[layout.theta4],
        alpha0=params[a0],
        alpha1=params[a0 + 1],
        alpha2=params[a0 + 2],
        alpha3=params[layout.a3] if layout.interaction else 0.0,
        alpha4=params[layout.a4],
        sigma2=params[layout.s2] if layout.continuous else 0.0,
    )


@dataclass
class FittedModels:
    mediator_fit: MediatorFit
    outcome_fit: OutcomeFit


@dataclass
class MediationResult:
    effects: EffectSet
    mediator_fit: MediatorFit
    outcome_fit: OutcomeFit
    spec: MediationSpec
    n: int
    bootstrap_dropped: Optional[int] = None


# Desenhos


def mediator_design(exposure: np.ndarray, covariates: np.ndarray) -> np.ndarray:
    n = exposure.shape[0]
    return np.column_stack([np.ones(n), exposure, covariates.reshape(n, -1)])


def outcome_design(exposure, mediator, covariates, interaction: bool) -> np.ndarray:
    """Colunas (1, x, m, [x·m], c…), comuns aos dois componentes do MZIP."""
    n = exposure.shape[0]
    columns = [np.ones(n), exposure, mediator]
    if interaction:
        columns.append(exposure * mediator)
    return np.column_stack(columns + [covariates.reshape(n, -1)])


def outcome_design_names(roles: ColumnRoles, interaction: bool) -> List[str]:
    names = ["intercept", roles.exposure, roles.mediator]
    if interaction:
        names.append(f"{roles.exposure}:{roles.mediator}")
    return names + list(roles.covariates)


# Médias contrafactuais e seus gradientes


def _continuous_log_mean(coefs: _Coefs, layout, c, x1, x2) -> Tuple[float, np.ndarray]:
    """log E[Y(x1, M(x2)) | c] para mediador normal, e gradiente."""
    mean_m = coefs.theta0 + coefs.theta1 * x2 + coefs.theta4 @ c
    slope = coefs.alpha2 + coefs.alpha3 * x1
    value = (
        coefs.alpha0 + coefs.alpha1 * x1 + coefs.alpha4 @ c
        + slope * mean_m + 0.5 * slope ** 2 * coefs.sigma2
    )
    grad = np.zeros(layout.size)
    grad[0] = slope
    grad[1] = slope * x2
    grad[layout.theta4] = slope * c
    grad[layout.a0] = 1.0
    grad[layout.a0 + 1] = x1
    grad[layout.a0 + 2] = mean_m + slope * coefs.sigma2
    if layout.interaction:
        grad[layout.a3] = x1 * (mean_m + slope * coefs.sigma2)
    grad[layout.a4] = c
    grad[layout.s2] = 0.5 * slope ** 2
    return value, grad


def _binary_log_mean(coefs: _Coefs, layout, c, x1, x2) -> Tuple[float, np.ndarray]:
    """log E[Y(x1, M(x2)) | c] para mediador Bernoulli, e gradiente."""
    eta = coefs.theta0 + coefs.theta1 * x2 + coefs.theta4 @ c
    slope = coefs.alpha2 + coefs.alpha3 * x1
    value = (
        coefs.alpha0 + coefs.alpha1 * x1 + coefs.alpha4 @ c
        + np.logaddexp(0.0, slope + eta) - np.logaddexp(0.0, eta)
    )
    q = expit(slope + eta)
    p = expit(eta)
    grad = np.zeros(layout.size)
    grad[0] = q - p
    grad[1] = x2 * (q - p)
    grad[layout.theta4] = c * (q - p)
    grad[layout.a0] = 1.0
    grad[layout.a0 + 1] = x1
    grad[layout.a0 + 2] = q
    if layout.interaction:
        grad[layout.a3] = x1 * q
    grad[layout.a4] = c
    return value, grad


def _controlled_log_mean(coefs: _Coefs, layout, c, x1, m) -> Tuple[float, np.ndarray]:
    """log E[Y(x1, m) | c] com o mediador fixo em m."""
    value = (
        coefs.alpha0 + coefs.alpha1 * x1 + coefs.alpha4 @ c
        + (coefs.alpha2 + coefs.alpha3 * x1) * m
    )
    grad = np.zeros(layout.size)
    grad[layout.a0] = 1.0
    grad[layout.a0 + 1] = x1
    grad[layout.a0 + 2] = m
    if layout.interaction:
        grad[layout.a3] = x1 * m
    grad[layout.a4] = c
    return value, grad


def _ratio_closed_forms(coefs: _Coefs, layout, c, x, x_star, m) -> np.ndarray:
    """log IRR de NDE, NIE e CDE em forma fechada."""
    dx = x - x_star
    lcde = (coefs.alpha1 + coefs.alpha3 * m) * dx
    if layout.continuous:
        mean_star = coefs.theta0 + coefs.theta1 * x_star + coefs.theta4 @ c
        lnde = (
            (coefs.alpha1 + coefs.alpha3 * (mean_star + coefs.alpha2 * coefs.sigma2)) * dx
            + 0.5 * coefs.alpha3 ** 2 * coefs.sigma2 * (x ** 2 - x_star ** 2)
        )
        lnie = (coefs.alpha2 + coefs.alpha3 * x) * coefs.theta1 * dx
    else:
        eta = coefs.theta0 + coefs.theta4 @ c
        eta_x = eta + coefs.theta1 * x
        eta_star = eta + coefs.theta1 * x_star
        slope_x = coefs.alpha2 + coefs.alpha3 * x
        slope_star = coefs.alpha2 + coefs.alpha3 * x_star
        lnde = coefs.alpha1 * dx + (
            np.logaddexp(0.0, slope_x + eta_star) - np.logaddexp(0.0, slope_star + eta_star)
        )
        lnie = (np.logaddexp(0.0, slope_x + eta_x) - np.logaddexp(0.0, eta_x)) - (
            np.logaddexp(0.0, slope_x + eta_star) - np.logaddexp(0.0, eta_star)
        )
    return np.array([lnde, lnie, lcde])


def effect_values(params, layout: ParameterLayout, spec: MediationSpec) -> np.ndarray:
    """
    Efeitos (NDE, NIE, CDE, TE) na escala de trabalho: log IRR na escala de
    razão, diferença de médias na escala de diferença.
    """
    params = np.asarray(params, dtype=float)
    coefs = _unpack(params, layout)
    c = np.asarray(spec.c or [], dtype=float)
    x, x_star = spec.x, spec.x_star

    if spec.scale == Scale.RATIO:
        nde, nie, cde = _ratio_closed_forms(coefs, layout, c, x, x_star, spec.m_cde)
        return np.array([nde, nie, cde, nde + nie])

    log_mean = _continuous_log_mean if layout.continuous else _binary_log_mean
    treated = np.exp(log_mean(coefs, layout, c, x, x)[0])
    cross = np.exp(log_mean(coefs, layout, c, x, x_star)[0])
    reference = np.exp(log_mean(coefs, layout, c, x_star, x_star)[0])
    controlled = np.exp(_controlled_log_mean(coefs, layout, c, x, spec.m_cde)[0]) - np.exp(
        _controlled_log_mean(coefs, layout, c, x_star, spec.m_cde)[0]
    )
    nde = cross - reference
    nie = treated - cross
    return np.array([nde, nie, controlled, nde + nie])


def effect_jacobian(params, layout: ParameterLayout, spec: MediationSpec) -> np.ndarray:
    """Matriz 4×size com os vetores Γ de NDE, NIE, CDE e TE (mesma escala de effect_values)."""
    params = np.asarray(params, dtype=float)
    coefs = _unpack(params, layout)
    c = np.asarray(spec.c or [], dtype=float)
    x, x_star = spec.x, spec.x_star
    log_mean = _continuous_log_mean if layout.continuous else _binary_log_mean

    l_treated, g_treated = log_mean(coefs, layout, c, x, x)
    l_cross, g_cross = log_mean(coefs, layout, c, x, x_star)
    l_reference, g_reference = log_mean(coefs, layout, c, x_star, x_star)
    l_cde1, g_cde1 = _controlled_log_mean(coefs, layout, c, x, spec.m_cde)
    l_cde0, g_cde0 = _controlled_log_mean(coefs, layout, c, x_star, spec.m_cde)

    if spec.scale == Scale.RATIO:
        nde = g_cross - g_reference
        nie = g_treated - g_cross
        cde = g_cde1 - g_cde0
    else:
        nde = np.exp(l_cross) * g_cross - np.exp(l_reference) * g_reference
        nie = np.exp(l_treated) * g_treated - np.exp(l_cross) * g_cross
        cde = np.exp(l_cde1) * g_cde1 - np.exp(l_cde0) * g_cde0
    return np.vstack([nde, nie, cde, nde + nie])


# Parâmetros ajustados


def _outcome_alpha(out_fit: OutcomeFit) -> np.ndarray:
    if isinstance(out_fit, MzipFit):
        return out_fit.alpha
    if out_fit.family != "poisson":
        raise SpecMismatchError(f"modelo de desfecho inválido: {out_fit.family}")
    return out_fit.coefficients


def _check_mediator(med_fit: MediatorFit, spec: MediationSpec):
    if spec.mediator_type == MediatorType.CONTINUOUS and not isinstance(med_fit, LinearFit):
        raise SpecMismatchError("mediador contínuo exige ajuste linear")
    if spec.mediator_type == MediatorType.BINARY:
        if not isinstance(med_fit, GlmFit) or med_fit.family != "logistic":
            raise SpecMismatchError("mediador binário exige ajuste logístico")
        if not med_fit.converged:
            raise NotConvergedError("modelo do mediador não convergiu")


def mediation_parameters(
    out_fit: OutcomeFit, med_fit: MediatorFit, spec: MediationSpec
) -> Tuple[np.ndarray, ParameterLayout]:
    """Monta o vetor (θ, α, [σ²]) e o layout correspondente, validando a especificação."""
    _check_mediator(med_fit, spec)
    if not out_fit.converged:
        raise NotConvergedError("modelo do desfecho não convergiu")

    continuous = spec.mediator_type == MediatorType.CONTINUOUS
    theta = med_fit.theta if continuous else med_fit.coefficients
    k = theta.shape[0] - 2
    alpha = _outcome_alpha(out_fit)
    expected = 3 + int(spec.interaction) + k
    if alpha.shape[0] != expected:
        raise SpecMismatchError(
            f"interaction={spec.interaction} exige {expected} coeficientes no desfecho, há {alpha.shape[0]}"
        )
    if len(spec.c or []) != k:
        raise SpecMismatchError(f"c tem {len(spec.c or [])} valores, o modelo tem {k} covariáveis")

    layout = ParameterLayout(k=k, interaction=spec.interaction, mediator_type=spec.mediator_type)
    parts = [theta, alpha]
    if continuous:
        parts.append([med_fit.sigma2])
    return np.concatenate(parts).astype(float), layout


def parameter_covariance(
    out_fit: OutcomeFit, med_fit: MediatorFit, spec: MediationSpec
) -> np.ndarray:
    """Σ bloco-diagonal (Σθ, Σα, [Var σ̂²]); Σα robusta quando se_method = delta_robust."""
    robust = spec.se_method == SeMethod.DELTA_ROBUST
    if isinstance(med_fit, LinearFit):
        blocks = [med_fit.cov_theta]
    else:
        blocks = [med_fit.cov_model]
    if isinstance(out_fit, MzipFit):
        blocks.append(out_fit.alpha_cov(robust))
    else:
        blocks.append(out_fit.cov_robust if robust else out_fit.cov_model)
    if isinstance(med_fit, LinearFit):
        blocks.append(np.array([[med_fit.sigma2_var]]))
    sigma = block_diag(*blocks)
    if not np.all(np.isfinite(sigma)):
        raise SingularCovarianceError("covariância dos parâmetros contém valores não finitos")
    return sigma


def _delta_se(out_fit, med_fit, spec: MediationSpec) -> np.ndarray:
    if spec.se_method == SeMethod.BOOTSTRAP:
        raise SpecMismatchError("método delta chamado com se_method=bootstrap")
    params, layout = mediation_parameters(out_fit, med_fit, spec)
    sigma = parameter_covariance(out_fit, med_fit, spec)
    jacobian = effect_jacobian(params, layout, spec)
    variances = np.einsum("ij,jk,ik->i", jacobian, sigma, jacobian)
    scale = np.einsum("ij,jj,ij->i", np.abs(jacobian), np.abs(sigma), np.abs(jacobian))
    if np.any(variances < -1e-10 * np.maximum(scale, 1.0)):
        raise SingularCovarianceError("variância negativa no método delta")
    return np.sqrt(np.clip(variances, 0.0, None))


def delta_se_continuous(out_fit: OutcomeFit, med_fit: LinearFit, spec: MediationSpec) -> np.ndarray:
    """SEs (NDE, NIE, CDE, TE) por método delta; log IRR na escala de razão."""
    if spec.mediator_type != MediatorType.CONTINUOUS:
        raise SpecMismatchError("delta_se_continuous exige mediador contínuo")
    return _delta_se(out_fit, med_fit, spec)


def delta_se_binary(out_fit: OutcomeFit, med_fit: GlmFit, spec: MediationSpec) -> np.ndarray:
    if spec.mediator_type != MediatorType.BINARY:
        raise SpecMismatchError("delta_se_binary exige mediador binário")
    return _delta_se(out_fit, med_fit, spec)


# Intervalos e proporção mediada


def confidence_interval(estimate: float, se: float, scale: Scale, level: float = 0.95) -> Tuple[float, float]:
    """
    IC normal: exp(log est ± z·se) na escala de razão, est ± z·se na de diferença.

    Args:
        estimate: Efeito na escala natural (IRR ou RD)
        se: Erro padrão na escala de trabalho (log IRR ou RD)
        scale: Escala do efeito
        level: Nível de confiança

    Returns:
        Tupla (limite inferior, limite superior)

    Raises:
        NonPositiveEstimateError: estimativa ≤ 0 na escala de razão
    """
    if se < 0:
        raise ValueError("se deve ser não negativo")
    z = norm.ppf((1.0 + level) / 2.0)
    if Scale(scale) == Scale.RATIO:
        if estimate <= 0:
            raise NonPositiveEstimateError(f"estimativa {estimate} não positiva na escala de razão")
        center = np.log(estimate)
        return float(np.exp(center - z * se)), float(np.exp(center + z * se))
    return float(estimate - z * se), float(estimate + z * se)


def proportion_mediated(effects: EffectSet) -> float:
    """NIE/TE (diferença) ou NDE(NIE−1)/(NDE·NIE−1) (razão); sem truncamento em [0, 1]."""
    nde, nie = effects.nde.estimate, effects.nie.estimate
    if effects.scale == Scale.RATIO:
        te = nde * nie
        if abs(te - 1.0) <= 1e-12:
            raise NullTotalEffectError("efeito total nulo (IRR = 1)")
        return nde * (nie - 1.0) / (te - 1.0)
    te = nde + nie
    if abs(te) <= 1e-12:
        raise NullTotalEffectError("efeito total nulo (RD = 0)")
    return nie / te


def _natural(working: np.ndarray, scale: Scale) -> np.ndarray:
    """Escala de trabalho → escala reportada; TE de razão como produto NDE·NIE."""
    if scale == Scale.DIFFERENCE:
        return working
    natural = np.exp(working)
    natural[..., 3] = natural[..., 0] * natural[..., 1]
    return natural


def build_effect_set(
    working: np.ndarray,
    spec: MediationSpec,
    ses: Optional[np.ndarray] = None,
    intervals: Optional[np.ndarray] = None,
) -> EffectSet:
    """Monta o EffectSet; sem `intervals`, ICs normais a partir de `ses`."""
    estimates = _natural(np.array(working, dtype=float), spec.scale)
    effects = {}
    for i, name in enumerate(EFFECT_NAMES):
        effect = Effect(estimate=float(estimates[i]))
        if ses is not None:
            effect.se = float(ses[i])
            if intervals is not None:
                effect.ci_low, effect.ci_high = float(intervals[0, i]), float(intervals[1, i])
            else:
                effect.ci_low, effect.ci_high = confidence_interval(
                    effect.estimate, effect.se, spec.scale, spec.level
                )
        effects[name] = effect
    effect_set = EffectSet(scale=spec.scale, **effects)
    try:
        effect_set.pm = proportion_mediated(effect_set)
    except NullTotalEffectError:
        effect_set.pm = None
    return effect_set


def _point_effects(out_fit, med_fit, spec: MediationSpec) -> EffectSet:
    params, layout = mediation_parameters(out_fit, med_fit, spec)
    return build_effect_set(effect_values(params, layout, spec), spec)


def effects_continuous(out_fit: OutcomeFit, med_fit: LinearFit, spec: MediationSpec) -> EffectSet:
    """
    Estimativas pontuais para mediador normal (escala de razão ou diferença).

    Args:
        out_fit: Ajuste do desfecho (MZIP ou Poisson)
        med_fit: Regressão linear do mediador
        spec: Contraste, c e m para o CDE

    Returns:
        EffectSet sem SE
    """
    if spec.mediator_type != MediatorType.CONTINUOUS:
        raise SpecMismatchError("effects_continuous exige mediador contínuo")
    return _point_effects(out_fit, med_fit, spec)


def effects_binary(out_fit: OutcomeFit, med_fit: GlmFit, spec: MediationSpec) -> EffectSet:
    """Estimativas pontuais para mediador Bernoulli (escala de razão ou diferença)."""
    if spec.mediator_type != MediatorType.BINARY:
        raise SpecMismatchError("effects_binary exige mediador binário")
    return _point_effects(out_fit, med_fit, spec)


def delta_effects(out_fit: OutcomeFit, med_fit: MediatorFit, spec: MediationSpec) -> EffectSet:
    """Estimativas com SEs e ICs do método delta (modelo ou robusto)."""
    params, layout = mediation_parameters(out_fit, med_fit, spec)
    if spec.mediator_type == MediatorType.CONTINUOUS:
        ses = delta_se_continuous(out_fit, med_fit, spec)
    else:
        ses = delta_se_binary(out_fit, med_fit, spec)
    return build_effect_set(effect_values(params, layout, spec), spec, ses=ses)


# Ajuste dos modelos a partir dos dados


def resolve_spec(data: Dataset, spec: MediationSpec) -> MediationSpec:
    """Preenche `c` com as médias das covariáveis quando não informado."""
    if spec.c is not None:
        return spec
    return spec.model_copy(update={"c": data.covariate_means()})


def fit_models(data: Dataset, spec: MediationSpec, settings: Optional[OptimSettings] = None) -> FittedModels:
    """Ajusta o modelo do mediador e o do desfecho (MZIP ou Poisson) conforme `spec`."""
    y = data.outcome
    x = data.exposure
    m = data.mediator
    covariates = data.covariates

    med_design = mediator_design(x, covariates)
    if spec.mediator_type == MediatorType.CONTINUOUS:
        med_fit = fit_linear(med_design, m)
    else:
        if not np.all((m == 0) | (m == 1)):
            raise InvalidInputError("mediador binário deve ser 0/1", column=data.roles.mediator)
        med_fit = fit_logistic(med_design, m, settings)
        if not med_fit.converged:
            raise NotConvergedError("modelo do mediador não convergiu")

    design = outcome_design(x, m, covariates, spec.interaction)
    if spec.outcome_model == OutcomeModel.MZIP:
        out_fit = mzip_fit(design, y, settings)
    else:
        out_fit = fit_poisson(design, y, settings)
    if not out_fit.converged:
        raise NotConvergedError(f"modelo {spec.outcome_model.value} não convergiu")
    return FittedModels(mediator_fit=med_fit, outcome_fit=out_fit)


def _bootstrap_replicate(
    data: Dataset, spec: MediationSpec, settings, stream: Tuple[int, ...], replicate: int
) -> Optional[np.ndarray]:
    rng = np.random.default_rng([*stream, spec.seed, replicate])
    rows = rng.integers(0, data.n, size=data.n)
    try:
        models = fit_models(data.take(rows), spec, settings)
        params, layout = mediation_parameters(models.outcome_fit, models.mediator_fit, spec)
        return effect_values(params, layout, spec)
    except (MediationError, np.linalg.LinAlgError) as exc:
        logger.debug("réplica bootstrap %d descartada: %s", replicate, exc)
        return None


def run_bootstrap(
    data: Dataset,
    spec: MediationSpec,
    models: FittedModels,
    settings: Optional[OptimSettings] = None,
    n_jobs: int = 1,
    stream: Tuple[int, ...] = (),
) -> Tuple[EffectSet, int]:
    """
    Bootstrap não paramétrico por reamostragem conjunta das linhas.

    A réplica r usa default_rng([*stream, seed, r]); o resultado não depende de
    n_jobs. `stream` separa os bootstraps aninhados em réplicas de simulação.
    `c` fica fixo no valor resolvido com os dados completos.

    Returns:
        EffectSet com ICs percentis e SEs (desvio padrão das réplicas), e o
        número de réplicas descartadas
    """
    reps = spec.bootstrap_reps
    draws = Parallel(n_jobs=n_jobs)(
        delayed(_bootstrap_replicate)(data, spec, settings, stream, r) for r in range(reps)
    )
    kept = [draw for draw in draws if draw is not None]
    failed = reps - len(kept)
    if failed > MAX_FAILURE_RATE * reps:
        raise TooManyFailuresError(
            f"{failed} de {reps} réplicas bootstrap falharam", failed=failed, total=reps
        )
    if failed:
        logger.warning("%d de %d réplicas bootstrap descartadas", failed, reps)

    working = np.vstack(kept)
    tail = (1.0 - spec.level) / 2.0
    intervals = np.quantile(_natural(working, spec.scale), [tail, 1.0 - tail], axis=0)
    ses = working.std(axis=0, ddof=1)

    params, layout = mediation_parameters(models.outcome_fit, models.mediator_fit, spec)
    point = effect_values(params, layout, spec)
    return build_effect_set(point, spec, ses=ses, intervals=intervals), failed


def bootstrap_effects(
    data: Dataset,
    spec: MediationSpec,
    b: Optional[int] = None,
    seed: Optional[int] = None,
    settings: Optional[OptimSettings] = None,
    n_jobs: int = 1,
) -> EffectSet:
    """
    Ajusta os modelos nos dados completos e devolve efeitos com ICs bootstrap.

    Args:
        data: Conjunto de dados validado
        spec: Contraste, escala e nível
        b: Réplicas (padrão: spec.bootstrap_reps)
        seed: Semente (padrão: spec.seed)
        settings: Critérios do otimizador
        n_jobs: Processos do joblib; não altera o resultado

    Returns:
        EffectSet com IC percentil e SE das réplicas

    Raises:
        TooManyFailuresError: mais de 10% das réplicas falharam
    """
    update = {"se_method": SeMethod.BOOTSTRAP}
    if b is not None:
        update["bootstrap_reps"] = b
    if seed is not None:
        update["seed"] = seed
    spec = MediationSpec.model_validate({**resolve_spec(data, spec).model_dump(), **update})
    models = fit_models(data, spec, settings)
    effects, _ = run_bootstrap(data, spec, models, settings, n_jobs)
    return effects


def mediate(
    data: Dataset,
    spec: MediationSpec,
    roles: Optional[ColumnRoles] = None,
    settings: Optional[OptimSettings] = None,
    n_jobs: int = 1,
) -> MediationResult:
    """
    Orquestra ajuste dos modelos, efeitos, SEs e ICs para um contraste de exposição.

    Args:
        data: Dados validados
        spec: Contraste e opções; `c` ausente vira a média das covariáveis
        roles: Papéis das colunas, substituindo os de `data`
        settings: Critérios do otimizador
        n_jobs: Paralelismo das réplicas bootstrap

    Returns:
        MediationResult com EffectSet e diagnósticos dos ajustes
    """
    if roles is not None:
        data = Dataset(frame=data.frame, roles=roles, dropped_rows=data.dropped_rows)
    spec = resolve_spec(data, spec)
    models = fit_models(data, spec, settings)

    dropped = None
    if spec.se_method == SeMethod.BOOTSTRAP:
        effects, dropped = run_bootstrap(data, spec, models, settings, n_jobs)
    else:
        effects = delta_effects(models.outcome_fit, models.mediator_fit, spec)

    logger.info(
        "mediação %s/%s: NDE=%.4f NIE=%.4f", spec.scale.value, spec.se_method.value,
        effects.nde.estimate, effects.nie.estimate,
    )
    return MediationResult(
        effects=effects,
        mediator_fit=models.mediator_fit,
        outcome_fit=models.outcome_fit,
        spec=spec,
        n=data.n,
        bootstrap_dropped=dropped,
    )
