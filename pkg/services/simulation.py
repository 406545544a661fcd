import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.special import expit

from models.dataset import ColumnRoles, Dataset
from models.mediation import EffectSet, MediationSpec, MediatorType, OutcomeModel, Scale, SeMethod
from models.settings import OptimSettings
from models.simulation import MediatorConfig, ScenarioConfig, SimulationReport, SimulationRow
from services.errors import MediationError, SpecMismatchError, TooManyFailuresError
from services.mediation import (
    MAX_FAILURE_RATE,
    ParameterLayout,
    build_effect_set,
    delta_effects,
    effect_values,
    fit_models,
    run_bootstrap,
)

logger = logging.getLogger(__name__)

SIMULATION_ROLES = ColumnRoles(outcome="y", exposure="x", mediator="m", covariates=["c"])

_CONTINUOUS = MediatorConfig(type=MediatorType.CONTINUOUS, theta=[0.0, 1.0, 0.5], sigma2=3.0)
_BINARY = MediatorConfig(type=MediatorType.BINARY, theta=[0.0, 2.0, 0.25])

_GAMMA_LOW_M = [0.35, -1.5, 0.0, 0.25]
_GAMMA_HIGH_M = [0.35, -1.5, 0.25, 0.25]

PRESETS: Dict[str, ScenarioConfig] = {
    "scenario1": ScenarioConfig(
        name="scenario1", gamma=_GAMMA_LOW_M, alpha=[-0.6, 0.41, 0.15, 0.25], mediator=_CONTINUOUS
    ),
    "scenario2": ScenarioConfig(
        name="scenario2", gamma=_GAMMA_HIGH_M, alpha=[-0.6, 0.41, 0.15, 0.25], mediator=_CONTINUOUS
    ),
    "scenario3": ScenarioConfig(
        name="scenario3", gamma=[0.35, -0.45, 0.0, 0.25], alpha=[-0.6, 0.41, 0.15, 0.25],
        mediator=_CONTINUOUS,
    ),
    "scenario4": ScenarioConfig(
        name="scenario4", gamma=_GAMMA_LOW_M, alpha=[0.4, 0.41, 0.15, 0.25], mediator=_CONTINUOUS
    ),
    "scenario5": ScenarioConfig(
        name="scenario5", gamma=_GAMMA_HIGH_M, alpha=[0.4, 0.41, 0.15, 0.25], mediator=_CONTINUOUS
    ),
    "binary1": ScenarioConfig(
        name="binary1", gamma=_GAMMA_LOW_M, alpha=[-0.6, 0.41, 0.6, 0.25], mediator=_BINARY
    ),
    "binary2": ScenarioConfig(
        name="binary2", gamma=[0.35, -1.5, 1.5, 0.25], alpha=[-0.6, 0.41, 0.6, 0.25], mediator=_BINARY
    ),
    "binary3": ScenarioConfig(
        name="binary3", gamma=[0.35, -1.5, 1.5, 0.25], alpha=[0.4, 0.41, 0.6, 0.25], mediator=_BINARY
    ),
    "overdispersed": ScenarioConfig(
        name="overdispersed", gamma=_GAMMA_HIGH_M, alpha=[-0.6, 0.41, 0.15, 0.25],
        mediator=_CONTINUOUS, outcome_family="zinb", omega=2.0,
    ),
}


def get_preset(name: str) -> ScenarioConfig:
    """Retorna o cenário nomeado ou KeyError listando os válidos."""
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"preset desconhecido '{name}'; válidos: {', '.join(sorted(PRESETS))}") from None


def generate(config: ScenarioConfig, seed: Union[int, Sequence[int]]) -> Dataset:
    """
    Gera um conjunto de dados do cenário.

    X ~ Bernoulli(0.5), C ~ χ²₂ (exponencial de média 2), M normal ou Bernoulli,
    zero excedente ~ Bernoulli(ψ) e contagem latente Poisson(μ) ou binomial
    negativa com média μ e Var = μ + μ²/ω.
    """
    rng = np.random.default_rng(seed)
    n = config.n
    theta = np.asarray(config.mediator.theta)

    x = rng.binomial(1, 0.5, size=n).astype(float)
    c = rng.exponential(scale=2.0, size=n)
    eta_m = theta[0] + theta[1] * x + theta[2] * c
    if config.mediator.type == MediatorType.CONTINUOUS:
        m = eta_m + rng.normal(0.0, np.sqrt(config.mediator.sigma2), size=n)
    else:
        m = rng.binomial(1, expit(eta_m)).astype(float)

    columns = [np.ones(n), x, m]
    if config.interaction:
        columns.append(x * m)
    design = np.column_stack(columns + [c])
    g = design @ np.asarray(config.gamma)
    mu = np.exp(design @ np.asarray(config.alpha) + np.logaddexp(0.0, g))

    excess = rng.random(n) < expit(g)
    if config.outcome_family == "zinb":
        counts = rng.negative_binomial(config.omega, config.omega / (config.omega + mu))
    else:
        counts = rng.poisson(mu)
    y = np.where(excess, 0, counts).astype(np.int64)

    frame = pd.DataFrame({"y": y, "x": x, "m": m, "c": c})
    return Dataset(frame=frame, roles=SIMULATION_ROLES)


def _scenario_spec(config: ScenarioConfig, spec: Optional[MediationSpec]) -> MediationSpec:
    spec = spec or MediationSpec()
    update = {"mediator_type": config.mediator.type, "interaction": config.interaction}
    if spec.c is None:
        update["c"] = [config.c_eval]
    elif len(spec.c) != 1:
        raise SpecMismatchError(f"c tem {len(spec.c)} valores, os cenários têm 1 covariável")
    return spec.model_copy(update=update)


def true_effects(config: ScenarioConfig, spec: Optional[MediationSpec] = None) -> EffectSet:
    """
    Efeitos verdadeiros: as fórmulas fechadas avaliadas nos parâmetros do cenário.

    Args:
        config: Cenário com θ, α e σ² verdadeiros
        spec: Contraste e escala; sem c usa o c_eval do cenário

    Returns:
        EffectSet sem SE nem IC
    """
    spec = _scenario_spec(config, spec)
    layout = ParameterLayout(k=1, interaction=config.interaction, mediator_type=config.mediator.type)
    parts = [config.mediator.theta, config.alpha]
    if layout.continuous:
        parts.append([config.mediator.sigma2])
    params = np.concatenate(parts).astype(float)
    return build_effect_set(effect_values(params, layout, spec), spec)


ReplicateResult = Dict[Tuple[str, str], Optional[EffectSet]]


def _replicate(
    config: ScenarioConfig,
    spec: MediationSpec,
    methods: List[OutcomeModel],
    se_methods: List[SeMethod],
    seed: int,
    replicate: int,
    settings: Optional[OptimSettings],
) -> ReplicateResult:
    data = generate(config, [seed, replicate])
    results: ReplicateResult = {}
    for method in methods:
        method_spec = spec.model_copy(update={"outcome_model": method})
        try:
            models = fit_models(data, method_spec, settings)
        except MediationError as exc:
            logger.debug("réplica %d, %s descartada: %s", replicate, method.value, exc)
            for se_method in se_methods:
                results[(method.value, se_method.value)] = None
            continue

        for se_method in se_methods:
            se_spec = method_spec.model_copy(update={"se_method": se_method})
            try:
                if se_method == SeMethod.BOOTSTRAP:
                    effects, _ = run_bootstrap(
                        data, se_spec, models, settings, n_jobs=1, stream=(seed, replicate)
                    )
                else:
                    effects = delta_effects(models.outcome_fit, models.mediator_fit, se_spec)
            except MediationError as exc:
                logger.debug("réplica %d, %s/%s descartada: %s", replicate, method.value, se_method.value, exc)
                effects = None
            results[(method.value, se_method.value)] = effects
    return results


def _summarize(effect_sets: List[EffectSet], effect: str, truth: float, scale: Scale) -> dict:
    estimates = np.array([getattr(s, effect).estimate for s in effect_sets])
    ses = np.array([getattr(s, effect).se for s in effect_sets])
    low = np.array([getattr(s, effect).ci_low for s in effect_sets])
    high = np.array([getattr(s, effect).ci_high for s in effect_sets])

    null = 1.0 if scale == Scale.RATIO else 0.0
    working = np.log(estimates) if scale == Scale.RATIO else estimates
    median_bias = None
    if truth != 0:
        median_bias = float(100.0 * (np.median(estimates) - truth) / truth)
    return {
        "median_pct_bias": median_bias,
        "coverage": float(np.mean((low <= truth) & (truth <= high))),
        "power": float(np.mean((low > null) | (high < null))),
        "median_se": float(np.median(ses)),
        "empirical_se": float(np.std(working, ddof=1)) if len(working) > 1 else None,
    }


def run_study(
    config: ScenarioConfig,
    reps: int,
    methods: Optional[List[OutcomeModel]] = None,
    se_methods: Optional[List[SeMethod]] = None,
    spec: Optional[MediationSpec] = None,
    seed: int = 0,
    n_jobs: int = 1,
    settings: Optional[OptimSettings] = None,
) -> SimulationReport:
    """
    Estudo de Monte Carlo: viés mediano %, cobertura, poder e SEs de NDE e NIE.

    A réplica r gera dados com default_rng([seed, r]); o relatório é idêntico
    para qualquer n_jobs.

    Args:
        config: Cenário simulado
        reps: Número de réplicas (≥ 1)
        methods: Modelos de desfecho comparados (padrão: MZIP e Poisson)
        se_methods: Métodos de SE avaliados (padrão: delta do modelo e robusto)
        spec: Contraste e escala; c vazio usa o c_eval do cenário
        seed: Semente base
        n_jobs: Processos do joblib
        settings: Critérios do otimizador

    Returns:
        SimulationReport com uma linha por (método, efeito, SE)

    Raises:
        SpecMismatchError: c com número de valores diferente de 1
        TooManyFailuresError: mais de 10% das réplicas descartadas em algum método
    """
    if reps < 1:
        raise ValueError("reps deve ser ≥ 1")
    methods = [OutcomeModel(m) for m in (methods or [OutcomeModel.MZIP, OutcomeModel.POISSON])]
    se_methods = [SeMethod(s) for s in (se_methods or [SeMethod.DELTA_MODEL, SeMethod.DELTA_ROBUST])]
    spec = _scenario_spec(config, spec)
    truth = true_effects(config, spec)

    logger.info("estudo %s: n=%d reps=%d n_jobs=%d", config.name, config.n, reps, n_jobs)
    results = Parallel(n_jobs=n_jobs)(
        delayed(_replicate)(config, spec, methods, se_methods, seed, r, settings) for r in range(reps)
    )

    rows = []
    for method in methods:
        for se_method in se_methods:
            key = (method.value, se_method.value)
            kept = [r[key] for r in results if r[key] is not None]
            dropped = reps - len(kept)
            if dropped > MAX_FAILURE_RATE * reps:
                raise TooManyFailuresError(
                    f"{dropped} de {reps} réplicas falharam para {key[0]}/{key[1]}",
                    failed=dropped,
                    total=reps,
                )
            if dropped:
                logger.warning("%s/%s: %d réplicas descartadas", key[0], key[1], dropped)
            for effect in ("nde", "nie"):
                true_value = getattr(truth, effect).estimate
                rows.append(
                    SimulationRow(
                        method=key[0],
                        effect=effect,
                        se_method=key[1],
                        truth=true_value,
                        reps_used=len(kept),
                        reps_dropped=dropped,
                        **_summarize(kept, effect, true_value, spec.scale),
                    )
                )

    return SimulationReport(
        scenario=config.name, n=config.n, reps=reps, seed=seed, scale=spec.scale, rows=rows
    )
