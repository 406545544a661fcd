import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from models.dataset import ColumnRoles, Dataset
from models.mediation import MediationSpec, OutcomeModel, SeMethod
from models.run_config import RunConfig
from services.dataset_service import DatasetService
from services.errors import InvalidInputError, MediationError, NotConvergedError
from services.glm import GlmFit, fit_poisson
from services.mediation import mediate, outcome_design, outcome_design_names
from services.mzip import MzipFit, mzip_fit
from services.simulation import get_preset, run_study

logger = logging.getLogger("zimed")

SCHEMA_VERSION = "1.0"
EXIT_OK = 0
EXIT_NOT_CONVERGED = NotConvergedError.exit_code


def _floats(values) -> List[Optional[float]]:
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(values, dtype=float).ravel()]


def _standard_errors(cov: np.ndarray) -> List[Optional[float]]:
    with np.errstate(invalid="ignore"):
        return _floats(np.sqrt(np.diag(cov)))


def _emit(payload: Dict[str, Any], out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load_dataset(csv: str, config: RunConfig) -> Dataset:
    roles = ColumnRoles(
        outcome=config.outcome,
        exposure=config.exposure,
        mediator=config.mediator,
        covariates=config.covariates,
    )
    return DatasetService(roles).load_csv(csv)


def _mzip_report(fit: MzipFit, names: List[str]) -> Dict[str, Any]:
    return {
        "columns": names,
        "alpha": _floats(fit.alpha),
        "gamma": _floats(fit.gamma),
        "se_model": {
            "alpha": _standard_errors(fit.alpha_cov()),
            "gamma": _standard_errors(fit.gamma_cov()),
        },
        "se_robust": {
            "alpha": _standard_errors(fit.alpha_cov(robust=True)),
            "gamma": _standard_errors(fit.gamma_cov(robust=True)),
        },
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "gradient_norm": fit.gradient_norm,
    }


def _poisson_report(fit: GlmFit, names: List[str]) -> Dict[str, Any]:
    return {
        "columns": names,
        "coefficients": _floats(fit.coefficients),
        "se_model": _standard_errors(fit.cov_model),
        "se_robust": _standard_errors(fit.cov_robust),
        "loglik": fit.loglik,
        "converged": fit.converged,
        "iterations": fit.iterations,
    }


def cmd_fit(csv: str, config: RunConfig) -> int:
    """Ajusta o MZIP (e opcionalmente o Poisson) e emite o relatório JSON."""
    data = _load_dataset(csv, config)
    design = outcome_design(data.exposure, data.mediator, data.covariates, config.interaction)
    names = outcome_design_names(data.roles, config.interaction)

    fit = mzip_fit(design, data.outcome)
    payload: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "model": "mzip",
        "n": data.n,
        "dropped_rows": data.dropped_rows,
        **_mzip_report(fit, names),
    }
    converged = fit.converged
    if config.poisson:
        poisson = fit_poisson(design, data.outcome)
        payload["poisson"] = _poisson_report(poisson, names)
        converged = converged and poisson.converged

    _emit(payload, config.out)
    if not converged:
        logger.error("ajuste não convergiu")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_mediate(csv: str, config: RunConfig, threads: int = 1) -> int:
    """Estima NDE, NIE, CDE, TE e PM para o contraste (x, x*) e emite JSON."""
    data = _load_dataset(csv, config)
    spec = MediationSpec(
        x=config.x,
        x_star=config.xstar,
        c=config.cvals,
        m_cde=config.m_cde,
        mediator_type=config.mediator_type,
        scale=config.scale,
        interaction=config.interaction,
        se_method=config.se,
        level=config.level,
        outcome_model=config.outcome_model,
        bootstrap_reps=config.boot_reps,
        seed=config.seed,
    )
    result = mediate(data, spec, n_jobs=threads)
    effects = result.effects

    payload: Dict[str, Any] = {"schema_version": SCHEMA_VERSION}
    for name, effect in effects.effects().items():
        payload[name] = {
            "estimate": effect.estimate,
            "se": effect.se,
            "ci": [effect.ci_low, effect.ci_high],
        }
    payload.update(
        {
            "pm": effects.pm,
            "scale": effects.scale.value,
            "se_method": result.spec.se_method.value,
            "level": result.spec.level,
            "x": result.spec.x,
            "x_star": result.spec.x_star,
            "c": result.spec.c,
            "m_cde": result.spec.m_cde,
            "mediator_type": result.spec.mediator_type.value,
            "outcome_model": result.spec.outcome_model.value,
            "interaction": result.spec.interaction,
            "diagnostics": {
                "n": result.n,
                "dropped_rows": data.dropped_rows,
                "outcome_loglik": result.outcome_fit.loglik,
                "outcome_converged": result.outcome_fit.converged,
                "outcome_iterations": result.outcome_fit.iterations,
                "bootstrap_dropped": result.bootstrap_dropped,
            },
        }
    )
    _emit(payload, config.out)
    return EXIT_OK


def cmd_simulate(config: RunConfig, threads: int = 1) -> int:
    """Roda o estudo de Monte Carlo; CSV em --out e resumo JSON na saída padrão."""
    if config.scenario is not None:
        scenario = config.scenario
    elif config.preset is not None:
        try:
            scenario = get_preset(config.preset)
        except KeyError as exc:
            raise InvalidInputError(exc.args[0]) from None
    else:
        raise InvalidInputError("informe --preset ou um cenário em --config")
    if config.n is not None:
        scenario = scenario.model_copy(update={"n": config.n})

    spec = MediationSpec(
        x=config.x,
        x_star=config.xstar,
        c=config.cvals,
        m_cde=config.m_cde,
        scale=config.scale,
        level=config.level,
        bootstrap_reps=config.boot_reps,
    )
    report = run_study(
        scenario,
        reps=config.reps,
        methods=config.methods,
        se_methods=config.se_methods,
        spec=spec,
        seed=config.seed,
        n_jobs=threads,
    )
    if config.out:
        report.to_frame().to_csv(config.out, index=False)
    print(json.dumps({"schema_version": SCHEMA_VERSION, **report.model_dump(mode="json")}, indent=2))
    return EXIT_OK


def _add_roles(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("csv", help="arquivo CSV com cabeçalho ('-' para stdin)")
    parser.add_argument("--outcome", help="coluna do desfecho (contagem)")
    parser.add_argument("--exposure", help="coluna da exposição")
    parser.add_argument("--mediator", help="coluna do mediador")
    parser.add_argument("--covariates", nargs="*", help="colunas de covariáveis")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="arquivo JSON com os parâmetros (flags têm prioridade)")
    parser.add_argument("--out", help="arquivo de saída")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int, help="paralelismo (padrão: $ZIMED_THREADS ou 1)")


def _add_contrast(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x", type=float, help="nível tratado da exposição")
    parser.add_argument("--xstar", type=float, help="nível de referência da exposição")
    parser.add_argument("--cvals", type=float, nargs="*", help="valores das covariáveis (padrão: médias)")
    parser.add_argument("--m-cde", type=float, help="nível do mediador para o CDE")
    parser.add_argument("--scale", choices=["ratio", "difference"])
    parser.add_argument("--level", type=float)
    parser.add_argument("--boot-reps", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zimed",
        description="Mediação causal com desfecho de contagem inflado de zeros (MZIP)",
    )
    parser.add_argument("--log-level", default=None, help="nível de log (padrão: $LOG_LEVEL ou warning)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit = subparsers.add_parser("fit", help="ajusta o modelo MZIP")
    _add_roles(fit)
    _add_common(fit)
    fit.add_argument("--interaction", action="store_true", default=None)
    fit.add_argument("--poisson", action="store_true", default=None, help="ajusta também o Poisson")

    med = subparsers.add_parser("mediate", help="estima efeitos de mediação")
    _add_roles(med)
    _add_common(med)
    _add_contrast(med)
    med.add_argument("--mediator-type", choices=["continuous", "binary"])
    med.add_argument("--interaction", action="store_true", default=None)
    med.add_argument("--se", choices=[m.value for m in SeMethod])
    med.add_argument("--outcome-model", choices=[m.value for m in OutcomeModel])

    sim = subparsers.add_parser("simulate", help="estudo de simulação")
    _add_common(sim)
    _add_contrast(sim)
    sim.add_argument("--preset", help="cenário nomeado (scenario1..5, binary1..3, overdispersed)")
    sim.add_argument("--n", type=int)
    sim.add_argument("--reps", type=int)
    sim.add_argument("--methods", nargs="+", choices=[m.value for m in OutcomeModel])
    sim.add_argument("--se-methods", nargs="+", choices=[m.value for m in SeMethod])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Carrega --config (se houver) e sobrepõe as flags informadas."""
    base: Dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"config inválido: {exc}") from exc
    overrides = {
        key: value
        for key, value in vars(args).items()
        if value is not None and key in RunConfig.model_fields
    }
    return RunConfig.model_validate({**base, **overrides})


def _threads(config: RunConfig) -> int:
    if config.threads is not None:
        return config.threads
    try:
        return max(1, int(os.environ.get("ZIMED_THREADS", "1")))
    except ValueError:
        return 1


def _configure_logging(level: Optional[str]) -> None:
    name = (level or os.environ.get("LOG_LEVEL") or "warning").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _report_error(exc: Exception, exit_code: int) -> int:
    payload: Dict[str, Any] = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, InvalidInputError):
        if exc.row is not None:
            payload["row"] = exc.row
        if exc.column is not None:
            payload["column"] = exc.column
    print(json.dumps(payload, ensure_ascii=False), file=sys.stderr)
    return exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        config = resolve_config(args)
        if args.command == "fit":
            return cmd_fit(args.csv, config)
        if args.command == "mediate":
            return cmd_mediate(args.csv, config, threads=_threads(config))
        return cmd_simulate(config, threads=_threads(config))
    except MediationError as exc:
        return _report_error(exc, exc.exit_code)
    except ValidationError as exc:
        return _report_error(exc, InvalidInputError.exit_code)
    except (FileNotFoundError, IsADirectoryError) as exc:
        return _report_error(exc, InvalidInputError.exit_code)


if __name__ == "__main__":
    sys.exit(main())
