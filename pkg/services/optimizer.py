import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from models.settings import OptimSettings
from services.errors import NonFiniteError

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
# tolerância de arredondamento ao comparar log-verossimilhanças consecutivas
_ASCENT_SLACK = 64 * _EPS
_STALL_LIMIT = 3
# deslocamento inicial relativo e número de tentativas do passo de Levenberg
_SHIFT_START = 1e-6
_SHIFT_TRIES = 30

Objective = Callable[[np.ndarray], float]
Gradient = Callable[[np.ndarray], np.ndarray]
Hessian = Callable[[np.ndarray], np.ndarray]


@dataclass
class OptimResult:
    parameters: np.ndarray
    loglik: float
    gradient_norm: float
    hessian: np.ndarray
    converged: bool
    iterations: int
    trace: List[float] = field(default_factory=list)
    message: str = ""


def _default_steps(x: np.ndarray, h: Optional[Union[float, np.ndarray]]) -> np.ndarray:
    if h is None:
        return np.cbrt(_EPS) * (1.0 + np.abs(x))
    return np.broadcast_to(np.asarray(h, dtype=float), x.shape).copy()


def finite_diff_gradient(f: Objective, x, h: Optional[Union[float, np.ndarray]] = None) -> np.ndarray:
    """
    Gradiente por diferenças centrais.

    Args:
        f: Função escalar
        x: Ponto de avaliação
        h: Passo (escalar ou por coordenada); padrão eps^(1/3)·(1+|xᵢ|)

    Returns:
        Vetor com (f(x+hᵢeᵢ) − f(x−hᵢeᵢ)) / 2hᵢ
    """
    x = np.asarray(x, dtype=float)
    steps = _default_steps(x, h)
    grad = np.empty_like(x)
    for i in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[i] += steps[i]
        backward[i] -= steps[i]
        f_fwd = f(forward)
        f_bwd = f(backward)
        if not (np.isfinite(f_fwd) and np.isfinite(f_bwd)):
            raise NonFiniteError(f"função não finita perto da coordenada {i}")
        grad[i] = (f_fwd - f_bwd) / (2.0 * steps[i])
    return grad


def finite_diff_hessian(gradient: Gradient, x, h: Optional[Union[float, np.ndarray]] = None) -> np.ndarray:
    """Hessiana por diferenças centrais do gradiente, simetrizada."""
    x = np.asarray(x, dtype=float)
    steps = _default_steps(x, h)
    hess = np.empty((x.size, x.size))
    for j in range(x.size):
        forward = x.copy()
        backward = x.copy()
        forward[j] += steps[j]
        backward[j] -= steps[j]
        g_fwd = np.asarray(gradient(forward), dtype=float)
        g_bwd = np.asarray(gradient(backward), dtype=float)
        if not (np.all(np.isfinite(g_fwd)) and np.all(np.isfinite(g_bwd))):
            raise NonFiniteError(f"gradiente não finito perto da coordenada {j}")
        hess[:, j] = (g_fwd - g_bwd) / (2.0 * steps[j])
    return 0.5 * (hess + hess.T)


def _ascent_direction(grad: np.ndarray, hess: np.ndarray):
    """
    Direção de Newton se −H for positiva definida.

    Senão resolve (−H + λI)d = g, com λ partindo de 1e-6·max|diag(H)| e
    multiplicado por 10 até a fatoração de Cholesky funcionar. O gradiente
    normalizado fica como último recurso.
    """
    neg_hess = -hess
    try:
        direction = cho_solve(cho_factor(neg_hess), grad)
        if np.all(np.isfinite(direction)):
            return direction, "newton"
    except (LinAlgError, ValueError):
        pass

    scale = float(np.max(np.abs(np.diag(neg_hess)), initial=0.0))
    if np.isfinite(scale):
        lam = _SHIFT_START * max(scale, 1.0)
        identity = np.eye(grad.size)
        for _ in range(_SHIFT_TRIES):
            try:
                direction = cho_solve(cho_factor(neg_hess + lam * identity), grad)
                if np.all(np.isfinite(direction)):
                    return direction, "shifted_newton"
            except (LinAlgError, ValueError):
                pass
            lam *= 10.0
    return grad / max(1.0, float(np.linalg.norm(grad))), "gradient"


def _safe_eval(objective: Objective, x: np.ndarray) -> float:
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            value = float(objective(x))
    except (NonFiniteError, FloatingPointError, OverflowError):
        return np.nan
    return value


def _safe_grad(gradient: Gradient, x: np.ndarray) -> np.ndarray:
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return np.asarray(gradient(x), dtype=float)
    except (NonFiniteError, FloatingPointError, OverflowError):
        return np.full(x.shape, np.nan)


def maximize(
    objective: Objective,
    gradient: Gradient,
    init,
    settings: Optional[OptimSettings] = None,
    hessian: Optional[Hessian] = None,
    parameter_bound: Optional[float] = None,
) -> OptimResult:
    """
    Maximiza `objective` por Newton com redução do passo pela metade.

    Sem `hessian`, usa diferenças centrais do gradiente. Se algum |parâmetro|
    ultrapassar `parameter_bound`, para e devolve converged=False.

    Raises:
        NonFiniteError: objetivo não finito no ponto inicial ou em todos os passos tentados
    """
    settings = settings or OptimSettings()
    x = np.array(init, dtype=float)
    f = _safe_eval(objective, x)
    if not np.isfinite(f):
        raise NonFiniteError("objetivo não finito no ponto inicial")
    g = np.asarray(gradient(x), dtype=float)
    if not np.all(np.isfinite(g)):
        raise NonFiniteError("gradiente não finito no ponto inicial")

    def hess_at(point: np.ndarray) -> np.ndarray:
        matrix = hessian(point) if hessian is not None else finite_diff_hessian(gradient, point)
        matrix = np.asarray(matrix, dtype=float)
        return 0.5 * (matrix + matrix.T)

    trace = [f]
    converged = False
    message = "max_iterations"
    stalled = 0
    iterations = 0

    for iteration in range(1, settings.max_iterations + 1):
        if np.max(np.abs(g), initial=0.0) <= settings.tol_grad:
            converged = True
            message = "gradient"
            break
        iterations = iteration
        direction, kind = _ascent_direction(g, hess_at(x))

        step = 1.0
        accepted = False
        any_finite = False
        for _ in range(settings.step_halving_max + 1):
            candidate = x + step * direction
            f_new = _safe_eval(objective, candidate)
            if np.isfinite(f_new):
                any_finite = True
                if f_new >= f - _ASCENT_SLACK * (1.0 + abs(f)):
                    g_new = _safe_grad(gradient, candidate)
                    if np.all(np.isfinite(g_new)):
                        accepted = True
                        break
            step *= 0.5

        if not accepted:
            if not any_finite:
                raise NonFiniteError(f"objetivo não finito em todos os passos (iteração {iteration})")
            message = "step_halving_exhausted"
            break

        change = abs(f_new - f) / (abs(f) + settings.tol_loglik)
        x, f, g = candidate, f_new, g_new
        trace.append(f)
        logger.debug("iter=%d loglik=%.10g step=%.3g direction=%s", iteration, f, step, kind)

        if parameter_bound is not None and np.max(np.abs(x)) > parameter_bound:
            message = "parameter_bound"
            logger.warning("parâmetro excedeu o limite %.1f na iteração %d", parameter_bound, iteration)
            break

        stalled = stalled + 1 if change < settings.tol_loglik else 0
        if stalled >= _STALL_LIMIT:
            message = "stalled"
            break
    else:
        if np.max(np.abs(g), initial=0.0) <= settings.tol_grad:
            converged = True
            message = "gradient"

    if not converged and message in ("stalled", "step_halving_exhausted"):
        converged = bool(np.max(np.abs(g), initial=0.0) <= settings.tol_grad)

    gradient_norm = float(np.max(np.abs(g), initial=0.0))
    if not converged:
        logger.info("otimizador parou sem convergir (%s), |g|max=%.3g", message, gradient_norm)

    return OptimResult(
        parameters=x,
        loglik=float(f),
        gradient_norm=gradient_norm,
        hessian=hess_at(x),
        converged=converged,
        iterations=iterations,
        trace=trace,
        message=message,
    )
