from pydantic import BaseModel, Field


class OptimSettings(BaseModel):
    """Critérios de parada do otimizador Newton."""

    max_iterations: int = Field(default=200, ge=1)
    tol_loglik: float = Field(default=1e-8, gt=0)
    tol_grad: float = Field(default=1e-6, gt=0)
    step_halving_max: int = Field(default=30, ge=1)
