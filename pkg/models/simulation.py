from typing import List, Literal, Optional

import pandas as pd
from pydantic import BaseModel, Field, model_validator

from models.mediation import MediatorType, Scale


class MediatorConfig(BaseModel):
    """Modelo do mediador: theta = (θ0, θ1 exposição, θ4 covariável)."""

    type: MediatorType = MediatorType.CONTINUOUS
    theta: List[float]
    sigma2: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if len(self.theta) != 3:
            raise ValueError("theta deve ter 3 elementos (θ0, θ1, θ4)")
        if self.type == MediatorType.CONTINUOUS and self.sigma2 is None:
            raise ValueError("mediador contínuo exige sigma2")
        return self


class ScenarioConfig(BaseModel):
    """
    Cenário de simulação com uma covariável C ~ χ²₂.

    gamma/alpha seguem o layout do desenho (1, x, m, [x·m], c): 4 elementos sem
    interação, 5 com interação.
    """

    name: str = "custom"
    gamma: List[float]
    alpha: List[float]
    mediator: MediatorConfig
    outcome_family: Literal["zip", "zinb"] = "zip"
    omega: Optional[float] = Field(default=None, gt=0)
    n: int = Field(default=1000, ge=10)
    c_eval: float = 2.0

    @model_validator(mode="after")
    def _check(self):
        if len(self.gamma) != len(self.alpha):
            raise ValueError("gamma e alpha devem ter o mesmo tamanho")
        if len(self.alpha) not in (4, 5):
            raise ValueError("alpha deve ter 4 (sem interação) ou 5 (com interação) elementos")
        if self.outcome_family == "zinb" and self.omega is None:
            raise ValueError("desfecho zinb exige omega")
        return self

    @property
    def interaction(self) -> bool:
        return len(self.alpha) == 5


class SimulationRow(BaseModel):
    method: str
    effect: str
    se_method: str
    truth: float
    median_pct_bias: Optional[float] = None
    coverage: float = Field(ge=0, le=1)
    power: float = Field(ge=0, le=1)
    median_se: float
    empirical_se: Optional[float] = None
    reps_used: int
    reps_dropped: int = 0


class SimulationReport(BaseModel):
    scenario: str
    n: int
    reps: int
    seed: int
    scale: Scale
    rows: List[SimulationRow] = Field(default_factory=list)

    def row(self, method: str, effect: str, se_method: str) -> SimulationRow:
        for row in self.rows:
            if (row.method, row.effect, row.se_method) == (method, effect, se_method):
                return row
        raise KeyError((method, effect, se_method))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows])
