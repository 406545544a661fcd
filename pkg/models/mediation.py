from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field


class MediatorType(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Scale(str, Enum):
    RATIO = "ratio"
    DIFFERENCE = "difference"


class SeMethod(str, Enum):
    DELTA_MODEL = "delta_model"
    DELTA_ROBUST = "delta_robust"
    BOOTSTRAP = "bootstrap"


class OutcomeModel(str, Enum):
    MZIP = "mzip"
    POISSON = "poisson"


class MediationSpec(BaseModel):
    """
    Contraste de exposição e opções de estimação.

    `c` vazio/None significa "usar as médias das covariáveis" (resolvido em mediate).
    """

    x: float = 1.0
    x_star: float = 0.0
    c: Optional[List[float]] = None
    m_cde: float = 0.0
    mediator_type: MediatorType = MediatorType.CONTINUOUS
    scale: Scale = Scale.RATIO
    interaction: bool = False
    se_method: SeMethod = SeMethod.DELTA_MODEL
    level: float = Field(default=0.95, gt=0, lt=1)
    outcome_model: OutcomeModel = OutcomeModel.MZIP
    bootstrap_reps: int = Field(default=1000, ge=2)
    seed: int = Field(default=0, ge=0)


class Effect(BaseModel):
    estimate: float
    se: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    @property
    def ci(self) -> List[Optional[float]]:
        return [self.ci_low, self.ci_high]


class EffectSet(BaseModel):
    """NDE, NIE, CDE e TE numa única escala; para razões `se` refere-se ao log da IRR."""

    nde: Effect
    nie: Effect
    cde: Effect
    te: Effect
    pm: Optional[float] = None
    scale: Scale

    def effects(self) -> dict:
        return {"nde": self.nde, "nie": self.nie, "cde": self.cde, "te": self.te}
