from typing import List, Optional

from pydantic import BaseModel, Field

from models.mediation import MediatorType, OutcomeModel, Scale, SeMethod
from models.simulation import ScenarioConfig


class RunConfig(BaseModel):
    """
    Parâmetros de uma execução da CLI.

    As chaves espelham as flags longas (hífens viram sublinhados); o arquivo JSON
    passado em --config é carregado primeiro e as flags explícitas sobrescrevem.
    """

    # papéis das colunas
    outcome: str = "y"
    exposure: str = "x"
    mediator: str = "m"
    covariates: List[str] = Field(default_factory=list)

    # fit
    interaction: bool = False
    poisson: bool = False

    # mediate
    x: float = 1.0
    xstar: float = 0.0
    cvals: Optional[List[float]] = None
    m_cde: float = 0.0
    mediator_type: MediatorType = MediatorType.CONTINUOUS
    scale: Scale = Scale.RATIO
    se: SeMethod = SeMethod.DELTA_MODEL
    outcome_model: OutcomeModel = OutcomeModel.MZIP
    boot_reps: int = Field(default=1000, ge=2)
    seed: int = Field(default=0, ge=0)
    level: float = Field(default=0.95, gt=0, lt=1)

    # simulate
    preset: Optional[str] = None
    scenario: Optional[ScenarioConfig] = None
    n: Optional[int] = Field(default=None, ge=10)
    reps: int = Field(default=100, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)
    methods: List[OutcomeModel] = Field(default_factory=lambda: [OutcomeModel.MZIP, OutcomeModel.POISSON])
    se_methods: List[SeMethod] = Field(default_factory=lambda: [SeMethod.DELTA_MODEL, SeMethod.DELTA_ROBUST])

    out: Optional[str] = None
