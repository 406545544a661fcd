from models.dataset import ColumnRoles, Dataset
from models.mediation import Effect, EffectSet, MediationSpec, MediatorType, OutcomeModel, Scale, SeMethod
from models.run_config import RunConfig
from models.settings import OptimSettings
from models.simulation import MediatorConfig, ScenarioConfig, SimulationReport, SimulationRow

__all__ = [
    "ColumnRoles",
    "Dataset",
    "Effect",
    "EffectSet",
    "MediationSpec",
    "MediatorConfig",
    "MediatorType",
    "OptimSettings",
    "OutcomeModel",
    "RunConfig",
    "Scale",
    "ScenarioConfig",
    "SeMethod",
    "SimulationReport",
    "SimulationRow",
]
