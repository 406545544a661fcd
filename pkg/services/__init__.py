from services.dataset_service import DatasetService
from services.mediation import bootstrap_effects, mediate
from services.mzip import mzip_fit
from services.simulation import generate, run_study, true_effects

__all__ = ["DatasetService", "bootstrap_effects", "generate", "mediate", "mzip_fit", "run_study", "true_effects"]
