from typing import List

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field


class ColumnRoles(BaseModel):
    outcome: str = "y"
    exposure: str = "x"
    mediator: str = "m"
    covariates: List[str] = Field(default_factory=list)

    def columns(self) -> List[str]:
        return [self.outcome, self.exposure, self.mediator, *self.covariates]


class Dataset(BaseModel):
    """Observações numéricas já validadas, com o mapeamento de papéis das colunas."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    frame: pd.DataFrame
    roles: ColumnRoles
    dropped_rows: int = 0

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def outcome(self) -> np.ndarray:
        return self.frame[self.roles.outcome].to_numpy(dtype=float)

    @property
    def exposure(self) -> np.ndarray:
        return self.frame[self.roles.exposure].to_numpy(dtype=float)

    @property
    def mediator(self) -> np.ndarray:
        return self.frame[self.roles.mediator].to_numpy(dtype=float)

    @property
    def covariates(self) -> np.ndarray:
        # n x k, k pode ser zero
        return self.frame[self.roles.covariates].to_numpy(dtype=float).reshape(self.n, -1)

    def covariate_means(self) -> List[float]:
        return [float(v) for v in self.covariates.mean(axis=0)]

    def take(self, rows: np.ndarray) -> "Dataset":
        """Subconjunto (com repetição) das linhas, usado no bootstrap."""
        return Dataset(
            frame=self.frame.iloc[rows].reset_index(drop=True),
            roles=self.roles,
        )
