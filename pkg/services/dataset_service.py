import logging
import sys
from typing import Optional, TextIO, Union

import numpy as np
import pandas as pd

from models.dataset import ColumnRoles, Dataset
from services.errors import InvalidInputError

logger = logging.getLogger(__name__)


def _parse_cell(value) -> float:
    """Converte uma célula; None/NaN indica célula ausente."""
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return np.nan
    return float(str(value).strip())


class DatasetService:
    """Leitura e validação de dados tabulares para os modelos de mediação."""

    def __init__(self, roles: ColumnRoles):
        self.roles = roles

    def load_csv(self, source: Union[str, TextIO] = "-") -> Dataset:
        """
        Carrega um CSV com cabeçalho; "-" lê da entrada padrão.

        Linhas com células ausentes nas colunas mapeadas são descartadas e
        contadas; qualquer outra célula não numérica é erro.
        """
        handle = sys.stdin if source == "-" else source
        try:
            raw = pd.read_csv(handle, dtype=str, keep_default_na=True, encoding="utf-8")
        except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
            raise InvalidInputError(f"CSV ilegível: {exc}") from exc
        return self.from_frame(raw)

    def from_frame(self, raw: pd.DataFrame) -> Dataset:
        """Valida um DataFrame (células em texto ou numéricas) segundo os papéis."""
        for column in self.roles.columns():
            if column not in raw.columns:
                raise InvalidInputError(f"coluna '{column}' não encontrada", column=column)

        columns = self.roles.columns()
        parsed = {}
        for column in columns:
            values = []
            for position, cell in enumerate(raw[column].tolist()):
                try:
                    values.append(_parse_cell(cell))
                except ValueError:
                    raise InvalidInputError(
                        f"valor não numérico '{cell}' na linha {position + 1}, coluna '{column}'",
                        row=position + 1,
                        column=column,
                    ) from None
            parsed[column] = values
        frame = pd.DataFrame(parsed, columns=columns, dtype=float)

        missing = frame.isna().any(axis=1)
        dropped = int(missing.sum())
        if dropped:
            logger.warning("%d linhas com células ausentes descartadas", dropped)

        outcome = frame[self.roles.outcome]
        invalid = ~missing & ((outcome < 0) | (outcome != np.floor(outcome)) | ~np.isfinite(outcome))
        if invalid.any():
            position = int(np.flatnonzero(invalid.to_numpy())[0])
            raise InvalidInputError(
                f"desfecho deve ser inteiro não negativo (linha {position + 1}, "
                f"coluna '{self.roles.outcome}', valor {outcome.iloc[position]})",
                row=position + 1,
                column=self.roles.outcome,
            )
        infinite = ~missing & ~np.isfinite(frame).all(axis=1)
        if infinite.any():
            position = int(np.flatnonzero(infinite.to_numpy())[0])
            raise InvalidInputError(f"valor infinito na linha {position + 1}", row=position + 1)

        frame = frame.loc[~missing].reset_index(drop=True)
        if frame.empty:
            raise InvalidInputError("nenhuma linha completa nas colunas mapeadas")
        return Dataset(frame=frame, roles=self.roles, dropped_rows=dropped)

    @staticmethod
    def to_csv(dataset: Dataset, path: Optional[str] = None) -> Optional[str]:
        """Exporta as colunas mapeadas; sem `path` devolve o texto CSV."""
        return dataset.frame[dataset.roles.columns()].to_csv(path, index=False)
