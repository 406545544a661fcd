import io

import pytest
import numpy as np
import pandas as pd

from models.dataset import ColumnRoles
from services.dataset_service import DatasetService
from services.errors import InvalidInputError

ROLES = ColumnRoles(outcome="visits", exposure="treated", mediator="score", covariates=["age"])


@pytest.fixture
def service():
    return DatasetService(ROLES)


def _csv(text: str) -> io.StringIO:
    return io.StringIO(text)


class TestLoadCsv:
    """Testes para leitura e validação do CSV"""

    def test_loads_mapped_columns(self, service):
        """Teste leitura com colunas extras ignoradas"""
        data = service.load_csv(_csv("visits,treated,score,age,id\n0,1,2.5,30,a\n3,0,-1.0,41,b\n"))

        assert data.n == 2
        assert data.dropped_rows == 0
        np.testing.assert_array_equal(data.outcome, [0.0, 3.0])
        np.testing.assert_array_equal(data.covariates, [[30.0], [41.0]])

    def test_missing_cells_are_dropped(self, service):
        """Teste linhas com célula ausente são descartadas e contadas"""
        data = service.load_csv(_csv("visits,treated,score,age\n0,1,2.5,30\n2,,1.0,41\n1,0,NA,50\n4,1,0.5,22\n"))

        assert data.n == 2
        assert data.dropped_rows == 2
        np.testing.assert_array_equal(data.outcome, [0.0, 4.0])

    def test_non_numeric_cell(self, service):
        """Teste célula não numérica informa linha e coluna"""
        with pytest.raises(InvalidInputError) as exc_info:
            service.load_csv(_csv("visits,treated,score,age\n0,1,2.5,30\n2,1,alto,41\n"))

        assert exc_info.value.row == 2
        assert exc_info.value.column == "score"

    @pytest.mark.parametrize("value", ["-1", "1.5", "inf"])
    def test_invalid_outcome(self, service, value):
        """Teste desfecho negativo, fracionário ou infinito"""
        with pytest.raises(InvalidInputError) as exc_info:
            service.load_csv(_csv(f"visits,treated,score,age\n0,1,2.5,30\n{value},1,0.1,41\n"))

        assert exc_info.value.row == 2
        assert exc_info.value.column == "visits"

    def test_infinite_covariate(self, service):
        """Teste valor infinito fora do desfecho"""
        with pytest.raises(InvalidInputError) as exc_info:
            service.load_csv(_csv("visits,treated,score,age\n0,1,2.5,inf\n"))

        assert exc_info.value.row == 1

    def test_missing_column(self, service):
        """Teste coluna mapeada ausente no cabeçalho"""
        with pytest.raises(InvalidInputError) as exc_info:
            service.load_csv(_csv("visits,treated,age\n0,1,30\n"))

        assert exc_info.value.column == "score"

    def test_all_rows_dropped(self, service):
        """Teste nenhuma linha completa"""
        with pytest.raises(InvalidInputError):
            service.load_csv(_csv("visits,treated,score,age\n0,,2.5,30\n"))

    def test_empty_input(self, service):
        """Teste CSV vazio"""
        with pytest.raises(InvalidInputError):
            service.load_csv(_csv(""))

    def test_reads_stdin(self, service, monkeypatch):
        """Teste '-' lê da entrada padrão"""
        monkeypatch.setattr("sys.stdin", _csv("visits,treated,score,age\n5,1,0.0,18\n"))
        data = service.load_csv("-")

        assert data.n == 1
        assert data.outcome[0] == 5.0


class TestCsvExport:
    """Testes para a exportação em CSV"""

    def test_round_trip_is_exact(self, tmp_path, small_scenario1_data):
        """Teste exportar e reler preserva os valores bit a bit"""
        path = tmp_path / "data.csv"
        DatasetService.to_csv(small_scenario1_data, str(path))
        loaded = DatasetService(small_scenario1_data.roles).load_csv(str(path))

        assert np.array_equal(loaded.outcome, small_scenario1_data.outcome)
        assert np.array_equal(loaded.mediator, small_scenario1_data.mediator)
        assert np.array_equal(loaded.covariates, small_scenario1_data.covariates)

    def test_returns_text_without_path(self):
        """Teste sem caminho devolve o texto"""
        frame = pd.DataFrame({"y": [0, 2], "x": [1.0, 0.0], "m": [0.5, 0.25]})
        data = DatasetService(ColumnRoles()).from_frame(frame)
        text = DatasetService.to_csv(data)

        assert text.splitlines()[0] == "y,x,m"
        assert len(text.splitlines()) == 3
