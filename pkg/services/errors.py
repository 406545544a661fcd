from typing import Optional


class MediationError(Exception):
    """Erro base do pacote; `exit_code` é o código de saída usado pela CLI."""

    exit_code = 2


class InvalidInputError(MediationError):
    """Entrada inválida (CSV, papéis de coluna, parâmetros)."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


class NonFiniteError(MediationError):
    pass


class RankDeficientError(MediationError):
    pass


class DimensionMismatchError(MediationError):
    pass


class SingularHessianError(MediationError):
    pass


class SingularCovarianceError(MediationError):
    pass


class DegenerateOutcomeError(MediationError):
    """Desfecho sem zeros ou sem contagens positivas."""


class SpecMismatchError(MediationError):
    pass


class NotConvergedError(MediationError):
    exit_code = 3


class NonPositiveEstimateError(MediationError):
    pass


class NullTotalEffectError(MediationError):
    pass


class TooManyFailuresError(MediationError):
    """Mais de 10% das réplicas (bootstrap ou simulação) falharam."""

    exit_code = 4

    def __init__(self, message: str, failed: int = 0, total: int = 0):
        super().__init__(message)
        self.failed = failed
        self.total = total
