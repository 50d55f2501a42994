"""
Hierarquia de exceções do toolkit.
Cada exceção carrega o código de saída usado pela CLI.
"""

from typing import Any, Optional


EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class MaplError(Exception):
    """Erro base de todo o pacote."""

    exit_code: int = EXIT_USAGE

    def __init__(self, message: str, details: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigError(MaplError):
    """Configuração inválida ou incompleta."""


class DatasetFormatError(MaplError):
    """Arquivo de dados fora do esquema documentado."""


class DatasetValidationError(MaplError):
    """Dataset viola algum invariante de ChoiceDataset."""

    def __init__(self, violations: list[str]):
        super().__init__(
            f"dataset failed validation: {'; '.join(violations[:5])}",
            details={"violations": violations},
        )
        self.violations = violations


class DistributionError(MaplError):
    """Parâmetros ou draws inválidos para uma distribuição agregada."""


class DgpError(MaplError):
    """Especificação de DGP inválida (ex.: covariância não PSD)."""


class NetworkError(MaplError):
    """Formas incompatíveis ou cache inválido na rede neural."""


class NumericalError(MaplError):
    """Valores não finitos em perdas, gradientes ou parâmetros previstos."""

    exit_code = EXIT_NUMERICAL


class TrainingDivergedError(NumericalError):
    """Perda não finita durante o treinamento; carrega o trace parcial."""

    def __init__(self, message: str, trace: Any = None):
        super().__init__(message)
        self.trace = trace


class ExperimentError(MaplError):
    """Plano de experimento ou métrica inválida."""


class SummaryError(MaplError):
    """Resumo estatístico pedido para um grupo vazio ou CSV fora do esquema."""
