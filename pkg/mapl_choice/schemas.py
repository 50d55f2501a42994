"""
Schemas Pydantic para especificações de DGP, modelos, treinamento e resultados.
Utiliza Pydantic v2 com validação declarativa; os arrays numéricos ficam fora daqui.
"""

import math
from enum import Enum
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ============================================================================
# ENUMS
# ============================================================================

class DgpScenario(str, Enum):
    """Cenários de geração de dados (uma linha cada na tabela de DGPs)."""
    INDEPENDENT_NORMALS = "independent_normals"
    CORRELATED_NORMALS = "correlated_normals"
    INTERACTION = "interaction"
    NONLINEAR = "nonlinear"


class DistributionKind(str, Enum):
    """Famílias de distribuição agregada de valência."""
    NORMAL = "normal"
    FOSGERAU_MABIT = "fosgerau_mabit"


class ModelKind(str, Enum):
    """Modelos disponíveis no zoológico."""
    MNL = "mnl"
    MXL_INDEPENDENT_NORMALS = "mxl_independent_normals"
    SIMPLE_NN = "simple_nn"
    DEEP_NN = "deep_nn"
    MAPL = "mapl"


class MaplEstimator(str, Enum):
    """Estimador dos parâmetros de distribuição no MAPL."""
    LINEAR = "linear"
    MLP = "mlp"


class DrawScheme(str, Enum):
    """Política de reuso dos draws uniformes entre épocas."""
    PSEUDO_RANDOM = "pseudo_random"
    FIXED_COMMON_RANDOM_NUMBERS = "fixed_common_random_numbers"


class DrawType(str, Enum):
    """Gerador dos draws uniformes."""
    PSEUDO_RANDOM = "pseudo_random"
    HALTON = "halton"
    MLHS = "mlhs"


# ============================================================================
# DGP E SIMULAÇÃO
# ============================================================================

class DgpSpec(BaseModel):
    """Cenário de DGP com os coeficientes verdadeiros."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    scenario: DgpScenario
    beta0: float = Field(-1.0, description="Coeficiente fixo de x0")
    mu1: float = Field(1.0, description="Média de beta1")
    mu2: float = Field(2.0, description="Média de beta2")
    sigma1: float = Field(1.0, gt=0, description="Desvio padrão de beta1")
    sigma2: float = Field(1.5, gt=0, description="Desvio padrão de beta2")
    sigma12: float = Field(0.7, description="Termo cruzado; a covariância é sigma12²")
    beta3: float = Field(2.0, description="Coeficiente da interação ou do termo quadrático")

    @model_validator(mode="after")
    def validate_covariance(self) -> "DgpSpec":
        """Exige covariância PSD no cenário correlacionado."""
        if self.scenario == DgpScenario.CORRELATED_NORMALS:
            det = (self.sigma1 ** 2) * (self.sigma2 ** 2) - self.sigma12 ** 4
            if det < 0:
                raise ValueError(
                    "covariance [[s1², s12²], [s12², s2²]] is not positive semi-definite"
                )
        return self

    @property
    def label(self) -> str:
        return self.scenario.value

    @property
    def covariance(self) -> list[list[float]]:
        """Matriz de covariância de (beta1, beta2)."""
        off = self.sigma12 ** 2 if self.scenario == DgpScenario.CORRELATED_NORMALS else 0.0
        return [[self.sigma1 ** 2, off], [off, self.sigma2 ** 2]]


class SimConfig(BaseModel):
    """Tamanho do painel simulado e número de draws do oráculo."""
    model_config = ConfigDict(extra="forbid")

    n_individuals: int = Field(10_000, ge=1)
    tasks_per_individual: int = Field(10, ge=1)
    alternatives: int = Field(3, ge=1)
    oracle_draws: int = Field(1_000, ge=1)
    seed: int = 0


# ============================================================================
# REDE NEURAL E TREINAMENTO
# ============================================================================

class MlpConfig(BaseModel):
    """Arquitetura do MLP compartilhado entre alternativas."""
    model_config = ConfigDict(extra="forbid")

    input_dim: int = Field(..., ge=1)
    hidden_dims: list[int] = Field(default_factory=lambda: [64, 64])
    output_dim: int = Field(..., ge=1)
    dropout_rate: float = Field(0.1, ge=0.0, lt=1.0)
    use_layer_norm: bool = True
    activation: Literal["relu"] = "relu"
    init_seed: int = 0
    layer_norm_eps: float = Field(1e-5, gt=0)

    @field_validator("hidden_dims")
    @classmethod
    def validate_hidden_dims(cls, v: list[int]) -> list[int]:
        """Uma lista vazia é permitida e produz um estimador linear."""
        if any(d < 1 for d in v):
            raise ValueError("hidden layer widths must be >= 1")
        return v


class TrainConfig(BaseModel):
    """Laço de treinamento full-batch com Adam."""
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(2_000, ge=1)
    lr: float = Field(1e-3, gt=0)
    seed: int = 0
    eval_every: int = Field(10, ge=1)
    early_abort_on_nonfinite: bool = True


class Checkpoint(BaseModel):
    """Um ponto do trace de treinamento."""
    epoch: int
    train_nll_per_obs: float
    valid_nll_per_obs: float
    wall_seconds: float


class TrainingTrace(BaseModel):
    """Sequência de checkpoints com épocas estritamente crescentes."""
    checkpoints: list[Checkpoint] = Field(default_factory=list)

    def append(self, checkpoint: Checkpoint) -> None:
        if self.checkpoints and checkpoint.epoch <= self.checkpoints[-1].epoch:
            raise ValueError("checkpoint epochs must be strictly increasing")
        if not (
            math.isfinite(checkpoint.train_nll_per_obs)
            and math.isfinite(checkpoint.valid_nll_per_obs)
        ):
            raise ValueError("checkpoint NLL must be finite")
        self.checkpoints.append(checkpoint)

    @property
    def epochs(self) -> list[int]:
        return [c.epoch for c in self.checkpoints]

    @property
    def train_nll(self) -> list[float]:
        return [c.train_nll_per_obs for c in self.checkpoints]

    @property
    def valid_nll(self) -> list[float]:
        return [c.valid_nll_per_obs for c in self.checkpoints]

    def __len__(self) -> int:
        return len(self.checkpoints)


# ============================================================================
# MODELOS
# ============================================================================

_LINEAR_KINDS = {ModelKind.MNL, ModelKind.MXL_INDEPENDENT_NORMALS}

MODEL_PRESETS: dict[str, dict[str, Any]] = {
    "mnl": {"kind": ModelKind.MNL},
    "mxl": {"kind": ModelKind.MXL_INDEPENDENT_NORMALS},
    "simple_nn": {"kind": ModelKind.SIMPLE_NN},
    "deep_nn": {"kind": ModelKind.DEEP_NN},
    "mapl_normal": {"kind": ModelKind.MAPL, "mapl_distribution": DistributionKind.NORMAL},
    "mapl_fm": {"kind": ModelKind.MAPL, "mapl_distribution": DistributionKind.FOSGERAU_MABIT},
    "mapl_linear_normal": {
        "kind": ModelKind.MAPL,
        "mapl_estimator": MaplEstimator.LINEAR,
        "mapl_distribution": DistributionKind.NORMAL,
    },
}


class ModelSpec(BaseModel):
    """Especificação de um modelo de escolha a ser estimado."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: ModelKind
    mapl_estimator: MaplEstimator = MaplEstimator.MLP
    mapl_distribution: DistributionKind = DistributionKind.NORMAL
    fm_order: int = Field(12, ge=1)
    r_train: int = Field(200, ge=1, alias="R_train")
    r_eval: int = Field(1_000, ge=1, alias="R_eval")
    draw_scheme: DrawScheme = DrawScheme.FIXED_COMMON_RANDOM_NUMBERS
    draw_type: DrawType = DrawType.PSEUDO_RANDOM
    hidden_dims: Optional[list[int]] = Field(
        None, description="Sobrescreve a arquitetura padrão do tipo de modelo"
    )
    dropout_rate: float = Field(0.1, ge=0.0, lt=1.0)
    use_layer_norm: bool = True
    lr: Optional[float] = Field(None, gt=0, description="Sobrescreve train.lr")
    init_seed: Optional[int] = Field(
        None, description="Semente dos pesos iniciais, combinada com a semente de treino"
    )
    label: Optional[str] = None

    @classmethod
    def from_label(cls, label: str, **overrides: Any) -> "ModelSpec":
        """Constrói um ModelSpec a partir de um rótulo predefinido."""
        if label not in MODEL_PRESETS:
            raise ValueError(
                f"unknown model label '{label}'; expected one of {sorted(MODEL_PRESETS)}"
            )
        return cls(**{**MODEL_PRESETS[label], **overrides, "label": label})

    @property
    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.kind == ModelKind.MXL_INDEPENDENT_NORMALS:
            return "mxl"
        if self.kind != ModelKind.MAPL:
            return self.kind.value
        dist = "normal" if self.mapl_distribution == DistributionKind.NORMAL else "fm"
        if self.mapl_estimator == MaplEstimator.LINEAR:
            return f"mapl_linear_{dist}"
        return f"mapl_{dist}"

    @property
    def resolved_hidden_dims(self) -> list[int]:
        if self.hidden_dims is not None:
            return list(self.hidden_dims)
        if self.kind == ModelKind.DEEP_NN:
            return [64, 64, 64, 64]
        if self.kind == ModelKind.MAPL and self.mapl_estimator == MaplEstimator.LINEAR:
            return []
        return [64, 64]

    def learning_rate(self, default: float) -> float:
        """Taxa de aprendizado efetiva; modelos lineares usam 0.01 por padrão."""
        if self.lr is not None:
            return self.lr
        if self.kind in _LINEAR_KINDS:
            return 0.01
        return default


# ============================================================================
# EXPERIMENTOS
# ============================================================================

class ExperimentPlan(BaseModel):
    """Grade DGP × modelo × replicação."""
    model_config = ConfigDict(extra="forbid")

    dgps: list[DgpSpec] = Field(..., min_length=1)
    models: list[ModelSpec] = Field(..., min_length=1)
    replications: int = Field(20, ge=1)
    sim: SimConfig = Field(default_factory=SimConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    base_seed: int = 0
    eval_split: Literal["test"] = "test"
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    validation_fraction: float = Field(0.1, ge=0.0, lt=1.0)


RESULT_COLUMNS: tuple[str, ...] = (
    "dgp",
    "model",
    "rep",
    "n_individuals",
    "train_nll_per_obs",
    "test_nll_per_obs",
    "true_test_nll_per_obs",
    "pct_error",
    "clamp_count",
    "wall_seconds",
    "cell_seed",
    "status",
)

SUMMARY_COLUMNS: tuple[str, ...] = (
    "dgp", "model", "n", "min", "q1", "median", "q3", "max", "mean",
)


class ReplicationResult(BaseModel):
    """Uma linha do CSV de resultados."""
    dgp: str
    model: str
    rep: int = Field(..., ge=0)
    n_individuals: int = Field(..., ge=1)
    train_nll_per_obs: float
    test_nll_per_obs: float
    true_test_nll_per_obs: float
    pct_error: float
    clamp_count: int = Field(0, ge=0)
    wall_seconds: float = Field(0.0, ge=0)
    cell_seed: int
    status: str = "ok"

    @model_validator(mode="after")
    def validate_ok_rows(self) -> "ReplicationResult":
        """Linhas bem-sucedidas precisam de pct_error finito."""
        if self.ok and not math.isfinite(self.pct_error):
            raise ValueError("pct_error must be finite for successful rows")
        return self

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def as_row(self) -> dict[str, Any]:
        return {col: getattr(self, col) for col in RESULT_COLUMNS}


class FitReport(BaseModel):
    """Relatório JSON emitido por `mapl fit`."""
    model: str
    spec: ModelSpec
    param_count: int
    distribution_param_count: Optional[int] = None
    n_train_individuals: int
    n_valid_individuals: int
    best_epoch: int
    best_valid_nll_per_obs: float
    final_train_nll_per_obs: float
    clamp_count: int
    trace: TrainingTrace
    seeds: dict[str, int]
    config_hash: str
