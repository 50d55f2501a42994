"""
Configurações do toolkit.
Settings de processo via Pydantic Settings (variáveis de ambiente / .env) e
configuração de execução via arquivo YAML validado por Pydantic.
"""

import copy
import hashlib
import json
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .exceptions import ConfigError
from .schemas import (
    DgpScenario,
    DgpSpec,
    DistributionKind,
    DrawScheme,
    DrawType,
    ExperimentPlan,
    MaplEstimator,
    ModelKind,
    ModelSpec,
    SimConfig,
    TrainConfig,
)


class Settings(BaseSettings):
    """Configurações de processo com valores padrão para desenvolvimento."""

    app_name: str = "mapl-choice"
    app_version: str = "1.0.0"

    # Logging
    log_level: str = "INFO"
    log_json: bool = False
    log_file: Optional[str] = None

    # Métricas (arquivo texto no formato Prometheus)
    metrics_file: Optional[str] = None

    # Performance
    default_workers: int = 1
    chunk_size: int = Field(2048, ge=1, description="Tarefas por bloco de Monte Carlo")

    model_config = SettingsConfigDict(
        env_prefix="MAPL_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )


@lru_cache()
def get_settings() -> Settings:
    """
    Cria e cacheia uma instância das configurações.
    O cache evita recarregar as configurações a cada chamada.
    """
    return Settings()


# ============================================================================
# CONFIGURAÇÃO DE EXECUÇÃO (arquivo YAML)
# ============================================================================

class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class DgpSection(_Section):
    """Coeficientes do DGP; o cenário é obrigatório só para simulate/fit."""
    scenario: Optional[DgpScenario] = None
    beta0: float = -1.0
    mu1: float = 1.0
    mu2: float = 2.0
    sigma1: float = Field(1.0, gt=0)
    sigma2: float = Field(1.5, gt=0)
    sigma12: float = 0.7
    beta3: float = 2.0

    def to_spec(self, scenario: Optional[DgpScenario] = None) -> DgpSpec:
        chosen = scenario or self.scenario
        if chosen is None:
            raise ConfigError("missing key: dgp.scenario")
        fields = self.model_dump(exclude={"scenario"})
        try:
            return DgpSpec(scenario=chosen, **fields)
        except ValidationError as e:
            raise ConfigError(f"invalid dgp section: {e.errors()[0]['msg']}") from e


class SimSection(SimConfig):
    """Seção sim com o tamanho de bancada como padrão."""
    n_individuals: int = Field(2_000, ge=1)


class NnSection(_Section):
    hidden: list[int] = Field(default_factory=lambda: [64, 64])
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    layer_norm: bool = True
    lr: float = Field(1e-3, gt=0)
    seed: int = 0


class TrainSection(_Section):
    epochs: int = Field(500, ge=1)
    lr: Optional[float] = Field(None, gt=0)
    seed: int = 0
    eval_every: int = Field(10, ge=1)
    early_abort_on_nonfinite: bool = True


class ModelSection(_Section):
    kind: ModelKind = ModelKind.MAPL
    r_train: int = Field(200, ge=1, alias="R_train")
    r_eval: int = Field(1_000, ge=1, alias="R_eval")
    draw_scheme: DrawScheme = DrawScheme.FIXED_COMMON_RANDOM_NUMBERS
    draw_type: DrawType = DrawType.PSEUDO_RANDOM
    lr: Optional[float] = Field(None, gt=0)


class MaplSection(_Section):
    estimator: MaplEstimator = MaplEstimator.MLP
    distribution: DistributionKind = DistributionKind.FOSGERAU_MABIT
    fm_order: int = Field(12, ge=1)


class ExperimentSection(_Section):
    dgps: list[DgpScenario] = Field(default_factory=lambda: list(DgpScenario))
    models: list[str] = Field(
        default_factory=lambda: [
            "mnl", "mxl", "simple_nn", "deep_nn", "mapl_normal", "mapl_fm",
        ]
    )
    replications: int = Field(5, ge=1)
    base_seed: int = 0
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    validation_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    sizes: list[int] = Field(default_factory=lambda: [500, 2_000, 4_000])
    sweep_dgp: DgpScenario = DgpScenario.INDEPENDENT_NORMALS
    sweep_models: list[str] = Field(default_factory=lambda: ["mapl_fm"])


class RunConfig(_Section):
    """Configuração completa e resolvida de uma execução."""
    dgp: DgpSection = Field(default_factory=DgpSection)
    sim: SimSection = Field(default_factory=SimSection)
    nn: NnSection = Field(default_factory=NnSection)
    train: TrainSection = Field(default_factory=TrainSection)
    model: ModelSection = Field(default_factory=ModelSection)
    mapl: MaplSection = Field(default_factory=MaplSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.train.epochs,
            lr=self.train.lr if self.train.lr is not None else self.nn.lr,
            seed=self.train.seed,
            eval_every=self.train.eval_every,
            early_abort_on_nonfinite=self.train.early_abort_on_nonfinite,
        )

    def _model_overrides(self, kind: ModelKind, estimator: MaplEstimator) -> dict[str, Any]:
        overrides: dict[str, Any] = {
            "r_train": self.model.r_train,
            "r_eval": self.model.r_eval,
            "draw_scheme": self.model.draw_scheme,
            "draw_type": self.model.draw_type,
            "fm_order": self.mapl.fm_order,
            "dropout_rate": self.nn.dropout,
            "use_layer_norm": self.nn.layer_norm,
            "lr": self.model.lr,
            "init_seed": self.nn.seed,
        }
        if kind == ModelKind.SIMPLE_NN or (
            kind == ModelKind.MAPL and estimator == MaplEstimator.MLP
        ):
            overrides["hidden_dims"] = list(self.nn.hidden)
        return overrides

    def model_spec(self) -> ModelSpec:
        """ModelSpec a partir das seções model/mapl/nn."""
        return ModelSpec(
            kind=self.model.kind,
            mapl_estimator=self.mapl.estimator,
            mapl_distribution=self.mapl.distribution,
            **self._model_overrides(self.model.kind, self.mapl.estimator),
        )

    def model_specs(self, labels: Iterable[str]) -> list[ModelSpec]:
        specs = []
        for label in labels:
            try:
                base = ModelSpec.from_label(label)
            except ValueError as e:
                raise ConfigError(str(e)) from e
            overrides = self._model_overrides(base.kind, base.mapl_estimator)
            specs.append(ModelSpec.from_label(label, **overrides))
        return specs

    def experiment_plan(self) -> ExperimentPlan:
        exp = self.experiment
        return ExperimentPlan(
            dgps=[self.dgp.to_spec(s) for s in exp.dgps],
            models=self.model_specs(exp.models),
            replications=exp.replications,
            sim=self.sim,
            train=self.train_config(),
            base_seed=exp.base_seed,
            train_fraction=exp.train_fraction,
            validation_fraction=exp.validation_fraction,
        )

    def sweep_plan(self) -> ExperimentPlan:
        exp = self.experiment
        return ExperimentPlan(
            dgps=[self.dgp.to_spec(exp.sweep_dgp)],
            models=self.model_specs(exp.sweep_models),
            replications=exp.replications,
            sim=self.sim,
            train=self.train_config(),
            base_seed=exp.base_seed,
            train_fraction=exp.train_fraction,
            validation_fraction=exp.validation_fraction,
        )


PAPER_SCALE: dict[str, Any] = {
    "sim": {"n_individuals": 10_000},
    "experiment": {"replications": 20},
    "train": {"epochs": 2_000},
}


def _deep_merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def apply_override(raw: dict[str, Any], assignment: str) -> dict[str, Any]:
    """Aplica um `--set secao.chave=valor` ao dicionário bruto."""
    if "=" not in assignment:
        raise ConfigError(f"override must look like key=value, got '{assignment}'")
    dotted, _, text = assignment.partition("=")
    parts = [p for p in dotted.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"override has an empty key: '{assignment}'")
    value = yaml.safe_load(text) if text.strip() else None
    nested: dict[str, Any] = value
    for part in reversed(parts):
        nested = {part: nested}
    return _deep_merge(raw, nested)


def format_validation_error(error: ValidationError) -> str:
    """Mensagem curta com o caminho pontuado do primeiro erro."""
    first = error.errors()[0]
    dotted = ".".join(str(p) for p in first["loc"])
    if first["type"] == "missing":
        return f"missing key: {dotted}"
    if first["type"] == "extra_forbidden":
        return f"unknown key: {dotted}"
    return f"invalid value for {dotted}: {first['msg']}"


def load_run_config(
    path: Optional[Path] = None,
    overrides: Iterable[str] = (),
    paper_scale: bool = False,
) -> RunConfig:
    """
    Carrega a configuração de execução.
    Ordem de precedência: padrões < arquivo < --paper-scale < --set.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(f"config file is not valid YAML: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config file must contain a mapping at the top level")
        raw = loaded
    if paper_scale:
        raw = _deep_merge(raw, PAPER_SCALE)
    for assignment in overrides:
        raw = apply_override(raw, assignment)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e)) from e


def config_hash(config: BaseModel) -> str:
    """Hash estável (16 hex) do dump JSON canônico da configuração."""
    payload = json.dumps(config.model_dump(mode="json", by_alias=True), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
