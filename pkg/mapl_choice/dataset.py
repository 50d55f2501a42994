"""
Container imutável de dados de escolha em painel.
Validação, divisão treino/teste por indivíduo e persistência em CSV.
"""

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
import pandas as pd

from .exceptions import DatasetFormatError, DatasetValidationError
from .random_streams import Stream, stream

ID_COLUMNS = ("individual_id", "task_id", "alt_id")
CHOSEN_COLUMN = "chosen"


def default_feature_names(k: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(k))


@dataclass(frozen=True, eq=False)
class ChoiceDataset:
    """
    Painel retangular N indivíduos × T tarefas × J alternativas × K atributos.

    features: float64 (N, T, J, K); chosen: int64 (N, T) com índices em [0, J).
    Os arrays são somente leitura após a construção.
    """

    features: np.ndarray
    chosen: np.ndarray
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64, copy=True)
        chosen = np.array(self.chosen, dtype=np.int64, copy=True)
        if features.ndim != 4:
            raise DatasetFormatError(
                f"features must have shape N×T×J×K, got {features.shape}"
            )
        if chosen.shape != features.shape[:2]:
            raise DatasetFormatError(
                f"chosen must have shape {features.shape[:2]}, got {chosen.shape}"
            )
        features.setflags(write=False)
        chosen.setflags(write=False)
        names = tuple(self.feature_names) or default_feature_names(features.shape[3])
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "chosen", chosen)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_individuals(self) -> int:
        return int(self.features.shape[0])

    @property
    def tasks_per_individual(self) -> int:
        return int(self.features.shape[1])

    @property
    def n_alternatives(self) -> int:
        return int(self.features.shape[2])

    @property
    def n_features(self) -> int:
        return int(self.features.shape[3])

    @property
    def n_obs(self) -> int:
        """Número de tarefas de escolha (N·T)."""
        return self.n_individuals * self.tasks_per_individual

    def chosen_onehot(self) -> np.ndarray:
        """Indicadores y (N, T, J) das alternativas escolhidas."""
        return np.eye(self.n_alternatives, dtype=np.float64)[self.chosen]

    def subset(self, individuals: Sequence[int]) -> "ChoiceDataset":
        idx = np.asarray(individuals, dtype=np.int64)
        return ChoiceDataset(self.features[idx], self.chosen[idx], self.feature_names)


@dataclass(frozen=True)
class ValidationReport:
    """Resultado de validate_dataset: ok ou lista de violações."""

    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> None:
        if not self.ok:
            raise DatasetValidationError(list(self.violations))


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    """Partição de indivíduos em treino e teste."""

    train: ChoiceDataset
    test: ChoiceDataset
    train_individuals: tuple[int, ...]
    test_individuals: tuple[int, ...]
    split_seed: int
    train_fraction: float


def validate_dataset(ds: ChoiceDataset, max_violations: int = 50) -> ValidationReport:
    """Confere os invariantes de ChoiceDataset e nomeia os índices ofensores."""
    violations: list[str] = []
    n, t, j, k = ds.features.shape
    for name, value in (("N", n), ("T", t), ("J", j), ("K", k)):
        if value < 1:
            violations.append(f"{name} must be >= 1, got {value}")
    if len(ds.feature_names) != k:
        violations.append(
            f"feature_names has {len(ds.feature_names)} labels for K={k} columns"
        )

    bad_chosen = np.argwhere((ds.chosen < 0) | (ds.chosen >= j))
    for i, task in bad_chosen[:max_violations]:
        violations.append(f"chosen index out of range at ({i},{task})")

    bad_features = np.argwhere(~np.isfinite(ds.features))
    for i, task, alt, col in bad_features[:max_violations]:
        violations.append(f"non-finite feature at ({i},{task},{alt},{col})")

    return ValidationReport(tuple(violations))


def split_individuals(ds: ChoiceDataset, train_fraction: float, seed: int) -> DatasetSplit:
    """
    Divide por indivíduo (todas as tarefas de um indivíduo ficam do mesmo lado).
    O treino recebe round(train_fraction·N) indivíduos, arredondando .5 para cima.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = ds.n_individuals
    if n < 2:
        raise ValueError(f"need at least 2 individuals to split, got {n}")

    n_train = int(np.floor(train_fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)

    perm = stream(seed, Stream.SPLIT).permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return DatasetSplit(
        train=ds.subset(train_idx),
        test=ds.subset(test_idx),
        train_individuals=tuple(int(i) for i in train_idx),
        test_individuals=tuple(int(i) for i in test_idx),
        split_seed=seed,
        train_fraction=train_fraction,
    )


# ============================================================================
# CSV
# ============================================================================

def to_frame(ds: ChoiceDataset) -> pd.DataFrame:
    """Formato longo: uma linha por (indivíduo, tarefa, alternativa)."""
    n, t, j, k = ds.features.shape
    ii, tt, jj = np.meshgrid(np.arange(n), np.arange(t), np.arange(j), indexing="ij")
    frame = pd.DataFrame(
        {
            "individual_id": ii.ravel(),
            "task_id": tt.ravel(),
            "alt_id": jj.ravel(),
        }
    )
    flat = ds.features.reshape(n * t * j, k)
    for col in range(k):
        frame[f"x{col}"] = flat[:, col]
    frame[CHOSEN_COLUMN] = ds.chosen_onehot().reshape(-1).astype(np.int64)
    return frame


def write_csv(ds: ChoiceDataset, path: Union[str, Path]) -> None:
    """Grava o dataset atomicamente, com floats em precisão de ida e volta."""
    report = validate_dataset(ds)
    report.raise_if_invalid()
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    os.close(fd)
    try:
        to_frame(ds).to_csv(tmp_name, index=False, float_format="%.17g", lineterminator="\n")
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def _check_header(columns: list[str]) -> int:
    if len(columns) < 5 or tuple(columns[:3]) != ID_COLUMNS or columns[-1] != CHOSEN_COLUMN:
        raise DatasetFormatError(
            "header must be individual_id,task_id,alt_id,x0,...,x{K-1},chosen; "
            f"got {','.join(columns)}"
        )
    k = len(columns) - 4
    if list(columns[3:-1]) != list(default_feature_names(k)):
        raise DatasetFormatError(
            f"feature columns must be x0..x{k - 1}, got {','.join(columns[3:-1])}"
        )
    return k


def read_csv(path: Union[str, Path]) -> ChoiceDataset:
    """Lê um CSV no esquema documentado e reconstrói o painel retangular."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError as e:
        raise DatasetFormatError("no records") from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DatasetFormatError(f"malformed rows: {e}") from e

    k = _check_header([str(c) for c in frame.columns])
    if frame.empty:
        raise DatasetFormatError("no records")

    int_columns = list(ID_COLUMNS) + [CHOSEN_COLUMN]
    for col in int_columns:
        if not pd.api.types.is_integer_dtype(frame[col]):
            raise DatasetFormatError(f"malformed rows: column '{col}' must hold integers")
    feature_cols = list(default_feature_names(k))
    for col in feature_cols:
        if not pd.api.types.is_numeric_dtype(frame[col]):
            raise DatasetFormatError(f"malformed rows: column '{col}' must be numeric")
    if not frame[CHOSEN_COLUMN].isin([0, 1]).all():
        raise DatasetFormatError("malformed rows: chosen must be 0 or 1")
    if (frame[list(ID_COLUMNS)] < 0).any().any():
        raise DatasetFormatError("malformed rows: ids must be non-negative")

    frame = frame.sort_values(list(ID_COLUMNS), kind="mergesort").reset_index(drop=True)

    alt_counts = frame.groupby(["individual_id", "task_id"]).size()
    if alt_counts.nunique() != 1:
        raise DatasetFormatError("inconsistent number of alternatives (J) across tasks")
    task_counts = frame.groupby("individual_id")["task_id"].nunique()
    if task_counts.nunique() != 1:
        raise DatasetFormatError("inconsistent number of tasks (T) across individuals")

    n = int(frame["individual_id"].nunique())
    t = int(task_counts.iloc[0])
    j = int(alt_counts.iloc[0])
    if len(frame) != n * t * j:
        raise DatasetFormatError("malformed rows: duplicated (individual, task, alternative)")

    ids = frame[list(ID_COLUMNS)].to_numpy().reshape(n, t, j, 3)
    grid = np.stack(
        np.meshgrid(np.arange(n), np.arange(t), np.arange(j), indexing="ij"), axis=-1
    )
    if not np.array_equal(ids, grid):
        raise DatasetFormatError("ids must be 0-based contiguous integers")

    marks = frame[CHOSEN_COLUMN].to_numpy().reshape(n, t, j)
    per_task = marks.sum(axis=2)
    bad = np.argwhere(per_task != 1)
    if bad.size:
        i, task = (int(v) for v in bad[0])
        if per_task[i, task] == 0:
            raise DatasetFormatError(
                f"missing chosen marker in task (individual_id={i}, task_id={task})"
            )
        raise DatasetFormatError(
            f"{int(per_task[i, task])} rows marked chosen in task "
            f"(individual_id={i}, task_id={task})"
        )

    features = frame[feature_cols].to_numpy(dtype=np.float64).reshape(n, t, j, k)
    ds = ChoiceDataset(features, marks.argmax(axis=2), default_feature_names(k))
    validate_dataset(ds).raise_if_invalid()
    return ds
