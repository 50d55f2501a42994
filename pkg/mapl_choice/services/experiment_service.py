"""
Serviço de experimentos: grade DGP × modelo × replicação e varredura de
tamanho amostral, com erro percentual da log-verossimilhança contra o oráculo.

Cada célula (DGP, replicação, N) simula um painel, divide 80/20 por
indivíduo, calcula a LL verdadeira no teste e ajusta todos os modelos.
As linhas são anexadas ao CSV por um único processo e o arquivo final é
reescrito na ordem canônica do plano.
"""

import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel

from ..dataset import split_individuals
from ..exceptions import ExperimentError
from ..logging_config import cell_var, log_cell_result, structured_logger
from ..metrics import record_result_row
from ..random_streams import derive_seed
from ..schemas import (
    RESULT_COLUMNS,
    DgpSpec,
    ExperimentPlan,
    ModelSpec,
    ReplicationResult,
    SimConfig,
    TrainConfig,
)
from .choice_models import fit
from .dgp_service import DgpService
from .report_service import read_results

RowKey = tuple[str, str, int, int]


def pct_error(ll_model: float, ll_true: float) -> float:
    """100·(ll_true − ll_model)/|ll_true|; positivo quando o modelo ajusta pior."""
    if ll_true == 0:
        raise ExperimentError("true log-likelihood is zero; percent error is undefined")
    return 100.0 * (ll_true - ll_model) / abs(ll_true)


def cell_seed(base_seed: int, dgp_label: str, rep: int, n_individuals: Optional[int] = None) -> int:
    """Semente estável da célula; a varredura inclui N para separar os tamanhos."""
    if n_individuals is None:
        return derive_seed(base_seed, dgp_label, rep)
    return derive_seed(base_seed, dgp_label, rep, n_individuals)


class CellTask(BaseModel):
    """Unidade de trabalho enviada aos workers."""

    dgp: DgpSpec
    models: list[ModelSpec]
    rep: int
    n_individuals: int
    seed: int
    sim: SimConfig
    train: TrainConfig
    train_fraction: float
    validation_fraction: float

    def key(self, model: ModelSpec) -> RowKey:
        return (self.dgp.label, model.display_label, self.rep, self.n_individuals)


def _failed_row(task: CellTask, model: ModelSpec, error: BaseException, seconds: float) -> ReplicationResult:
    nan = math.nan
    return ReplicationResult(
        dgp=task.dgp.label,
        model=model.display_label,
        rep=task.rep,
        n_individuals=task.n_individuals,
        train_nll_per_obs=nan,
        test_nll_per_obs=nan,
        true_test_nll_per_obs=nan,
        pct_error=nan,
        clamp_count=0,
        wall_seconds=seconds,
        cell_seed=task.seed,
        status=f"failed: {type(error).__name__}: {error}",
    )


def run_cell(task: CellTask) -> list[dict]:
    """
    Executa uma célula e devolve uma linha por modelo.
    Nunca levanta: falhas viram linhas com status "failed: ...".
    """
    token = cell_var.set(f"{task.dgp.label}/rep{task.rep}/n{task.n_individuals}")
    rows: list[ReplicationResult] = []
    try:
        started = time.perf_counter()
        try:
            sim = task.sim.model_copy(
                update={"n_individuals": task.n_individuals, "seed": task.seed}
            )
            ds, _ = DgpService.simulate_dataset(task.dgp, sim)
            split = split_individuals(ds, task.train_fraction, derive_seed(task.seed, "split"))
            oracle = DgpService.true_loglik_detailed(
                task.dgp, split.test, sim.oracle_draws, derive_seed(task.seed, "oracle")
            )
            fit_train, valid = split.train, split.train
            if task.validation_fraction > 0 and split.train.n_individuals >= 2:
                inner = split_individuals(
                    split.train, 1.0 - task.validation_fraction, derive_seed(task.seed, "valid")
                )
                fit_train, valid = inner.train, inner.test
        except Exception as e:  # noqa: BLE001
            elapsed = time.perf_counter() - started
            return [_failed_row(task, m, e, elapsed).as_row() for m in task.models]

        test = split.test
        for model in task.models:
            label = model.display_label
            began = time.perf_counter()
            try:
                tcfg = task.train.model_copy(update={"seed": derive_seed(task.seed, label)})
                fitted = fit(model, fit_train, valid, tcfg)
                eval_seed = derive_seed(task.seed, "eval", label)
                on_test = fitted.evaluate(test, seed=eval_seed)
                on_train = fitted.evaluate(fit_train, seed=eval_seed)
                row = ReplicationResult(
                    dgp=task.dgp.label,
                    model=label,
                    rep=task.rep,
                    n_individuals=task.n_individuals,
                    train_nll_per_obs=on_train.nll / fit_train.n_obs,
                    test_nll_per_obs=on_test.nll / test.n_obs,
                    true_test_nll_per_obs=-oracle.loglik / test.n_obs,
                    pct_error=pct_error(-on_test.nll, oracle.loglik),
                    clamp_count=fitted.clamp_count + on_test.clamp_count + oracle.clamp_count,
                    wall_seconds=time.perf_counter() - began,
                    cell_seed=task.seed,
                )
            except Exception as e:  # noqa: BLE001
                row = _failed_row(task, model, e, time.perf_counter() - began)
            log_cell_result(
                row.dgp,
                row.model,
                row.rep,
                row.status,
                pct_error=row.pct_error if row.ok else None,
                n_individuals=row.n_individuals,
            )
            rows.append(row)
        return [r.as_row() for r in rows]
    finally:
        cell_var.reset(token)


# ============================================================================
# ORQUESTRAÇÃO
# ============================================================================

def _plan_tasks(plan: ExperimentPlan, sizes: Optional[Sequence[int]] = None) -> list[CellTask]:
    tasks = []
    for n in sizes if sizes is not None else [plan.sim.n_individuals]:
        for dgp in plan.dgps:
            for rep in range(plan.replications):
                tasks.append(
                    CellTask(
                        dgp=dgp,
                        models=plan.models,
                        rep=rep,
                        n_individuals=n,
                        seed=cell_seed(
                            plan.base_seed, dgp.label, rep, n if sizes is not None else None
                        ),
                        sim=plan.sim,
                        train=plan.train,
                        train_fraction=plan.train_fraction,
                        validation_fraction=plan.validation_fraction,
                    )
                )
    return tasks


def _row_key(row: dict) -> RowKey:
    return (str(row["dgp"]), str(row["model"]), int(row["rep"]), int(row["n_individuals"]))


def _write_rows(path: Path, rows: Iterable[dict], header: bool) -> None:
    frame = pd.DataFrame(list(rows), columns=list(RESULT_COLUMNS))
    frame.to_csv(
        path,
        mode="w" if header else "a",
        header=header,
        index=False,
        float_format="%.17g",
        lineterminator="\n",
    )


def _rewrite_canonical(path: Path, order: list[RowKey]) -> pd.DataFrame:
    """Reescreve o CSV na ordem do plano, mantendo a última linha de cada chave."""
    frame = read_results(path)
    latest = {_row_key(r): r for r in frame.to_dict("records")}
    rows = [latest[k] for k in order if k in latest]
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        _write_rows(Path(tmp_name), rows, header=True)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return read_results(path)


def _run_tasks(
    tasks: list[CellTask],
    out_path: Union[str, Path],
    workers: int,
    resume: bool,
) -> pd.DataFrame:
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    order = [t.key(m) for t in tasks for m in t.models]

    done: set[RowKey] = set()
    if resume and path.exists() and path.stat().st_size > 0:
        # Linhas com falha são refeitas; a nova linha substitui a antiga na reescrita.
        done = {
            _row_key(r) for r in read_results(path).to_dict("records") if r["status"] == "ok"
        }
    else:
        _write_rows(path, [], header=True)

    pending = []
    for task in tasks:
        missing = [m for m in task.models if task.key(m) not in done]
        if missing:
            pending.append(task.model_copy(update={"models": missing}))

    structured_logger.info(
        f"Running {len(pending)} cells ({len(done)} ok rows already present)",
        cells=len(pending),
        skipped_rows=len(done),
        workers=workers,
        event_type="experiment_start",
    )

    failures = 0

    def append(rows: list[dict]) -> None:
        nonlocal failures
        _write_rows(path, rows, header=False)
        for row in rows:
            record_result_row(row["model"], row["status"], row["wall_seconds"], row["clamp_count"])
            failures += row["status"] != "ok"

    if workers <= 1:
        for task in pending:
            append(run_cell(task))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, task) for task in pending]
            for future in as_completed(futures):
                append(future.result())

    if failures:
        structured_logger.warning(
            f"{failures} cells failed; see the status column",
            failed_rows=failures,
            event_type="experiment_end",
        )
    return _rewrite_canonical(path, order)


def run_misspec_experiment(
    plan: ExperimentPlan,
    out_path: Union[str, Path],
    workers: int = 1,
    resume: bool = False,
) -> pd.DataFrame:
    """Grade DGP × modelo × replicação; devolve a tabela de resultados."""
    return _run_tasks(_plan_tasks(plan), out_path, workers, resume)


def run_sample_size_sweep(
    plan: ExperimentPlan,
    sizes: Sequence[int],
    out_path: Union[str, Path],
    workers: int = 1,
    resume: bool = False,
) -> pd.DataFrame:
    """Mesmo pipeline com n_individuals sobrescrito para cada tamanho."""
    if not sizes or any(n < 2 for n in sizes):
        raise ExperimentError("sweep sizes must be a nonempty list of counts >= 2")
    return _run_tasks(_plan_tasks(plan, sizes), out_path, workers, resume)
