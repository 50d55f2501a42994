"""
Testes unitários para o serviço de experimentos.
"""

import math

import pandas as pd
import pytest

from mapl_choice.exceptions import ExperimentError, NumericalError
from mapl_choice.schemas import (
    RESULT_COLUMNS,
    DgpScenario,
    DgpSpec,
    ExperimentPlan,
    ModelKind,
    ModelSpec,
    SimConfig,
    TrainConfig,
)
from mapl_choice.services.experiment_service import (
    CellTask,
    cell_seed,
    pct_error,
    run_cell,
    run_misspec_experiment,
    run_sample_size_sweep,
)
from mapl_choice.services.report_service import read_results


@pytest.fixture
def mnl_plan() -> ExperimentPlan:
    """Plano 1 DGP × 1 modelo × 2 replicações em escala mínima."""
    return ExperimentPlan(
        dgps=[DgpSpec(scenario=DgpScenario.INDEPENDENT_NORMALS)],
        models=[ModelSpec(kind=ModelKind.MNL)],
        replications=2,
        sim=SimConfig(n_individuals=30, tasks_per_individual=3, oracle_draws=50),
        train=TrainConfig(epochs=10, eval_every=5),
    )


def _task(plan: ExperimentPlan, rep: int = 0) -> CellTask:
    dgp = plan.dgps[0]
    return CellTask(
        dgp=dgp,
        models=plan.models,
        rep=rep,
        n_individuals=plan.sim.n_individuals,
        seed=cell_seed(plan.base_seed, dgp.label, rep),
        sim=plan.sim,
        train=plan.train,
        train_fraction=plan.train_fraction,
        validation_fraction=plan.validation_fraction,
    )


@pytest.mark.unit
class TestPctError:
    """Testes para o erro percentual da log-verossimilhança."""

    @pytest.mark.parametrize(
        "ll_model, ll_true, expected",
        [
            (-11_000.0, -10_000.0, 10.0),
            (-10_000.0, -10_000.0, 0.0),
            (-9_950.0, -10_000.0, -0.5),
        ],
    )
    def test_examples(self, ll_model: float, ll_true: float, expected: float):
        assert pct_error(ll_model, ll_true) == pytest.approx(expected, abs=1e-12)

    def test_zero_true_loglik(self):
        with pytest.raises(ExperimentError):
            pct_error(-1.0, 0.0)


@pytest.mark.unit
class TestCellSeed:
    def test_stable(self):
        assert cell_seed(0, "independent_normals", 3) == cell_seed(0, "independent_normals", 3)

    def test_distinct_per_rep_dgp_and_size(self):
        seeds = {
            cell_seed(0, "independent_normals", 0),
            cell_seed(0, "independent_normals", 1),
            cell_seed(0, "interaction", 0),
            cell_seed(0, "independent_normals", 0, 500),
            cell_seed(1, "independent_normals", 0),
        }
        assert len(seeds) == 5


@pytest.mark.unit
class TestRunCell:
    """Testes para run_cell."""

    def test_one_ok_row_per_model(self, mnl_plan: ExperimentPlan):
        rows = run_cell(_task(mnl_plan))
        assert len(rows) == 1
        row = rows[0]
        assert list(row) == list(RESULT_COLUMNS)
        assert row["status"] == "ok"
        assert row["model"] == "mnl"
        assert row["dgp"] == "independent_normals"
        assert math.isfinite(row["pct_error"])
        assert row["true_test_nll_per_obs"] > 0
        expected = 100.0 * (row["test_nll_per_obs"] - row["true_test_nll_per_obs"]) / row[
            "true_test_nll_per_obs"
        ]
        assert row["pct_error"] == pytest.approx(expected, rel=1e-9)

    def test_deterministic(self, mnl_plan: ExperimentPlan):
        a = run_cell(_task(mnl_plan))[0]
        b = run_cell(_task(mnl_plan))[0]
        for column in ("train_nll_per_obs", "test_nll_per_obs", "true_test_nll_per_obs", "pct_error"):
            assert a[column] == b[column]

    def test_fit_failure_becomes_failed_row(self, mnl_plan: ExperimentPlan, mocker):
        mocker.patch(
            "mapl_choice.services.experiment_service.fit",
            side_effect=NumericalError("loss exploded"),
        )
        rows = run_cell(_task(mnl_plan))
        assert rows[0]["status"] == "failed: NumericalError: loss exploded"
        assert math.isnan(rows[0]["pct_error"])
        assert math.isnan(rows[0]["test_nll_per_obs"])

    def test_simulation_failure_fails_every_model(self, mnl_plan: ExperimentPlan, mocker):
        mocker.patch(
            "mapl_choice.services.experiment_service.DgpService.simulate_dataset",
            side_effect=RuntimeError("no data"),
        )
        plan = mnl_plan.model_copy(
            update={"models": [ModelSpec(kind=ModelKind.MNL), ModelSpec.from_label("mapl_normal")]}
        )
        rows = run_cell(_task(plan))
        assert [r["status"] for r in rows] == ["failed: RuntimeError: no data"] * 2


@pytest.mark.unit
class TestRunExperiment:
    """Testes para a orquestração e o CSV de resultados."""

    def test_two_rows_with_distinct_seeds(self, mnl_plan: ExperimentPlan, temp_dir):
        frame = run_misspec_experiment(mnl_plan, temp_dir / "results.csv")
        assert len(frame) == 2
        assert list(frame["rep"]) == [0, 1]
        assert frame["cell_seed"].nunique() == 2
        assert (frame["status"] == "ok").all()
        assert tuple(read_results(temp_dir / "results.csv").columns) == RESULT_COLUMNS

    def test_resume_fills_missing_rows_identically(self, mnl_plan: ExperimentPlan, temp_dir):
        full_path = temp_dir / "full.csv"
        full = run_misspec_experiment(mnl_plan, full_path)

        partial_path = temp_dir / "partial.csv"
        lines = full_path.read_text().splitlines()
        partial_path.write_text("\n".join(lines[:-1]) + "\n")
        resumed = run_misspec_experiment(mnl_plan, partial_path, resume=True)

        pd.testing.assert_frame_equal(
            full.drop(columns=["wall_seconds"]), resumed.drop(columns=["wall_seconds"])
        )
        # a linha preservada não é recalculada
        assert resumed["wall_seconds"].iloc[0] == full["wall_seconds"].iloc[0]

    def test_resume_on_complete_file_runs_nothing(self, mnl_plan: ExperimentPlan, temp_dir, mocker):
        path = temp_dir / "results.csv"
        run_misspec_experiment(mnl_plan, path)
        spy = mocker.patch("mapl_choice.services.experiment_service.run_cell")
        frame = run_misspec_experiment(mnl_plan, path, resume=True)
        spy.assert_not_called()
        assert len(frame) == 2

    def test_without_resume_file_is_replaced(self, mnl_plan: ExperimentPlan, temp_dir):
        path = temp_dir / "results.csv"
        run_misspec_experiment(mnl_plan, path)
        frame = run_misspec_experiment(mnl_plan, path)
        assert len(frame) == 2

    def test_failures_are_recorded_not_raised(self, mnl_plan: ExperimentPlan, temp_dir, mocker):
        mocker.patch(
            "mapl_choice.services.experiment_service.fit",
            side_effect=NumericalError("loss exploded"),
        )
        frame = run_misspec_experiment(mnl_plan, temp_dir / "results.csv")
        assert len(frame) == 2
        assert frame["status"].str.startswith("failed:").all()
        assert frame["pct_error"].isna().all()

    def test_resume_retries_failed_rows(self, mnl_plan: ExperimentPlan, temp_dir, mocker):
        """Linhas com falha não contam como feitas; o resume as refaz e substitui."""
        path = temp_dir / "results.csv"
        mocker.patch(
            "mapl_choice.services.experiment_service.fit",
            side_effect=NumericalError("loss exploded"),
        )
        failed = run_misspec_experiment(mnl_plan, path)
        assert failed["status"].str.startswith("failed:").all()

        mocker.stopall()
        resumed = run_misspec_experiment(mnl_plan, path, resume=True)
        assert len(resumed) == 2
        assert (resumed["status"] == "ok").all()
        assert list(resumed["rep"]) == [0, 1]
        assert resumed["pct_error"].notna().all()

        fresh = run_misspec_experiment(mnl_plan, temp_dir / "fresh.csv")
        pd.testing.assert_frame_equal(
            fresh.drop(columns=["wall_seconds"]), resumed.drop(columns=["wall_seconds"])
        )

    @pytest.mark.slow
    def test_parallel_matches_serial(self, mnl_plan: ExperimentPlan, temp_dir):
        serial = run_misspec_experiment(mnl_plan, temp_dir / "serial.csv", workers=1)
        parallel = run_misspec_experiment(mnl_plan, temp_dir / "parallel.csv", workers=2)
        pd.testing.assert_frame_equal(
            serial.drop(columns=["wall_seconds"]), parallel.drop(columns=["wall_seconds"])
        )


@pytest.mark.unit
class TestSampleSizeSweep:
    def test_rows_per_size(self, mnl_plan: ExperimentPlan, temp_dir):
        plan = mnl_plan.model_copy(update={"replications": 1})
        frame = run_sample_size_sweep(plan, [12, 20], temp_dir / "sweep.csv")
        assert list(frame["n_individuals"]) == [12, 20]
        assert frame["cell_seed"].nunique() == 2

    @pytest.mark.parametrize("sizes", [[], [1], [10, 0]])
    def test_invalid_sizes(self, mnl_plan: ExperimentPlan, temp_dir, sizes):
        with pytest.raises(ExperimentError):
            run_sample_size_sweep(mnl_plan, sizes, temp_dir / "sweep.csv")
