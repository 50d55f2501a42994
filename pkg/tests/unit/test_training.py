"""
Testes unitários para o laço de treinamento com Adam.
"""

import math

import numpy as np
import pytest

from mapl_choice.dataset import ChoiceDataset
from mapl_choice.exceptions import TrainingDivergedError
from mapl_choice.schemas import ModelKind, ModelSpec, TrainConfig
from mapl_choice.services.choice_models import fit
from mapl_choice.services.training import train_loop


def _quadratic(params, epoch):
    x = params["x"]
    return float(((x - 3.0) ** 2).sum()), {"x": 2.0 * (x - 3.0)}


def _quadratic_value(params):
    return float(((params["x"] - 3.0) ** 2).sum())


@pytest.mark.unit
class TestTrainLoop:
    """Testes para train_loop."""

    def test_converges_on_quadratic(self):
        """(x − 3)² a partir de x = 0 com lr 1e-2."""
        tcfg = TrainConfig(epochs=2000, lr=1e-2, eval_every=1)
        best, trace = train_loop(_quadratic, {"x": np.zeros(1)}, tcfg, _quadratic_value)
        assert best["x"][0] == pytest.approx(3.0, abs=1e-2)
        assert trace.valid_nll[-1] < trace.valid_nll[0]

    def test_checkpoint_schedule(self):
        """Época 0, múltiplos de eval_every e a última época."""
        tcfg = TrainConfig(epochs=23, lr=1e-2, eval_every=10)
        _, trace = train_loop(_quadratic, {"x": np.zeros(1)}, tcfg, _quadratic_value)
        assert trace.epochs == [0, 10, 20, 23]

    def test_best_snapshot_is_lowest_validation(self):
        """O snapshot devolvido é o de menor NLL de validação, não o último."""
        targets = iter([5.0, 1.0, 4.0, 3.0])

        def valid_eval(params):
            return next(targets)

        tcfg = TrainConfig(epochs=3, lr=0.5, eval_every=1)
        best, trace = train_loop(_quadratic, {"x": np.zeros(1)}, tcfg, valid_eval)
        assert trace.valid_nll == [5.0, 1.0, 4.0, 3.0]
        # o snapshot da época 1 é x após um único passo de Adam (≈ lr)
        assert best["x"][0] == pytest.approx(0.5, rel=1e-6)

    def test_deterministic(self):
        tcfg = TrainConfig(epochs=50, lr=1e-2, eval_every=5)
        a_params, a_trace = train_loop(_quadratic, {"x": np.zeros(2)}, tcfg, _quadratic_value)
        b_params, b_trace = train_loop(_quadratic, {"x": np.zeros(2)}, tcfg, _quadratic_value)
        np.testing.assert_array_equal(a_params["x"], b_params["x"])
        assert a_trace.valid_nll == b_trace.valid_nll

    def test_initial_params_not_mutated(self):
        init = {"x": np.zeros(1)}
        train_loop(_quadratic, init, TrainConfig(epochs=5, eval_every=1), _quadratic_value)
        assert init["x"][0] == 0.0

    def test_train_eval_used_for_checkpoints(self):
        tcfg = TrainConfig(epochs=2, eval_every=1)
        _, trace = train_loop(
            _quadratic, {"x": np.zeros(1)}, tcfg, _quadratic_value, train_eval=lambda p: 42.0
        )
        assert trace.train_nll == [42.0, 42.0, 42.0]

    def test_wall_clock_monotone(self):
        tcfg = TrainConfig(epochs=30, eval_every=3)
        _, trace = train_loop(_quadratic, {"x": np.zeros(1)}, tcfg, _quadratic_value)
        walls = [c.wall_seconds for c in trace.checkpoints]
        assert walls == sorted(walls)
        assert all(w >= 0 for w in walls)


@pytest.mark.unit
class TestDivergence:
    """Perdas não finitas interrompem o treino."""

    @staticmethod
    def _blows_up_at(epoch_limit: int):
        def loss_and_grad(params, epoch):
            if epoch >= epoch_limit:
                return math.nan, {"x": np.full_like(params["x"], np.nan)}
            return _quadratic(params, epoch)

        return loss_and_grad

    def test_raises_with_partial_trace(self):
        tcfg = TrainConfig(epochs=20, eval_every=1, early_abort_on_nonfinite=True)
        with pytest.raises(TrainingDivergedError) as exc_info:
            train_loop(self._blows_up_at(5), {"x": np.zeros(1)}, tcfg, _quadratic_value)
        assert exc_info.value.trace.epochs == [0, 1, 2, 3, 4]
        assert exc_info.value.exit_code == 3

    def test_stops_quietly_without_early_abort(self):
        tcfg = TrainConfig(epochs=20, eval_every=1, early_abort_on_nonfinite=False)
        best, trace = train_loop(self._blows_up_at(5), {"x": np.zeros(1)}, tcfg, _quadratic_value)
        assert trace.epochs == [0, 1, 2, 3, 4]
        assert np.all(np.isfinite(best["x"]))

    def test_non_finite_validation_raises(self):
        tcfg = TrainConfig(epochs=5, eval_every=1)
        with pytest.raises(TrainingDivergedError, match="checkpoint"):
            train_loop(_quadratic, {"x": np.zeros(1)}, tcfg, lambda p: math.inf)

    def test_non_finite_gradient_raises(self):
        def loss_and_grad(params, epoch):
            return 1.0, {"x": np.full_like(params["x"], np.inf)}

        tcfg = TrainConfig(epochs=5, eval_every=1)
        with pytest.raises(TrainingDivergedError, match="non-finite gradients"):
            train_loop(loss_and_grad, {"x": np.zeros(1)}, tcfg, _quadratic_value)

    def test_nothing_recorded(self):
        tcfg = TrainConfig(epochs=5, eval_every=1, early_abort_on_nonfinite=False)
        with pytest.raises(TrainingDivergedError, match="no finite checkpoint"):
            train_loop(self._blows_up_at(0), {"x": np.zeros(1)}, tcfg, _quadratic_value)


@pytest.mark.unit
class TestMnlTrainingCurve:
    """NLL de treino do MNL: problema convexo, curva sem subidas em janelas de 200 épocas."""

    def test_train_nll_never_rises_over_window(self, small_dataset: ChoiceDataset):
        tcfg = TrainConfig(epochs=1200, lr=1e-2, eval_every=20, seed=0)
        fitted = fit(ModelSpec(kind=ModelKind.MNL), small_dataset, small_dataset, tcfg)
        curve = dict(zip(fitted.trace.epochs, fitted.trace.train_nll))
        windows = [(e, e + 200) for e in curve if e + 200 in curve]
        assert len(windows) >= 50
        for start, stop in windows:
            assert curve[stop] <= curve[start] + 1e-9, (start, stop)
