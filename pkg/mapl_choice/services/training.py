"""
Laço de treinamento full-batch com Adam, compartilhado por todos os modelos
treinados por gradiente. Guarda o snapshot de melhor NLL de validação.
"""

import math
import time
from typing import Callable, Optional

from ..exceptions import NumericalError, TrainingDivergedError
from ..logging_config import log_fit_checkpoint, structured_logger
from ..schemas import Checkpoint, TrainConfig, TrainingTrace
from .neural_net import Params, adam_step, copy_params, init_adam

LossAndGrad = Callable[[Params, int], tuple[float, Params]]
Evaluator = Callable[[Params], float]


def train_loop(
    loss_and_grad: LossAndGrad,
    init_params: Params,
    tcfg: TrainConfig,
    valid_eval: Evaluator,
    train_eval: Optional[Evaluator] = None,
    lr: Optional[float] = None,
    label: str = "model",
) -> tuple[Params, TrainingTrace]:
    """
    Executa `tcfg.epochs` passos de Adam sobre loss_and_grad(params, epoch).

    A perda deve ser a NLL média por observação. Checkpoints são gravados na
    época 0, a cada `eval_every` épocas e na última época; a NLL de treino do
    checkpoint vem de train_eval quando fornecido, senão da própria perda.
    """
    params = copy_params(init_params)
    state = init_adam(params, lr=lr if lr is not None else tcfg.lr)
    trace = TrainingTrace()
    best_params = copy_params(params)
    best_valid = math.inf
    started = time.perf_counter()

    def diverged(message: str, epoch: int) -> TrainingDivergedError:
        structured_logger.error(
            f"Training diverged for {label} at epoch {epoch}: {message}",
            model=label,
            epoch=epoch,
            event_type="fit_diverged",
        )
        return TrainingDivergedError(f"{message} at epoch {epoch}", trace=trace)

    for epoch in range(tcfg.epochs + 1):
        loss, grads = loss_and_grad(params, epoch)
        if not math.isfinite(loss):
            if tcfg.early_abort_on_nonfinite:
                raise diverged("non-finite training loss", epoch)
            structured_logger.warning(
                f"Non-finite training loss for {label} at epoch {epoch}; stopping",
                model=label,
                epoch=epoch,
            )
            break

        if epoch % tcfg.eval_every == 0 or epoch == tcfg.epochs:
            train_nll = train_eval(params) if train_eval is not None else loss
            valid_nll = valid_eval(params)
            if not (math.isfinite(train_nll) and math.isfinite(valid_nll)):
                raise diverged("non-finite checkpoint NLL", epoch)
            trace.append(
                Checkpoint(
                    epoch=epoch,
                    train_nll_per_obs=train_nll,
                    valid_nll_per_obs=valid_nll,
                    wall_seconds=time.perf_counter() - started,
                )
            )
            log_fit_checkpoint(label, epoch, train_nll, valid_nll)
            if valid_nll < best_valid:
                best_valid = valid_nll
                best_params = copy_params(params)

        if epoch == tcfg.epochs:
            break
        try:
            state, params = adam_step(state, params, grads)
        except NumericalError as e:
            if tcfg.early_abort_on_nonfinite:
                raise diverged(e.message, epoch) from e
            break

    if not len(trace):
        raise TrainingDivergedError("no finite checkpoint was recorded", trace=trace)
    return best_params, trace
