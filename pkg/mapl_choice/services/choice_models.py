"""
Zoológico de modelos de escolha: MNL, logit misto por máxima verossimilhança
simulada, redes neurais sem heterogeneidade e MAPL (estimador × distribuição
agregada). Todos expõem NLL com gradiente exato, probabilidades previstas e
um `fit` que passa pelo laço de treinamento comum.
"""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np
from scipy.special import logsumexp, ndtri, softmax

from ..config import get_settings
from ..dataset import ChoiceDataset
from ..exceptions import ConfigError, NumericalError, TrainingDivergedError
from ..logging_config import log_clamp_events, structured_logger
from ..random_streams import Stream, derive_seed
from ..schemas import (
    DgpSpec,
    DrawScheme,
    DrawType,
    MlpConfig,
    ModelKind,
    ModelSpec,
    TrainConfig,
    TrainingTrace,
)
from .dgp_service import DgpService
from .distributions import (
    NormalValence,
    UniformDraws,
    ValenceFamily,
    get_family,
    make_uniform_draws,
    normal_aggregate_params,
)
from .neural_net import (
    MlpParams,
    Params,
    init_mlp_params,
    mlp_backward,
    mlp_forward,
    param_size,
    zeros_like_params,
)
from .training import train_loop

PROBABILITY_FLOOR = 1e-30
LOG_FLOOR = float(np.log(PROBABILITY_FLOOR))

# Os draws são gerados por blocos de tamanho fixo, o que os torna independentes
# de como o cálculo é particionado.
DRAW_BLOCK_TASKS = 1024
DRAW_BLOCK_INDIVIDUALS = 64

MXL_START_LOG_SD = float(np.log(0.5))


@dataclass
class Evaluation:
    """NLL total, gradientes opcionais, eventos de piso e probabilidades opcionais."""

    nll: float
    grads: Optional[Params] = None
    clamp_count: int = 0
    proba: Optional[np.ndarray] = None


def _chunked_draws(
    n_units: int,
    chunk: int,
    block: int,
    r: int,
    d: int,
    seed: int,
    draw_type: DrawType,
    purpose: Stream,
    epoch_key: int,
) -> Iterator[tuple[int, int, np.ndarray]]:
    """
    Percorre as unidades em pedaços de `chunk`; os draws de cada pedaço são
    fatiados dos blocos fixos de tamanho `block` que o cobrem.
    """
    cached: dict[int, np.ndarray] = {}
    for start in range(0, n_units, chunk):
        stop = min(start + chunk, n_units)
        first, last = start // block, (stop - 1) // block
        for index in [k for k in cached if k < first]:
            del cached[index]
        parts = []
        for index in range(first, last + 1):
            lo, hi = index * block, min((index + 1) * block, n_units)
            if index not in cached:
                cached[index] = make_uniform_draws(
                    hi - lo, r, d, seed, draw_type, purpose, index, epoch_key
                ).values
            parts.append(cached[index][max(start, lo) - lo:min(stop, hi) - lo])
        yield start, stop, parts[0] if len(parts) == 1 else np.concatenate(parts, axis=0)


def _given_draws(
    uniforms: np.ndarray, n_units: int, chunk: int
) -> Iterator[tuple[int, int, np.ndarray]]:
    u = np.asarray(uniforms, dtype=np.float64)
    if u.shape[0] != n_units:
        raise ConfigError(f"expected uniforms for {n_units} units, got shape {u.shape}")
    for start in range(0, n_units, chunk):
        stop = min(start + chunk, n_units)
        yield start, stop, u[start:stop]


def _chunk_tasks() -> int:
    return get_settings().chunk_size


# ============================================================================
# LOGIT E MNL
# ============================================================================

def logit_link(valences: np.ndarray) -> np.ndarray:
    """Softmax no último eixo com subtração do máximo."""
    return softmax(np.asarray(valences, dtype=np.float64), axis=-1)


def _chosen_values(values: np.ndarray, chosen: np.ndarray) -> np.ndarray:
    return np.take_along_axis(values, chosen[..., None], axis=-1)[..., 0]


def mnl_nll(beta: np.ndarray, ds: ChoiceDataset) -> tuple[float, np.ndarray]:
    """NLL do MNL com utilidade βᵀx e gradiente analítico Σ (P − y)ᵀX."""
    beta = np.asarray(beta, dtype=np.float64)
    v = ds.features @ beta
    nll = float((logsumexp(v, axis=-1) - _chosen_values(v, ds.chosen)).sum())
    residual = softmax(v, axis=-1) - ds.chosen_onehot()
    grad = np.einsum("ntj,ntjk->k", residual, ds.features)
    return nll, grad


def mnl_newton(
    ds: ChoiceDataset,
    beta: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> tuple[np.ndarray, float]:
    """Newton com Hessiana exata e busca linear por retrocesso; devolve (β̂, NLL)."""
    beta = np.zeros(ds.n_features) if beta is None else np.asarray(beta, dtype=np.float64).copy()
    nll, grad = mnl_nll(beta, ds)
    x = ds.features
    for _ in range(max_iter):
        p = softmax(x @ beta, axis=-1)
        xbar = np.einsum("ntj,ntjk->ntk", p, x)
        hess = np.einsum("ntj,ntjk,ntjl->kl", p, x, x) - np.einsum("ntk,ntl->kl", xbar, xbar)
        step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        while True:
            candidate = beta - t * step
            cand_nll, cand_grad = mnl_nll(candidate, ds)
            if cand_nll <= nll:
                break
            t *= 0.5
            if t < 1e-8:
                return beta, nll
        improvement = nll - cand_nll
        beta, nll, grad = candidate, cand_nll, cand_grad
        if np.max(np.abs(t * step)) < tol or improvement < tol * max(1.0, abs(nll)):
            break
    return beta, nll


# ============================================================================
# LOGIT MISTO (SML em painel)
# ============================================================================

def _mxl_simulate(
    theta: np.ndarray,
    ds: ChoiceDataset,
    r: int,
    seed: int,
    draw_type: DrawType = DrawType.PSEUDO_RANDOM,
    purpose: Stream = Stream.TRAIN_DRAWS,
    epoch_key: int = 0,
    need_grad: bool = True,
    proba: bool = False,
    uniforms: Optional[np.ndarray] = None,
) -> Evaluation:
    """
    θ = (β0, μ1, μ2, log σ1, log σ2). Por indivíduo: média sobre R draws do
    produto das probabilidades escolhidas nas T tarefas. O gradiente passa
    pelos draws reparametrizados β = μ + σ·Φ⁻¹(u) com u fixo. `uniforms`
    (N, R, 2) substitui os draws gerados.
    """
    if ds.n_features != 3:
        raise ConfigError(
            f"mixed logit needs K=3 features (x0 fixed, x1 and x2 random), got K={ds.n_features}"
        )
    theta = np.asarray(theta, dtype=np.float64)
    beta0, mu, sd = theta[0], theta[1:3], np.exp(theta[3:5])
    onehot = ds.chosen_onehot()
    total = 0.0
    clamps = 0
    grad = np.zeros(5)
    probs = np.empty(ds.features.shape[:3]) if proba else None

    chunk = max(1, _chunk_tasks() // ds.tasks_per_individual)
    if uniforms is not None:
        r = int(np.shape(uniforms)[1])
        blocks = _given_draws(uniforms, ds.n_individuals, chunk)
    else:
        blocks = _chunked_draws(
            ds.n_individuals, chunk, DRAW_BLOCK_INDIVIDUALS, r, 2, seed, draw_type, purpose, epoch_key
        )
    for start, stop, u in blocks:
        z = ndtri(u)                                        # (n, R, 2)
        b = mu + sd * z
        x = ds.features[start:stop][:, None]                # (n, 1, T, J, K)
        nu = (
            beta0 * x[..., 0]
            + b[..., 0, None, None] * x[..., 1]
            + b[..., 1, None, None] * x[..., 2]
        )                                                   # (n, R, T, J)
        log_p = nu - logsumexp(nu, axis=-1, keepdims=True)
        y = onehot[start:stop][:, None]
        s = (log_p * y).sum(axis=(-1, -2))                  # (n, R)
        log_li = logsumexp(s, axis=1) - np.log(r)
        low = log_li < LOG_FLOOR
        clamps += int(low.sum())
        total -= float(np.where(low, LOG_FLOOR, log_li).sum())

        p = np.exp(log_p)
        if probs is not None:
            probs[start:stop] = p.mean(axis=1)
        if not need_grad:
            continue
        w = softmax(s, axis=1) * (~low)[:, None]
        dnu = -w[:, :, None, None] * (y - p)
        grad[0] += float((dnu * x[..., 0]).sum())
        db1 = (dnu * x[..., 1]).sum(axis=(-1, -2))
        db2 = (dnu * x[..., 2]).sum(axis=(-1, -2))
        grad[1] += float(db1.sum())
        grad[2] += float(db2.sum())
        grad[3] += float((db1 * sd[0] * z[..., 0]).sum())
        grad[4] += float((db2 * sd[1] * z[..., 1]).sum())

    return Evaluation(
        nll=total,
        grads={"theta": grad} if need_grad else None,
        clamp_count=clamps,
        proba=probs,
    )


def mxl_snll(
    means: np.ndarray,
    log_sds: np.ndarray,
    beta0: float,
    ds: ChoiceDataset,
    r: int,
    seed: int,
    draw_type: DrawType = DrawType.PSEUDO_RANDOM,
    uniforms: Optional[np.ndarray] = None,
) -> tuple[float, np.ndarray]:
    """SNLL em painel do logit misto e gradiente na ordem (β0, μ1, μ2, log σ1, log σ2)."""
    theta = np.concatenate([[beta0], np.asarray(means, float), np.asarray(log_sds, float)])
    result = _mxl_simulate(theta, ds, r, seed, draw_type, uniforms=uniforms)
    if result.clamp_count:
        log_clamp_events("mxl_snll", result.clamp_count)
    assert result.grads is not None
    return result.nll, result.grads["theta"]


# ============================================================================
# MAPL
# ============================================================================

def _mapl_block(
    family: ValenceFamily,
    theta: np.ndarray,
    u: np.ndarray,
    chosen: np.ndarray,
    need_grad: bool = True,
) -> tuple[float, Optional[np.ndarray], int, np.ndarray]:
    """
    Um bloco de tarefas: theta (B, J, S), u (B, R, J), chosen (B,).
    Devolve (NLL, dNLL/dθ, eventos de piso, probabilidade média (B, J)).
    """
    nu = family.sample(theta, u)                            # (B, R, J)
    p = softmax(nu, axis=-1)
    p_bar = p.mean(axis=1)
    p_c = _chosen_values(p_bar, chosen)
    low = p_c < PROBABILITY_FLOOR
    nll = -float(np.log(np.where(low, PROBABILITY_FLOOR, p_c)).sum())
    if not need_grad:
        return nll, None, int(low.sum()), p_bar

    r = u.shape[1]
    scale = np.where(low, 0.0, -1.0 / (r * np.maximum(p_c, PROBABILITY_FLOOR)))
    p_rc = _chosen_values(p, np.broadcast_to(chosen[:, None], p.shape[:2]))  # (B, R)
    onehot = np.eye(p.shape[-1])[chosen][:, None, :]
    grad_nu = scale[:, None, None] * p_rc[..., None] * (onehot - p)
    return nll, family.backprop(theta, u, grad_nu), int(low.sum()), p_bar


def _check_predicted(theta: np.ndarray, offset: int) -> None:
    bad = np.argwhere(~np.isfinite(theta))
    if bad.size:
        task, alt = int(bad[0][0]) + offset, int(bad[0][1])
        raise NumericalError(
            f"non-finite predicted distribution parameters for alternative {alt} in task {task}",
            details={"task": task, "alternative": alt},
        )


def mapl_closed_form_normal_nll(
    dgp: DgpSpec,
    ds: ChoiceDataset,
    r: int,
    seed: int,
    draw_type: DrawType = DrawType.PSEUDO_RANDOM,
    uniforms: Optional[np.ndarray] = None,
) -> Evaluation:
    """
    NLL do MAPL-Normal com parâmetros por alternativa vindos da forma fechada do
    DGP: média da utilidade em (μ1, μ2) e variância [x1 x2] Σ [x1 x2]ᵀ.
    `uniforms` (N·T, R, J) substitui os draws gerados.
    """
    x = ds.features.reshape(-1, ds.n_alternatives, ds.n_features)
    chosen = ds.chosen.reshape(-1)
    mean = DgpService.utilities(dgp, np.array([dgp.mu1, dgp.mu2]), x)
    _, var = normal_aggregate_params(
        dgp.beta0, (dgp.mu1, dgp.mu2), (dgp.sigma1, dgp.sigma2), x
    )
    var = var + 2.0 * dgp.covariance[0][1] * x[..., 1] * x[..., 2]
    log_sd = 0.5 * np.log(np.maximum(var, 1e-300))
    theta = np.stack([mean, log_sd], axis=-1)

    family = NormalValence()
    total = 0.0
    clamps = 0
    if uniforms is not None:
        blocks = _given_draws(uniforms, len(chosen), _chunk_tasks())
    else:
        blocks = _chunked_draws(
            len(chosen), _chunk_tasks(), DRAW_BLOCK_TASKS, r, ds.n_alternatives, seed,
            draw_type, Stream.EVAL_DRAWS, 0,
        )
    for start, stop, u in blocks:
        nll, _, low, _ = _mapl_block(family, theta[start:stop], u, chosen[start:stop], False)
        total += nll
        clamps += low
    return Evaluation(nll=total, clamp_count=clamps)


# ============================================================================
# MODELOS
# ============================================================================

class ChoiceModel(ABC):
    """Contrato comum dos modelos: parâmetros iniciais, NLL e probabilidades."""

    def __init__(self, spec: ModelSpec, n_features: int, n_alternatives: int):
        self.spec = spec
        self.n_features = n_features
        self.n_alternatives = n_alternatives

    @abstractmethod
    def init_params(self, ds: ChoiceDataset, seed: int) -> Params:
        ...

    @abstractmethod
    def simulate(
        self,
        params: Params,
        ds: ChoiceDataset,
        *,
        seed: int,
        train: bool = False,
        epoch: int = 0,
        r: Optional[int] = None,
        need_grad: bool = True,
        proba: bool = False,
    ) -> Evaluation:
        ...

    @property
    def distribution_param_count(self) -> Optional[int]:
        return None

    def _epoch_key(self, train: bool, epoch: int) -> int:
        # Draws novos por época só no esquema pseudoaleatório durante o treino.
        if train and self.spec.draw_scheme == DrawScheme.PSEUDO_RANDOM:
            return epoch + 1
        return 0

    def loss_and_grad(self, params: Params, ds: ChoiceDataset, epoch: int, seed: int) -> Evaluation:
        return self.simulate(params, ds, seed=seed, train=True, epoch=epoch)

    def evaluate(
        self, params: Params, ds: ChoiceDataset, r: Optional[int] = None, seed: int = 0
    ) -> Evaluation:
        return self.simulate(params, ds, seed=seed, r=r, need_grad=False)

    def predict_proba(
        self, params: Params, ds: ChoiceDataset, r: Optional[int] = None, seed: int = 0
    ) -> np.ndarray:
        """Probabilidades previstas (N, T, J)."""
        result = self.simulate(params, ds, seed=seed, r=r, need_grad=False, proba=True)
        assert result.proba is not None
        return result.proba


class MnlModel(ChoiceModel):
    """Logit multinomial com utilidade linear nos atributos."""

    def init_params(self, ds: ChoiceDataset, seed: int) -> Params:
        return {"beta": np.zeros(self.n_features)}

    def simulate(self, params, ds, *, seed, train=False, epoch=0, r=None,
                 need_grad=True, proba=False) -> Evaluation:
        nll, grad = mnl_nll(params["beta"], ds)
        return Evaluation(
            nll=nll,
            grads={"beta": grad} if need_grad else None,
            proba=logit_link(ds.features @ params["beta"]) if proba else None,
        )


class MixedLogitModel(ChoiceModel):
    """Logit misto com β1, β2 normais independentes e β0 fixo."""

    def __init__(self, spec: ModelSpec, n_features: int, n_alternatives: int):
        if n_features != 3:
            raise ConfigError(
                f"mixed logit needs K=3 features (x0 fixed, x1 and x2 random), got K={n_features}"
            )
        super().__init__(spec, n_features, n_alternatives)

    def init_params(self, ds: ChoiceDataset, seed: int) -> Params:
        beta, _ = mnl_newton(ds)
        return {"theta": np.array([*beta[:3], MXL_START_LOG_SD, MXL_START_LOG_SD])}

    def simulate(self, params, ds, *, seed, train=False, epoch=0, r=None,
                 need_grad=True, proba=False) -> Evaluation:
        draws = r if r is not None else (self.spec.r_train if train else self.spec.r_eval)
        return _mxl_simulate(
            params["theta"],
            ds,
            draws,
            seed,
            self.spec.draw_type,
            Stream.TRAIN_DRAWS if train else Stream.EVAL_DRAWS,
            self._epoch_key(train, epoch),
            need_grad=need_grad,
            proba=proba,
        )


class _MlpModel(ChoiceModel):
    """Base dos modelos com um MLP compartilhado aplicado a cada alternativa."""

    def __init__(self, spec: ModelSpec, n_features: int, n_alternatives: int):
        super().__init__(spec, n_features, n_alternatives)
        self.cfg = MlpConfig(
            input_dim=n_features,
            hidden_dims=spec.resolved_hidden_dims,
            output_dim=self._output_dim(),
            dropout_rate=spec.dropout_rate,
            use_layer_norm=spec.use_layer_norm,
        )

    def _output_dim(self) -> int:
        return 1

    def init_params(self, ds: ChoiceDataset, seed: int) -> Params:
        return init_mlp_params(self.cfg, seed=seed)

    def _task_chunk(self, train: bool) -> int:
        # Máscaras de dropout são sorteadas por bloco fixo de tarefas.
        if train and self.cfg.dropout_rate > 0.0:
            return DRAW_BLOCK_TASKS
        return _chunk_tasks()

    def _forward(
        self, params: MlpParams, x: np.ndarray, train: bool, seed: int, epoch: int, start: int
    ):
        block = start // DRAW_BLOCK_TASKS
        dropout_seed = derive_seed(seed, "dropout", epoch, block) if train else None
        out, cache = mlp_forward(
            params, self.cfg, x.reshape(-1, self.n_features),
            mode="train" if train else "eval", dropout_seed=dropout_seed,
        )
        return out.reshape(x.shape[0], x.shape[1], -1), cache


class NeuralNetModel(_MlpModel):
    """Rede que prevê uma utilidade por alternativa; sem heterogeneidade."""

    def simulate(self, params, ds, *, seed, train=False, epoch=0, r=None,
                 need_grad=True, proba=False) -> Evaluation:
        x = ds.features.reshape(-1, ds.n_alternatives, ds.n_features)
        chosen = ds.chosen.reshape(-1)
        grads = zeros_like_params(params) if need_grad else None
        probs = np.empty(x.shape[:2]) if proba else None
        total = 0.0
        chunk = self._task_chunk(train)
        for start in range(0, len(chosen), chunk):
            stop = min(start + chunk, len(chosen))
            out, cache = self._forward(params, x[start:stop], train, seed, epoch, start)
            v = out[..., 0]
            c = chosen[start:stop]
            total += float((logsumexp(v, axis=-1) - _chosen_values(v, c)).sum())
            p = softmax(v, axis=-1)
            if probs is not None:
                probs[start:stop] = p
            if grads is not None:
                residual = p - np.eye(ds.n_alternatives)[c]
                g, _ = mlp_backward(cache, residual.reshape(-1, 1))
                for k in grads:
                    grads[k] += g[k]
        return Evaluation(
            nll=total,
            grads=grads,
            proba=probs.reshape(ds.features.shape[:3]) if probs is not None else None,
        )


class MaplModel(_MlpModel):
    """
    MAPL: o estimador mapeia os atributos de cada alternativa para os S
    parâmetros da sua distribuição de valência; a probabilidade é a média do
    logit sobre R draws de valência por tarefa.
    """

    def __init__(self, spec: ModelSpec, n_features: int, n_alternatives: int):
        self.family = get_family(spec.mapl_distribution, spec.fm_order)
        super().__init__(spec, n_features, n_alternatives)

    def _output_dim(self) -> int:
        return self.family.param_count

    @property
    def distribution_param_count(self) -> Optional[int]:
        return self.family.param_count

    def predict_params(self, params: MlpParams, features: np.ndarray) -> np.ndarray:
        """Parâmetros de distribuição (B, J, S) em modo eval."""
        x = np.asarray(features, dtype=np.float64)
        x = x[None] if x.ndim == 2 else x
        theta, _ = self._forward(params, x, False, 0, 0, 0)
        _check_predicted(theta, 0)
        return theta

    def simulate(self, params, ds, *, seed, train=False, epoch=0, r=None,
                 need_grad=True, proba=False) -> Evaluation:
        draws = r if r is not None else (self.spec.r_train if train else self.spec.r_eval)
        x = ds.features.reshape(-1, ds.n_alternatives, ds.n_features)
        chosen = ds.chosen.reshape(-1)
        grads = zeros_like_params(params) if need_grad else None
        probs = np.empty(x.shape[:2]) if proba else None
        total = 0.0
        clamps = 0
        blocks = _chunked_draws(
            len(chosen), self._task_chunk(train), DRAW_BLOCK_TASKS, draws, ds.n_alternatives,
            seed,
            self.spec.draw_type,
            Stream.TRAIN_DRAWS if train else Stream.EVAL_DRAWS,
            self._epoch_key(train, epoch),
        )
        for start, stop, u in blocks:
            theta, cache = self._forward(params, x[start:stop], train, seed, epoch, start)
            _check_predicted(theta, start)
            nll, dtheta, low, p_bar = _mapl_block(
                self.family, theta, u, chosen[start:stop], need_grad
            )
            total += nll
            clamps += low
            if probs is not None:
                probs[start:stop] = p_bar
            if grads is not None and dtheta is not None:
                g, _ = mlp_backward(cache, dtheta.reshape(-1, self.family.param_count))
                for k in grads:
                    grads[k] += g[k]
        return Evaluation(
            nll=total,
            grads=grads,
            clamp_count=clamps,
            proba=probs.reshape(ds.features.shape[:3]) if probs is not None else None,
        )


def mapl_probabilities(
    model: MaplModel,
    params: MlpParams,
    features: np.ndarray,
    draws: Union[UniformDraws, np.ndarray],
) -> np.ndarray:
    """
    Probabilidades de uma tarefa (J, K) ou de um lote (B, J, K) dados draws
    uniformes (R, J) ou (B, R, J). Cada alternativa recebe ν = F⁻¹(u; θ_j).
    """
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 2
    theta = model.predict_params(params, x)
    u = draws.values if isinstance(draws, UniformDraws) else np.asarray(draws, dtype=np.float64)
    if u.ndim == 2:
        u = u[None]
    u = np.broadcast_to(u, (theta.shape[0], u.shape[1], theta.shape[1]))
    nu = model.family.sample(theta, u)
    p_bar = softmax(nu, axis=-1).mean(axis=1)
    return p_bar[0] if single else p_bar


def mapl_nll(
    model: MaplModel,
    params: MlpParams,
    ds: ChoiceDataset,
    r: int,
    seed: int,
) -> tuple[float, MlpParams]:
    """NLL do MAPL em modo eval com draws fixos por semente, e seus gradientes."""
    result = model.simulate(params, ds, seed=seed, r=r)
    assert result.grads is not None
    return result.nll, result.grads


_MODEL_CLASSES: dict[ModelKind, type[ChoiceModel]] = {
    ModelKind.MNL: MnlModel,
    ModelKind.MXL_INDEPENDENT_NORMALS: MixedLogitModel,
    ModelKind.SIMPLE_NN: NeuralNetModel,
    ModelKind.DEEP_NN: NeuralNetModel,
    ModelKind.MAPL: MaplModel,
}


def build_model(spec: ModelSpec, n_features: int, n_alternatives: int) -> ChoiceModel:
    try:
        cls = _MODEL_CLASSES[spec.kind]
    except KeyError as e:
        raise ConfigError(f"unknown model kind: {spec.kind}") from e
    return cls(spec, n_features, n_alternatives)


# ============================================================================
# AJUSTE
# ============================================================================

@dataclass
class FittedModel:
    """Modelo ajustado: parâmetros do melhor checkpoint de validação e trace."""

    spec: ModelSpec
    model: ChoiceModel
    params: Params
    trace: TrainingTrace
    seeds: dict[str, int] = field(default_factory=dict)
    clamp_count: int = 0
    wall_seconds: float = 0.0

    @property
    def param_count(self) -> int:
        return param_size(self.params)

    @property
    def best_checkpoint(self):
        return min(self.trace.checkpoints, key=lambda c: c.valid_nll_per_obs)

    def evaluate(self, ds: ChoiceDataset, r: Optional[int] = None, seed: int = 0) -> Evaluation:
        return self.model.evaluate(self.params, ds, r=r, seed=seed)

    def evaluate_nll(self, ds: ChoiceDataset, r: Optional[int] = None, seed: int = 0) -> float:
        """NLL total em `ds` com R_eval draws novos (ou `r`)."""
        return self.evaluate(ds, r=r, seed=seed).nll

    def predict_proba(self, ds: ChoiceDataset, r: Optional[int] = None, seed: int = 0) -> np.ndarray:
        return self.model.predict_proba(self.params, ds, r=r, seed=seed)


def fit(
    spec: ModelSpec,
    train: ChoiceDataset,
    valid: ChoiceDataset,
    tcfg: TrainConfig,
) -> FittedModel:
    """
    Ajusta o modelo com o laço de treinamento comum e devolve os parâmetros
    de melhor NLL de validação. Determinístico dadas as sementes de tcfg.
    """
    if (train.n_features, train.n_alternatives) != (valid.n_features, valid.n_alternatives):
        raise ConfigError("train and validation datasets have different J or K")
    label = spec.display_label
    model = build_model(spec, train.n_features, train.n_alternatives)
    seed = tcfg.seed
    n_train, n_valid = train.n_obs, valid.n_obs
    clamps = {"train": 0}

    def loss_and_grad(params: Params, epoch: int) -> tuple[float, Params]:
        result = model.loss_and_grad(params, train, epoch, seed)
        clamps["train"] += result.clamp_count
        assert result.grads is not None
        return result.nll / n_train, {k: g / n_train for k, g in result.grads.items()}

    def valid_eval(params: Params) -> float:
        return model.evaluate(params, valid, seed=seed).nll / n_valid

    structured_logger.info(
        f"Fitting {label} on {train.n_individuals} individuals",
        model=label,
        epochs=tcfg.epochs,
        lr=spec.learning_rate(tcfg.lr),
        event_type="fit_start",
    )
    started = time.perf_counter()
    init_seed = seed if spec.init_seed is None else derive_seed(seed, "init", spec.init_seed)
    init = model.init_params(train, init_seed)
    try:
        params, trace = train_loop(
            loss_and_grad,
            init,
            tcfg,
            valid_eval,
            lr=spec.learning_rate(tcfg.lr),
            label=label,
        )
    except TrainingDivergedError:
        structured_logger.error(f"Fit of {label} diverged", model=label, event_type="fit_end")
        raise
    elapsed = time.perf_counter() - started

    if clamps["train"]:
        log_clamp_events(f"fit:{label}", clamps["train"])
    fitted = FittedModel(
        spec=spec,
        model=model,
        params=params,
        trace=trace,
        seeds={"train": seed, "init": init_seed},
        clamp_count=clamps["train"],
        wall_seconds=elapsed,
    )
    best = fitted.best_checkpoint
    structured_logger.info(
        f"Fitted {label}: best valid NLL/obs {best.valid_nll_per_obs:.6f} at epoch {best.epoch}",
        model=label,
        best_epoch=best.epoch,
        wall_seconds=round(elapsed, 3),
        event_type="fit_end",
    )
    return fitted
