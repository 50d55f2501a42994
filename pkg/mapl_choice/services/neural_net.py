"""
MLP mínimo em numpy: camadas afins, layer norm, ReLU e dropout invertido,
gradientes exatos em modo reverso e otimizador Adam.

Os parâmetros são dicionários nome -> array ("W0", "b0", "g0", "s0", ...),
o mesmo formato usado pelos modelos lineares, para que Adam e o verificador
de gradientes sirvam a todos os modelos.
"""

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from ..exceptions import NetworkError, NumericalError
from ..random_streams import Stream, stream
from ..schemas import MlpConfig

Params = dict[str, np.ndarray]
MlpParams = Params
Mode = Literal["train", "eval"]


def copy_params(params: Params) -> Params:
    return {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}


def zeros_like_params(params: Params) -> Params:
    return {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}


def params_finite(params: Params) -> bool:
    return all(np.all(np.isfinite(v)) for v in params.values())


def param_size(params: Params) -> int:
    return int(sum(v.size for v in params.values()))


def _layer_dims(cfg: MlpConfig) -> list[int]:
    return [cfg.input_dim, *cfg.hidden_dims, cfg.output_dim]


def init_mlp_params(cfg: MlpConfig, seed: Optional[int] = None) -> MlpParams:
    """Inicialização He-uniforme; vieses zero; ganhos 1 e deslocamentos 0 no layer norm."""
    rng = stream(cfg.init_seed if seed is None else seed, Stream.INIT)
    dims = _layer_dims(cfg)
    n_hidden = len(cfg.hidden_dims)
    params: MlpParams = {}
    for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        limit = np.sqrt(6.0 / fan_in)
        params[f"W{layer}"] = rng.uniform(-limit, limit, (fan_in, fan_out))
        params[f"b{layer}"] = np.zeros(fan_out)
        if layer < n_hidden and cfg.use_layer_norm:
            params[f"g{layer}"] = np.ones(fan_out)
            params[f"s{layer}"] = np.zeros(fan_out)
    return params


def _check_params(params: MlpParams, cfg: MlpConfig) -> None:
    dims = _layer_dims(cfg)
    for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = params.get(f"W{layer}")
        b = params.get(f"b{layer}")
        if w is None or w.shape != (fan_in, fan_out) or b is None or b.shape != (fan_out,):
            raise NetworkError(f"parameters of layer {layer} do not match the configuration")
        if layer < len(cfg.hidden_dims) and cfg.use_layer_norm:
            for name in (f"g{layer}", f"s{layer}"):
                if name not in params or params[name].shape != (fan_out,):
                    raise NetworkError(f"missing or misshaped layer-norm parameter {name}")


@dataclass
class _LayerCache:
    h_in: np.ndarray
    pre: np.ndarray
    xhat: Optional[np.ndarray] = None
    inv_std: Optional[np.ndarray] = None
    normed: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None


@dataclass
class MlpCache:
    """Intermediários do forward necessários ao backward."""

    params: MlpParams
    cfg: MlpConfig
    mode: str
    squeeze: bool
    out_shape: tuple[int, ...]
    hidden: list[_LayerCache] = field(default_factory=list)
    h_last: Optional[np.ndarray] = None


def mlp_forward(
    params: MlpParams,
    cfg: MlpConfig,
    x: np.ndarray,
    mode: Mode = "eval",
    dropout_seed: Optional[int] = None,
) -> tuple[np.ndarray, MlpCache]:
    """
    afim -> layer norm -> ReLU -> dropout (só em treino) por camada oculta;
    afim final sem ativação. Aceita x (K,) ou (B, K).
    """
    if mode not in ("train", "eval"):
        raise NetworkError(f"mode must be 'train' or 'eval', got {mode}")
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != cfg.input_dim:
        raise NetworkError(f"expected input of width {cfg.input_dim}, got shape {x.shape}")
    _check_params(params, cfg)

    p = cfg.dropout_rate
    use_dropout = mode == "train" and p > 0.0
    rng = stream(dropout_seed or 0, Stream.DROPOUT) if use_dropout else None

    cache = MlpCache(params=params, cfg=cfg, mode=mode, squeeze=squeeze, out_shape=())
    h = x
    for layer in range(len(cfg.hidden_dims)):
        pre = h @ params[f"W{layer}"] + params[f"b{layer}"]
        lc = _LayerCache(h_in=h, pre=pre)
        z = pre
        if cfg.use_layer_norm:
            mu = pre.mean(axis=1, keepdims=True)
            var = pre.var(axis=1, keepdims=True)
            lc.inv_std = 1.0 / np.sqrt(var + cfg.layer_norm_eps)
            lc.xhat = (pre - mu) * lc.inv_std
            z = params[f"g{layer}"] * lc.xhat + params[f"s{layer}"]
        lc.normed = z
        h = np.maximum(z, 0.0)
        if rng is not None:
            lc.mask = (rng.random(h.shape) >= p) / (1.0 - p)
            h = h * lc.mask
        cache.hidden.append(lc)

    out_layer = len(cfg.hidden_dims)
    cache.h_last = h
    out = h @ params[f"W{out_layer}"] + params[f"b{out_layer}"]
    cache.out_shape = out.shape
    if squeeze:
        out = out[0]
    return out, cache


def mlp_backward(cache: MlpCache, upstream_grad: np.ndarray) -> tuple[MlpParams, np.ndarray]:
    """Gradientes exatos dos parâmetros e da entrada dado dL/dsaída."""
    dout = np.asarray(upstream_grad, dtype=np.float64)
    if cache.squeeze and dout.ndim == 1:
        dout = dout[None, :]
    if dout.shape != cache.out_shape or cache.h_last is None:
        raise NetworkError(
            f"upstream gradient shape {dout.shape} does not match cached output {cache.out_shape}"
        )
    params, cfg = cache.params, cache.cfg
    grads: MlpParams = {}
    out_layer = len(cfg.hidden_dims)
    grads[f"W{out_layer}"] = cache.h_last.T @ dout
    grads[f"b{out_layer}"] = dout.sum(axis=0)
    dh = dout @ params[f"W{out_layer}"].T

    for layer in range(out_layer - 1, -1, -1):
        lc = cache.hidden[layer]
        if lc.mask is not None:
            dh = dh * lc.mask
        dz = dh * (lc.normed > 0.0)
        if cfg.use_layer_norm:
            grads[f"g{layer}"] = (dz * lc.xhat).sum(axis=0)
            grads[f"s{layer}"] = dz.sum(axis=0)
            dxhat = dz * params[f"g{layer}"]
            dpre = lc.inv_std * (
                dxhat
                - dxhat.mean(axis=1, keepdims=True)
                - lc.xhat * (dxhat * lc.xhat).mean(axis=1, keepdims=True)
            )
        else:
            dpre = dz
        grads[f"W{layer}"] = lc.h_in.T @ dpre
        grads[f"b{layer}"] = dpre.sum(axis=0)
        dh = dpre @ params[f"W{layer}"].T

    dx = dh[0] if cache.squeeze else dh
    return grads, dx


# ============================================================================
# VERIFICAÇÃO DE GRADIENTES
# ============================================================================

def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(
    loss_and_grad: Callable[[Params], tuple[float, Params]],
    params: Params,
    h: float = 1e-5,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Maior erro relativo entre o gradiente analítico e diferenças centrais.
    Com max_coords, avalia uma amostra aleatória de pelo menos 200 coordenadas.
    """
    if h <= 0:
        raise ValueError("h must be > 0")
    _, analytic = loss_and_grad(params)
    coords = [(k, i) for k in sorted(params) for i in range(params[k].size)]
    if max_coords is not None and len(coords) > max(max_coords, 200):
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(coords), size=max(max_coords, 200), replace=False)
        coords = [coords[i] for i in np.sort(pick)]

    worst = 0.0
    for key, idx in coords:
        plus = copy_params(params)
        minus = copy_params(params)
        plus[key].flat[idx] += h
        minus[key].flat[idx] -= h
        numeric = (loss_and_grad(plus)[0] - loss_and_grad(minus)[0]) / (2.0 * h)
        worst = max(worst, relative_error(float(analytic[key].flat[idx]), numeric))
    return worst


def grad_check(
    params: MlpParams,
    cfg: MlpConfig,
    x: np.ndarray,
    loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]],
    h: float = 1e-5,
    max_coords: Optional[int] = None,
) -> float:
    """Confere mlp_backward contra diferenças finitas em modo eval."""

    def loss_and_grad(p: MlpParams) -> tuple[float, MlpParams]:
        out, cache = mlp_forward(p, cfg, x, mode="eval")
        loss, dout = loss_fn(out)
        grads, _ = mlp_backward(cache, dout)
        return float(loss), grads

    return check_gradients(loss_and_grad, params, h=h, max_coords=max_coords)


# ============================================================================
# ADAM
# ============================================================================

@dataclass(frozen=True)
class AdamState:
    """Momentos de Adam; imutável, adam_step devolve um novo estado."""

    m: Params
    v: Params
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: Params, lr: float = 1e-3) -> AdamState:
    return AdamState(m=zeros_like_params(params), v=zeros_like_params(params), lr=lr)


def adam_step(state: AdamState, params: Params, grads: Params) -> tuple[AdamState, Params]:
    """Atualização de Adam com correção de viés; não altera as entradas."""
    if set(params) != set(grads) or any(params[k].shape != grads[k].shape for k in params):
        raise NetworkError("gradient structure does not match parameters")
    if not params_finite(grads):
        bad = sorted(k for k, g in grads.items() if not np.all(np.isfinite(g)))
        raise NumericalError(f"non-finite gradients rejected: {', '.join(bad)}")

    t = state.step + 1
    m: Params = {}
    v: Params = {}
    new_params: Params = {}
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for k, p in params.items():
        g = grads[k]
        m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        new_params[k] = p - state.lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps)
    new_state = AdamState(
        m=m, v=v, step=t, lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps
    )
    return new_state, new_params
