"""
Distribuições agregadas de valência por alternativa.
Amostragem por CDF inversa a partir de draws uniformes explícitos, o que torna
cada draw uma função diferenciável dos parâmetros para u fixo.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from ..exceptions import DistributionError
from ..random_streams import UNIFORM_FLOOR, Stream, open_uniform, stream
from ..schemas import DistributionKind, DrawType

DEFAULT_FM_ORDER = 12

ArrayLike = Union[float, Sequence[float], np.ndarray]


class ValenceFamily(ABC):
    """Família paramétrica ν = F⁻¹(u; θ) com S parâmetros por alternativa."""

    kind: DistributionKind

    @property
    @abstractmethod
    def param_count(self) -> int:
        ...

    @abstractmethod
    def sample(self, params: np.ndarray, u: np.ndarray) -> np.ndarray:
        """params (B, J, S), u (B, R, J) -> ν (B, R, J)."""

    @abstractmethod
    def backprop(self, params: np.ndarray, u: np.ndarray, grad_nu: np.ndarray) -> np.ndarray:
        """Gradiente em relação a params (B, J, S) dado dL/dν (B, R, J)."""


class NormalValence(ValenceFamily):
    """Normal(μ, σ²) parametrizada por (μ, log σ)."""

    kind = DistributionKind.NORMAL

    @property
    def param_count(self) -> int:
        return 2

    def sample(self, params: np.ndarray, u: np.ndarray) -> np.ndarray:
        mu = params[..., 0][:, None, :]
        sigma = np.exp(params[..., 1])[:, None, :]
        return mu + sigma * ndtri(u)

    def backprop(self, params: np.ndarray, u: np.ndarray, grad_nu: np.ndarray) -> np.ndarray:
        sigma = np.exp(params[..., 1])[:, None, :]
        grad = np.empty(params.shape, dtype=np.float64)
        grad[..., 0] = grad_nu.sum(axis=1)
        grad[..., 1] = (grad_nu * sigma * ndtri(u)).sum(axis=1)
        return grad


class FosgerauMabitValence(ValenceFamily):
    """Polinômio em u: ν = Σ_m θ_m u^m, coeficientes livres (monotonicidade não exigida)."""

    kind = DistributionKind.FOSGERAU_MABIT

    def __init__(self, order: int = DEFAULT_FM_ORDER):
        if order < 1:
            raise DistributionError(f"Fosgerau-Mabit order must be >= 1, got {order}")
        self.order = order

    @property
    def param_count(self) -> int:
        return self.order

    def sample(self, params: np.ndarray, u: np.ndarray) -> np.ndarray:
        # Horner
        nu = np.broadcast_to(params[..., -1][:, None, :], u.shape).copy()
        for m in range(self.order - 2, -1, -1):
            nu *= u
            nu += params[..., m][:, None, :]
        return nu

    def backprop(self, params: np.ndarray, u: np.ndarray, grad_nu: np.ndarray) -> np.ndarray:
        grad = np.empty(params.shape, dtype=np.float64)
        power = np.ones_like(u)
        for m in range(self.order):
            grad[..., m] = (grad_nu * power).sum(axis=1)
            power *= u
        return grad


def get_family(kind: DistributionKind, fm_order: int = DEFAULT_FM_ORDER) -> ValenceFamily:
    if kind == DistributionKind.NORMAL:
        return NormalValence()
    if kind == DistributionKind.FOSGERAU_MABIT:
        return FosgerauMabitValence(fm_order)
    raise DistributionError(f"unknown distribution kind: {kind}")


def param_count(kind: DistributionKind, fm_order: int = DEFAULT_FM_ORDER) -> int:
    """Normal -> 2; Fosgerau-Mabit(M) -> M."""
    return get_family(kind, fm_order).param_count


@dataclass(frozen=True, eq=False)
class AggregateDistribution:
    """Distribuição de valência de uma alternativa."""

    kind: DistributionKind
    params: np.ndarray

    def __post_init__(self) -> None:
        params = np.asarray(self.params, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(params)):
            raise DistributionError("distribution parameters must be finite")
        if self.kind == DistributionKind.NORMAL and params.size != 2:
            raise DistributionError(f"Normal expects [mu, log_sigma], got {params.size} values")
        if params.size < 1:
            raise DistributionError("distribution needs at least one parameter")
        object.__setattr__(self, "params", params)

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "AggregateDistribution":
        if sigma <= 0:
            raise DistributionError(f"sigma must be > 0, got {sigma}")
        return cls(DistributionKind.NORMAL, np.array([mu, np.log(sigma)]))

    @classmethod
    def fosgerau_mabit(cls, theta: ArrayLike) -> "AggregateDistribution":
        return cls(DistributionKind.FOSGERAU_MABIT, np.asarray(theta, dtype=np.float64))

    @property
    def family(self) -> ValenceFamily:
        return get_family(self.kind, self.params.size)

    @property
    def sigma(self) -> float:
        if self.kind != DistributionKind.NORMAL:
            raise DistributionError("sigma is only defined for Normal")
        return float(np.exp(self.params[1]))


def sample_valence(dist: AggregateDistribution, u: ArrayLike) -> Union[float, np.ndarray]:
    """ν = F⁻¹(u) para u em (0, 1); escalar entra, escalar sai."""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(~np.isfinite(u_arr)) or np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0):
        raise DistributionError("uniform draws must lie in the open interval (0, 1)")
    flat = u_arr.reshape(1, -1, 1)
    nu = dist.family.sample(dist.params.reshape(1, 1, -1), flat).reshape(u_arr.shape)
    return float(nu) if nu.ndim == 0 else nu


def normal_aggregate_params(
    beta0: float,
    linear_means: Sequence[float],
    linear_sds: Sequence[float],
    features: ArrayLike,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Forma fechada da valência agregada quando β1, β2 são normais independentes:
    μ = β0·w + μ1·x + μ2·z e σ² = σ1²·x² + σ2²·z².
    Aceita features (..., 3) e devolve arrays com a forma (...).
    """
    mu1, mu2 = (float(v) for v in linear_means)
    sd1, sd2 = (float(v) for v in linear_sds)
    if sd1 < 0 or sd2 < 0:
        raise DistributionError("standard deviations must be >= 0")
    x = np.asarray(features, dtype=np.float64)
    w, x1, z = x[..., 0], x[..., 1], x[..., 2]
    mean = beta0 * w + mu1 * x1 + mu2 * z
    var = sd1 ** 2 * x1 ** 2 + sd2 ** 2 * z ** 2
    if mean.ndim == 0:
        return float(mean), float(var)  # type: ignore[return-value]
    return mean, var


def fm_moments(theta: ArrayLike) -> tuple[float, float]:
    """Média e variância exatas de Σ θ_m U^m com U ~ Uniforme(0, 1)."""
    th = np.asarray(theta, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(th)):
        raise DistributionError("theta must be finite")
    m = np.arange(th.size)
    mean = float(np.sum(th / (m + 1)))
    second = float(th @ (1.0 / (m[:, None] + m[None, :] + 1)) @ th)
    return mean, max(second - mean ** 2, 0.0)


# ============================================================================
# DRAWS UNIFORMES
# ============================================================================

@dataclass(frozen=True, eq=False)
class UniformDraws:
    """Draws em (0, 1) com forma (unidades, R, d) e procedência da semente."""

    values: np.ndarray
    seed: int
    draw_type: DrawType = DrawType.PSEUDO_RANDOM

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if np.any(values <= 0.0) or np.any(values >= 1.0):
            raise DistributionError("uniform draws must lie in the open interval (0, 1)")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_draws(self) -> int:
        return int(self.values.shape[-2])


def _halton(rng: np.random.Generator, units: int, r: int, d: int) -> np.ndarray:
    # Sequência Halton embaralhada; R pontos consecutivos por unidade.
    sampler = qmc.Halton(d=d, scramble=True, seed=rng)
    return sampler.random(units * r).reshape(units, r, d)


def _mlhs(rng: np.random.Generator, units: int, r: int, d: int) -> np.ndarray:
    # Hipercubo latino modificado: grade deslocada e embaralhada por unidade e dimensão.
    base = (np.arange(r)[None, :, None] + rng.random((units, 1, d))) / r
    return rng.permuted(np.broadcast_to(base, (units, r, d)).copy(), axis=1)


def make_uniform_draws(
    units: int,
    r: int,
    d: int,
    seed: int,
    draw_type: DrawType = DrawType.PSEUDO_RANDOM,
    purpose: Stream = Stream.TRAIN_DRAWS,
    *sub: int,
) -> UniformDraws:
    """Gera draws (units, R, d) a partir do stream (seed, purpose, *sub)."""
    rng = stream(seed, purpose, *sub)
    if draw_type == DrawType.PSEUDO_RANDOM:
        values = open_uniform(rng, (units, r, d))
    elif draw_type == DrawType.HALTON:
        values = _halton(rng, units, r, d)
    elif draw_type == DrawType.MLHS:
        values = _mlhs(rng, units, r, d)
    else:
        raise DistributionError(f"unknown draw type: {draw_type}")
    values = np.clip(values, UNIFORM_FLOOR, 1.0 - UNIFORM_FLOOR)
    return UniformDraws(values=values, seed=seed, draw_type=draw_type)
