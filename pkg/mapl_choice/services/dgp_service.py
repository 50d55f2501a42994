"""
Serviço de geração de dados sintéticos (DGPs de logit misto) e oráculo da
log-verossimilhança verdadeira.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from ..config import get_settings
from ..dataset import ChoiceDataset, default_feature_names
from ..exceptions import DgpError
from ..logging_config import log_clamp_events, structured_logger
from ..metrics import record_clamps
from ..random_streams import Stream, stream
from ..schemas import DgpScenario, DgpSpec, SimConfig

DGP_FEATURES = 3
PROBABILITY_FLOOR = 1e-30
LOG_FLOOR = float(np.log(PROBABILITY_FLOOR))


@dataclass(frozen=True, eq=False)
class PreferenceDraws:
    """Coeficientes individuais (β1ᵢ, β2ᵢ), forma (N, 2)."""

    betas: np.ndarray

    def __post_init__(self) -> None:
        betas = np.asarray(self.betas, dtype=np.float64)
        if betas.ndim != 2 or betas.shape[1] != 2:
            raise DgpError(f"betas must have shape N×2, got {betas.shape}")
        if not np.all(np.isfinite(betas)):
            raise DgpError("preference draws must be finite")
        betas.setflags(write=False)
        object.__setattr__(self, "betas", betas)


@dataclass(frozen=True)
class OracleResult:
    """Log-verossimilhança simulada do modelo verdadeiro."""

    loglik: float
    clamp_count: int


def covariance_factor(spec: DgpSpec) -> np.ndarray:
    """Fator L com L·Lᵀ = Σ; rejeita covariâncias não PSD."""
    cov = np.asarray(spec.covariance, dtype=np.float64)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals.min() < -1e-12 * max(1.0, float(np.abs(eigvals).max())):
        raise DgpError("covariance matrix of (beta1, beta2) is not positive semi-definite")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


class DgpService:
    """Operações sobre os DGPs da tabela de cenários."""

    @staticmethod
    def _beta_samples(spec: DgpSpec, z: np.ndarray) -> np.ndarray:
        factor = covariance_factor(spec)
        return np.array([spec.mu1, spec.mu2]) + z @ factor.T

    @staticmethod
    def draw_preferences(spec: DgpSpec, n: int, seed: int) -> PreferenceDraws:
        """Sorteia (β1, β2) da normal bivariada do cenário."""
        if n < 1:
            raise DgpError(f"n must be >= 1, got {n}")
        z = stream(seed, Stream.BETAS).standard_normal((n, 2))
        return PreferenceDraws(DgpService._beta_samples(spec, z))

    @staticmethod
    def utilities(spec: DgpSpec, betas: np.ndarray, features: np.ndarray) -> np.ndarray:
        """
        ν vetorizado. betas (..., 2) e features (..., K=3) devem ser
        compatíveis por broadcasting após remover o último eixo.
        """
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != DGP_FEATURES:
            raise DgpError(f"scenario utilities need K={DGP_FEATURES} features, got {x.shape[-1]}")
        b = np.asarray(betas, dtype=np.float64)
        x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
        nu = spec.beta0 * x0 + b[..., 0] * x1 + b[..., 1] * x2
        if spec.scenario == DgpScenario.INTERACTION:
            nu = nu + spec.beta3 * x0 * x1
        elif spec.scenario == DgpScenario.NONLINEAR:
            nu = nu + spec.beta3 * x1 ** 2
        return nu

    @staticmethod
    def systematic_utility(spec: DgpSpec, beta_i: Sequence[float], features_jt: Sequence[float]) -> float:
        """ν_ijt de uma alternativa."""
        x = np.asarray(features_jt, dtype=np.float64)
        if x.shape != (DGP_FEATURES,):
            raise DgpError(f"expected {DGP_FEATURES} features, got shape {x.shape}")
        return float(DgpService.utilities(spec, np.asarray(beta_i, dtype=np.float64), x))

    @staticmethod
    def simulate_dataset(spec: DgpSpec, cfg: SimConfig) -> tuple[ChoiceDataset, PreferenceDraws]:
        """
        Gera o painel: atributos Uniforme[-1, 1], um β por indivíduo mantido
        nas T tarefas e escolha amostrada do logit individual.
        """
        n, t, j = cfg.n_individuals, cfg.tasks_per_individual, cfg.alternatives
        features = stream(cfg.seed, Stream.FEATURES).uniform(-1.0, 1.0, (n, t, j, DGP_FEATURES))
        prefs = DgpService.draw_preferences(spec, n, cfg.seed)

        nu = DgpService.utilities(spec, prefs.betas[:, None, None, :], features)
        probs = softmax(nu, axis=-1)
        if np.max(np.abs(probs.sum(axis=-1) - 1.0)) >= 1e-12:
            raise DgpError("simulated choice probabilities do not sum to one")

        u = stream(cfg.seed, Stream.CHOICES).random((n, t))
        chosen = (np.cumsum(probs, axis=-1) <= u[..., None]).sum(axis=-1)
        chosen = np.minimum(chosen, j - 1)

        structured_logger.debug(
            f"Simulated {spec.label}: N={n}, T={t}, J={j}",
            dgp=spec.label,
            seed=cfg.seed,
            event_type="simulate",
        )
        return ChoiceDataset(features, chosen, default_feature_names(DGP_FEATURES)), prefs

    @staticmethod
    def true_loglik_detailed(
        spec: DgpSpec, ds: ChoiceDataset, oracle_draws: int, seed: int
    ) -> OracleResult:
        """
        LL simulada em painel do modelo verdadeiro: por indivíduo, média sobre R
        draws de β do produto das probabilidades escolhidas nas T tarefas.
        """
        if ds.n_features != DGP_FEATURES:
            raise DgpError(f"dataset has K={ds.n_features}; scenario needs K={DGP_FEATURES}")
        if oracle_draws < 1:
            raise DgpError("oracle_draws must be >= 1")
        n = ds.n_individuals
        z = stream(seed, Stream.ORACLE).standard_normal((n, oracle_draws, 2))
        betas = DgpService._beta_samples(spec, z)

        chunk = max(1, get_settings().chunk_size // max(ds.tasks_per_individual, 1))
        total = 0.0
        clamps = 0
        for start in range(0, n, chunk):
            stop = min(start + chunk, n)
            x = ds.features[start:stop][:, None]                  # (n, 1, T, J, K)
            b = betas[start:stop][:, :, None, None, :]            # (n, R, 1, 1, 2)
            nu = DgpService.utilities(spec, b, x)                 # (n, R, T, J)
            chosen = ds.chosen[start:stop][:, None, :, None]
            log_p = np.take_along_axis(nu, chosen, axis=-1)[..., 0] - logsumexp(nu, axis=-1)
            log_li = logsumexp(log_p.sum(axis=-1), axis=-1) - np.log(oracle_draws)
            low = log_li < LOG_FLOOR
            clamps += int(low.sum())
            total += float(np.where(low, LOG_FLOOR, log_li).sum())

        if clamps:
            log_clamp_events("true_loglik", clamps, dgp=spec.label)
            record_clamps("true_loglik", clamps)
        return OracleResult(loglik=total, clamp_count=clamps)

    @staticmethod
    def true_loglik(spec: DgpSpec, ds: ChoiceDataset, oracle_draws: int, seed: int) -> float:
        return DgpService.true_loglik_detailed(spec, ds, oracle_draws, seed).loglik


# Atalhos em nível de módulo
draw_preferences = DgpService.draw_preferences
systematic_utility = DgpService.systematic_utility
simulate_dataset = DgpService.simulate_dataset
true_loglik = DgpService.true_loglik
