"""
Configurações compartilhadas para todos os testes.
"""

import sys
import tempfile
from pathlib import Path
from typing import Generator

import numpy as np
import pytest
from loguru import logger

# Adicionar o diretório raiz ao Python path
root_dir = Path(__file__).parent.parent
sys.path.insert(0, str(root_dir))

from mapl_choice.config import get_settings  # noqa: E402
from mapl_choice.dataset import ChoiceDataset  # noqa: E402
from mapl_choice.schemas import DgpScenario, DgpSpec, SimConfig, TrainConfig  # noqa: E402
from mapl_choice.services.dgp_service import DgpService  # noqa: E402


@pytest.fixture(autouse=True)
def quiet_logging():
    """Remove os sinks do loguru; os testes não dependem da saída de log."""
    logger.remove()
    yield
    logger.remove()


@pytest.fixture(autouse=True)
def clean_settings(monkeypatch: pytest.MonkeyPatch):
    """Garante Settings sem variáveis MAPL_ do ambiente do desenvolvedor."""
    for key in ("MAPL_LOG_FILE", "MAPL_METRICS_FILE", "MAPL_CHUNK_SIZE", "MAPL_DEFAULT_WORKERS"):
        monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Cria um diretório temporário para testes."""
    with tempfile.TemporaryDirectory() as tmp_dir:
        yield Path(tmp_dir)


# ============================================================================
# FIXTURES DE DADOS
# ============================================================================

@pytest.fixture
def dgp1() -> DgpSpec:
    """DGP de normais independentes com os coeficientes padrão."""
    return DgpSpec(scenario=DgpScenario.INDEPENDENT_NORMALS)


@pytest.fixture
def small_sim() -> SimConfig:
    return SimConfig(n_individuals=60, tasks_per_individual=5, alternatives=3, oracle_draws=200, seed=7)


@pytest.fixture
def small_dataset(dgp1: DgpSpec, small_sim: SimConfig) -> ChoiceDataset:
    """Painel pequeno simulado do DGP1 (60 × 5 × 3 × 3)."""
    ds, _ = DgpService.simulate_dataset(dgp1, small_sim)
    return ds


@pytest.fixture
def tiny_dataset() -> ChoiceDataset:
    """Painel 2 × 2 × 3 × 3 escrito à mão."""
    features = np.array(
        [
            [
                [[1.0, 0.5, -0.5], [0.0, 1.0, 0.2], [-1.0, 0.0, 0.3]],
                [[0.2, -0.4, 0.9], [0.7, 0.1, -0.6], [0.0, 0.0, 0.0]],
            ],
            [
                [[-0.3, 0.8, 0.1], [0.5, -0.2, 0.4], [0.9, 0.6, -0.7]],
                [[0.1, 0.1, 0.1], [-0.5, 0.3, 0.8], [0.4, -0.9, 0.2]],
            ],
        ]
    )
    chosen = np.array([[0, 1], [2, 1]])
    return ChoiceDataset(features, chosen)


@pytest.fixture
def fast_train_config() -> TrainConfig:
    return TrainConfig(epochs=30, lr=1e-2, seed=3, eval_every=5)
