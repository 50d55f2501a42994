"""
Testes unitários para o DgpService (simulação e oráculo).
"""

import numpy as np
import pytest
from pydantic import ValidationError

from mapl_choice.dataset import ChoiceDataset
from mapl_choice.exceptions import DgpError
from mapl_choice.schemas import DgpScenario, DgpSpec, SimConfig
from mapl_choice.services.choice_models import mnl_nll
from mapl_choice.services.dgp_service import DgpService, covariance_factor

from tests.fixtures.factories import DgpSpecFactory


@pytest.mark.unit
class TestSystematicUtility:
    """Testes para a utilidade sistemática de cada cenário."""

    @pytest.mark.parametrize(
        "scenario, expected",
        [
            (DgpScenario.INDEPENDENT_NORMALS, 2.0),
            (DgpScenario.CORRELATED_NORMALS, 2.0),
            (DgpScenario.INTERACTION, 4.0),
            (DgpScenario.NONLINEAR, 4.0),
        ],
    )
    def test_reference_values(self, scenario: DgpScenario, expected: float):
        """β=(1, 2), x=(1, 1, 1) com os coeficientes padrão."""
        spec = DgpSpec(scenario=scenario)
        value = DgpService.systematic_utility(spec, [1.0, 2.0], [1.0, 1.0, 1.0])
        assert value == pytest.approx(expected, abs=1e-12)

    def test_rejects_wrong_feature_count(self, dgp1: DgpSpec):
        with pytest.raises(DgpError):
            DgpService.systematic_utility(dgp1, [1.0, 2.0], [1.0, 0.5])


@pytest.mark.unit
class TestDgpSpec:
    """Testes de validação do DgpSpec."""

    def test_non_psd_covariance_rejected(self):
        with pytest.raises(ValidationError):
            DgpSpec(scenario=DgpScenario.CORRELATED_NORMALS, sigma1=0.1, sigma2=0.1, sigma12=1.0)

    def test_covariance_off_diagonal_only_when_correlated(self):
        assert DgpSpec(scenario=DgpScenario.INDEPENDENT_NORMALS).covariance[0][1] == 0.0
        corr = DgpSpec(scenario=DgpScenario.CORRELATED_NORMALS)
        assert corr.covariance[0][1] == pytest.approx(0.49)

    def test_factor_reproduces_covariance(self):
        spec = DgpSpecFactory(scenario=DgpScenario.CORRELATED_NORMALS)
        factor = covariance_factor(spec)
        np.testing.assert_allclose(factor @ factor.T, spec.covariance, atol=1e-12)


@pytest.mark.unit
class TestDrawPreferences:
    """Testes para os sorteios de (β1, β2)."""

    def test_shape_and_determinism(self, dgp1: DgpSpec):
        a = DgpService.draw_preferences(dgp1, 50, seed=3)
        b = DgpService.draw_preferences(dgp1, 50, seed=3)
        assert a.betas.shape == (50, 2)
        np.testing.assert_array_equal(a.betas, b.betas)

    def test_moments_match_spec(self):
        spec = DgpSpec(scenario=DgpScenario.CORRELATED_NORMALS)
        betas = DgpService.draw_preferences(spec, 200_000, seed=1).betas
        np.testing.assert_allclose(betas.mean(axis=0), [1.0, 2.0], atol=0.02)
        np.testing.assert_allclose(np.cov(betas.T), spec.covariance, atol=0.03)

    def test_degenerate_spec_collapses_to_means(self):
        spec = DgpSpec(scenario=DgpScenario.INDEPENDENT_NORMALS, sigma1=1e-12, sigma2=1e-12)
        betas = DgpService.draw_preferences(spec, 1000, seed=2).betas
        np.testing.assert_allclose(betas, np.tile([1.0, 2.0], (1000, 1)), atol=1e-9)

    def test_independent_normals_uncorrelated(self, dgp1: DgpSpec):
        betas = DgpService.draw_preferences(dgp1, 200_000, seed=5).betas
        assert abs(np.corrcoef(betas.T)[0, 1]) < 0.01


@pytest.mark.unit
class TestSimulateDataset:
    """Testes para simulate_dataset."""

    def test_shapes(self, dgp1: DgpSpec, small_sim: SimConfig):
        ds, prefs = DgpService.simulate_dataset(dgp1, small_sim)
        assert ds.features.shape == (60, 5, 3, 3)
        assert ds.chosen.shape == (60, 5)
        assert prefs.betas.shape == (60, 2)
        assert ds.features.min() >= -1.0 and ds.features.max() <= 1.0
        assert set(np.unique(ds.chosen)) <= {0, 1, 2}

    def test_same_seed_same_data(self, dgp1: DgpSpec, small_sim: SimConfig):
        a, _ = DgpService.simulate_dataset(dgp1, small_sim)
        b, _ = DgpService.simulate_dataset(dgp1, small_sim)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.chosen, b.chosen)

    def test_different_seed_different_data(self, dgp1: DgpSpec, small_sim: SimConfig):
        a, _ = DgpService.simulate_dataset(dgp1, small_sim)
        b, _ = DgpService.simulate_dataset(dgp1, small_sim.model_copy(update={"seed": 8}))
        assert not np.array_equal(a.features, b.features)

    def test_preferences_constant_within_individual(self, dgp1: DgpSpec, small_sim: SimConfig):
        """O mesmo β gera as escolhas de todas as tarefas do indivíduo."""
        ds, prefs = DgpService.simulate_dataset(dgp1, small_sim)
        nu = DgpService.utilities(dgp1, prefs.betas[:, None, None, :], ds.features)
        assert nu.shape == (60, 5, 3)

    def test_choice_shares_follow_probabilities(self):
        """Com β degenerado, as escolhas seguem o logit com frequências corretas."""
        spec = DgpSpec(scenario=DgpScenario.INDEPENDENT_NORMALS, sigma1=1e-12, sigma2=1e-12)
        ds, _ = DgpService.simulate_dataset(spec, SimConfig(n_individuals=4000, tasks_per_individual=5))
        v = ds.features @ np.array([-1.0, 1.0, 2.0])
        p = np.exp(v - v.max(-1, keepdims=True))
        p /= p.sum(-1, keepdims=True)
        observed = ds.chosen_onehot().mean(axis=(0, 1))
        np.testing.assert_allclose(observed, p.mean(axis=(0, 1)), atol=0.015)

    def test_symmetric_logit_gives_equal_shares(self):
        spec = DgpSpec(
            scenario=DgpScenario.INDEPENDENT_NORMALS,
            beta0=0.0, mu1=0.0, mu2=0.0, sigma1=1e-12, sigma2=1e-12,
        )
        ds, _ = DgpService.simulate_dataset(spec, SimConfig(n_individuals=3000, tasks_per_individual=10))
        shares = ds.chosen_onehot().mean(axis=(0, 1))
        np.testing.assert_allclose(shares, [1 / 3] * 3, atol=0.02)


@pytest.mark.unit
class TestTrueLoglik:
    """Testes para o oráculo da log-verossimilhança verdadeira."""

    def test_zero_features_give_log_uniform(self, dgp1: DgpSpec):
        """Atributos nulos: cada tarefa tem probabilidade 1/3."""
        ds = ChoiceDataset(np.zeros((4, 3, 3, 3)), np.zeros((4, 3), dtype=int))
        ll = DgpService.true_loglik(dgp1, ds, oracle_draws=50, seed=0)
        assert ll == pytest.approx(12 * np.log(1 / 3), abs=1e-12)

    def test_degenerate_preferences_match_mnl(self, small_dataset: ChoiceDataset):
        """σ → 0: o oráculo coincide com a NLL do MNL em (β0, μ1, μ2)."""
        spec = DgpSpec(scenario=DgpScenario.INDEPENDENT_NORMALS, sigma1=1e-12, sigma2=1e-12)
        ll = DgpService.true_loglik(spec, small_dataset, oracle_draws=20, seed=4)
        nll, _ = mnl_nll(np.array([-1.0, 1.0, 2.0]), small_dataset)
        assert ll == pytest.approx(-nll, rel=1e-9)

    def test_deterministic_and_negative(self, dgp1: DgpSpec, small_dataset: ChoiceDataset):
        a = DgpService.true_loglik(dgp1, small_dataset, oracle_draws=100, seed=9)
        b = DgpService.true_loglik(dgp1, small_dataset, oracle_draws=100, seed=9)
        assert a == b
        assert a < 0

    def test_chunking_does_not_change_result(
        self, dgp1: DgpSpec, small_dataset: ChoiceDataset, monkeypatch: pytest.MonkeyPatch
    ):
        from mapl_choice.config import get_settings

        full = DgpService.true_loglik(dgp1, small_dataset, oracle_draws=100, seed=9)
        monkeypatch.setenv("MAPL_CHUNK_SIZE", "7")
        get_settings.cache_clear()
        chunked = DgpService.true_loglik(dgp1, small_dataset, oracle_draws=100, seed=9)
        assert chunked == pytest.approx(full, rel=1e-12)

    def test_oracle_spread_shrinks_with_draws(self, dgp1: DgpSpec, small_dataset: ChoiceDataset):
        """O desvio do oráculo entre 10 sementes cai de R = 100 para R = 1000."""

        def spread(r: int) -> float:
            values = [DgpService.true_loglik(dgp1, small_dataset, oracle_draws=r, seed=s) for s in range(10)]
            return float(np.std(values))

        assert spread(1000) < 0.6 * spread(100)

    def test_mixing_beats_mnl_at_means(self, dgp1: DgpSpec):
        """Nos próprios dados, o modelo verdadeiro supera o MNL nas médias (média de 5 painéis)."""
        gaps = []
        for seed in range(5):
            ds, _ = DgpService.simulate_dataset(
                dgp1, SimConfig(n_individuals=200, tasks_per_individual=5, oracle_draws=1, seed=seed)
            )
            ll = DgpService.true_loglik(dgp1, ds, oracle_draws=500, seed=seed)
            nll, _ = mnl_nll(np.array([dgp1.beta0, dgp1.mu1, dgp1.mu2]), ds)
            gaps.append((ll + nll) / ds.n_obs)
        assert np.mean(gaps) > 0.0

    def test_requires_three_features(self, dgp1: DgpSpec):
        ds = ChoiceDataset(np.zeros((2, 1, 3, 2)), np.zeros((2, 1), dtype=int))
        with pytest.raises(DgpError):
            DgpService.true_loglik(dgp1, ds, oracle_draws=10, seed=0)
