"""
Testes unitários para Settings e para a configuração de execução em YAML.
"""

import pytest

from mapl_choice.config import (
    RunConfig,
    apply_override,
    config_hash,
    get_settings,
    load_run_config,
)
from mapl_choice.exceptions import ConfigError
from mapl_choice.schemas import DgpScenario, DistributionKind, ModelKind


@pytest.mark.unit
class TestSettings:
    def test_defaults(self):
        settings = get_settings()
        assert settings.app_name == "mapl-choice"
        assert settings.chunk_size == 2048

    def test_environment_override(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv("MAPL_CHUNK_SIZE", "64")
        get_settings.cache_clear()
        assert get_settings().chunk_size == 64

    def test_cached(self):
        assert get_settings() is get_settings()


@pytest.mark.unit
class TestLoadRunConfig:
    """Testes para load_run_config."""

    def test_desk_scale_defaults(self):
        cfg = load_run_config()
        assert cfg.sim.n_individuals == 2000
        assert cfg.experiment.replications == 5
        assert cfg.train.epochs == 500
        assert cfg.dgp.scenario is None

    def test_paper_scale(self):
        cfg = load_run_config(paper_scale=True)
        assert cfg.sim.n_individuals == 10_000
        assert cfg.experiment.replications == 20
        assert cfg.train.epochs == 2_000

    def test_file_then_overrides(self, temp_dir):
        path = temp_dir / "run.yaml"
        path.write_text("dgp:\n  scenario: interaction\nsim:\n  n_individuals: 50\n")
        cfg = load_run_config(path, overrides=["sim.n_individuals=80", "model.R_train=10"])
        assert cfg.dgp.scenario == DgpScenario.INTERACTION
        assert cfg.sim.n_individuals == 80
        assert cfg.model.r_train == 10

    def test_override_wins_over_paper_scale(self):
        cfg = load_run_config(paper_scale=True, overrides=["experiment.replications=3"])
        assert cfg.experiment.replications == 3

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key: sim.n_people"):
            load_run_config(overrides=["sim.n_people=3"])

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match="invalid value for sim.n_individuals"):
            load_run_config(overrides=["sim.n_individuals=0"])

    def test_missing_file(self, temp_dir):
        with pytest.raises(ConfigError, match="not found"):
            load_run_config(temp_dir / "absent.yaml")

    def test_non_mapping_file(self, temp_dir):
        path = temp_dir / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError, match="mapping"):
            load_run_config(path)

    def test_malformed_override(self):
        with pytest.raises(ConfigError, match="key=value"):
            apply_override({}, "sim.n_individuals")


@pytest.mark.unit
class TestRunConfig:
    """Conversão das seções em especificações de domínio."""

    def test_missing_scenario(self):
        with pytest.raises(ConfigError, match="missing key: dgp.scenario"):
            RunConfig().dgp.to_spec()

    def test_non_psd_dgp_rejected(self):
        cfg = load_run_config(overrides=["dgp.sigma1=0.1", "dgp.sigma2=0.1", "dgp.sigma12=1.0"])
        with pytest.raises(ConfigError, match="invalid dgp section"):
            cfg.dgp.to_spec(DgpScenario.CORRELATED_NORMALS)

    def test_model_spec_from_sections(self):
        cfg = load_run_config(overrides=["model.kind=mapl", "mapl.distribution=normal", "nn.hidden=[16]"])
        spec = cfg.model_spec()
        assert spec.kind == ModelKind.MAPL
        assert spec.mapl_distribution == DistributionKind.NORMAL
        assert spec.resolved_hidden_dims == [16]

    def test_nn_seed_reaches_model_specs(self):
        cfg = load_run_config(overrides=["nn.seed=12345"])
        assert cfg.model_spec().init_seed == 12345
        assert [s.init_seed for s in cfg.model_specs(["mnl", "mapl_normal"])] == [12345, 12345]

    def test_deep_nn_keeps_its_architecture(self):
        cfg = load_run_config(overrides=["nn.hidden=[16]"])
        (spec,) = cfg.model_specs(["deep_nn"])
        assert spec.resolved_hidden_dims == [64, 64, 64, 64]

    def test_unknown_model_label(self):
        with pytest.raises(ConfigError, match="unknown model label"):
            RunConfig().model_specs(["probit"])

    def test_experiment_plan(self):
        cfg = load_run_config(overrides=["experiment.dgps=[nonlinear]", "experiment.models=[mnl, mapl_fm]"])
        plan = cfg.experiment_plan()
        assert [d.scenario for d in plan.dgps] == [DgpScenario.NONLINEAR]
        assert [m.display_label for m in plan.models] == ["mnl", "mapl_fm"]
        assert plan.sim.n_individuals == 2000

    def test_train_lr_falls_back_to_nn_lr(self):
        cfg = load_run_config(overrides=["nn.lr=0.005"])
        assert cfg.train_config().lr == 0.005


@pytest.mark.unit
class TestConfigHash:
    def test_stable_and_sensitive(self):
        a = config_hash(load_run_config())
        b = config_hash(load_run_config())
        c = config_hash(load_run_config(overrides=["train.seed=1"]))
        assert a == b
        assert a != c
        assert len(a) == 16
