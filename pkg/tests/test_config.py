import pytest

from wavegan.config import (
    ExperimentConfig,
    apply_overrides,
    load_config,
    save_config,
)
from wavegan.errors import ConfigurationError


class TestRoundTrip:
    def test_save_load(self, tmp_path):
        cfg = ExperimentConfig()
        cfg.train.lr = 3e-4
        cfg.model.variant = "base_index"
        path = tmp_path / "cfg.yaml"
        save_config(cfg, path)
        loaded = load_config(path)
        assert loaded == cfg

    def test_version_check(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("version: 99\n")
        with pytest.raises(ConfigurationError):
            load_config(path)


class TestOverrides:
    def test_dotted_override(self):
        cfg = apply_overrides(ExperimentConfig(), {"train.lr": "2e-4", "model.variant": "base_index"})
        assert cfg.train.lr == pytest.approx(2e-4)
        assert cfg.model.variant == "base_index"

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigurationError):
            apply_overrides(ExperimentConfig(), {"train.nope": "1"})
        with pytest.raises(ConfigurationError):
            apply_overrides(ExperimentConfig(), {"nope.lr": "1"})

    def test_image_size_propagates(self):
        cfg = apply_overrides(ExperimentConfig(), {"data.image_size": "64"})
        assert cfg.model.image_size == 64
        assert cfg.disc.image_size == 64
