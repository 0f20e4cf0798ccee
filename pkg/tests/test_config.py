"""
Tests for environment settings and run-config resolution.
"""
import json

import pytest
from pydantic import ValidationError

from viraliency.commands.common import resolve_threads
from viraliency.core.config import Settings, get_settings
from viraliency.core.exceptions import ConfigError
from viraliency.schemas.model import PoolingMode
from viraliency.schemas.run import load_run_config


class TestSettings:

    def test_env_prefix(self, monkeypatch):
        monkeypatch.setenv("LENA_THREADS", "3")
        monkeypatch.setenv("LENA_OUTPUT_DIR", "elsewhere")
        settings = get_settings()
        assert settings.threads == 3
        assert settings.output_dir == "elsewhere"

    def test_log_level_case_insensitive(self, monkeypatch):
        monkeypatch.setenv("LENA_LOG_LEVEL", "debug")
        assert get_settings().log_level == "DEBUG"

    def test_threads_validated(self, monkeypatch):
        monkeypatch.setenv("LENA_THREADS", "0")
        with pytest.raises(ValidationError):
            Settings()

    def test_cached(self):
        assert get_settings() is get_settings()

    def test_resolve_threads(self, monkeypatch):
        monkeypatch.setenv("LENA_THREADS", "5")
        assert resolve_threads(None) == 5
        assert resolve_threads(2) == 2
        with pytest.raises(ConfigError):
            resolve_threads(0)


class TestRunConfig:

    def test_defaults(self):
        config = load_run_config()
        assert config.model.pooling_mode is PoolingMode.LENA
        assert config.train.base_lr == 1e-4
        assert config.train.lr_step_every == 5000
        assert config.threads is None

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"train": {"base_lr": 0.5, "max_iters": 7}}), encoding="utf-8")
        config = load_run_config(str(path), {"train": {"base_lr": 0.25}})
        assert config.train.base_lr == 0.25
        assert config.train.max_iters == 7

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"train": {"learning_rate": 0.1}}), encoding="utf-8")
        with pytest.raises(ConfigError) as exc:
            load_run_config(str(path))
        assert "train.learning_rate" in exc.value.message
        assert exc.value.exit_code == 2

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{\"train\": ", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(str(tmp_path / "absent.json"))

    def test_not_an_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_run_config(str(path))

    def test_eta_vector_length_checked(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={"model": {"eta_init": [0.5, 0.5]}})

    def test_eta_out_of_range(self):
        with pytest.raises(ConfigError):
            load_run_config(overrides={"model": {"eta_init": 1.5}})

    def test_empty_conv_output(self):
        overrides = {"model": {"input_height": 2, "input_width": 2,
                               "conv_layers": [{"out_channels": 2, "kernel": 5}]}}
        with pytest.raises(ConfigError):
            load_run_config(overrides=overrides)
