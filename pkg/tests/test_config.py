"""Tests for the JSON run-configuration loader."""
import json

import pytest

from mathforge.config import AppConfig, ArenaSettings, load_config
from mathforge.errors import ConfigError


def write_config(tmp_path, payload):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestDefaults:
    def test_none_gives_all_defaults(self):
        cfg = load_config(None)
        assert cfg.paths == {}
        assert cfg.sigma is None
        assert cfg.bands is None
        assert cfg.sampler.batch_size == 64
        assert cfg.sampler.max_attempt_rounds == 100
        assert cfg.loop.tau_max == 5
        assert cfg.loop.retry_budget == 2
        assert cfg.loop.history_cycles == 2
        assert cfg.loop.mode == "apprentice"
        assert cfg.backends == {}
        assert cfg.arena.k_factor == 32.0
        assert cfg.arena.resamples == 100

    def test_empty_object_is_valid(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {}))
        assert isinstance(cfg, AppConfig)
        assert cfg.loop.tau_max == 5


class TestSections:
    def test_full_config_parses(self, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text("", encoding="utf-8")
        payload = {
            "paths": {"corpus": str(corpus)},
            "difficulty": {
                "sigma": {"A": 2.0},
                "bands": [1.0, 1.4, 1.8, 2.2, 2.625],
            },
            "sampler": {"batch_size": 16, "max_attempt_rounds": 10, "seed": 9},
            "loop": {
                "tau_max": 3,
                "mode": "expert",
                "retry_budget": 1,
                "history_cycles": 0,
                "thresholds": {"Innovation": 7.0},
            },
            "backends": {
                "generator": {
                    "base_url": "http://localhost:9999/v1",
                    "model": "local-model",
                    "credential_env": "GEN_TOKEN",
                    "temperature": 0.4,
                    "top_k": 50,
                }
            },
            "arena": {"k_factor": 16.0, "resamples": 10, "dimension": "Innovation"},
        }
        cfg = load_config(write_config(tmp_path, payload))
        assert cfg.paths == {"corpus": str(corpus)}
        assert cfg.sigma == {"A": 2.0}
        assert cfg.bands == [1.0, 1.4, 1.8, 2.2, 2.625]
        assert cfg.sampler.batch_size == 16
        assert cfg.sampler.rng_seed == 9
        assert cfg.loop.tau_max == 3
        assert cfg.loop.mode == "expert"
        assert cfg.loop.threshold("Innovation") == 7.0
        assert cfg.loop.threshold("Requirement") == 8.0
        assert cfg.arena.k_factor == 16.0
        assert cfg.arena.dimension == "Innovation"

    def test_backend_for_builds_http_config(self, tmp_path):
        payload = {
            "backends": {
                "generator": {
                    "base_url": "http://localhost:9999/v1",
                    "model": "local-model",
                    "credential_env": "GEN_TOKEN",
                    "timeout": 30,
                    "max_retries": 4,
                }
            }
        }
        cfg = load_config(write_config(tmp_path, payload))
        backend = cfg.backend_for("generator")
        assert backend.base_url == "http://localhost:9999/v1"
        assert backend.model_name == "local-model"
        assert backend.credential_env == "GEN_TOKEN"
        assert backend.timeout == 30.0
        assert backend.max_retries == 4
        assert cfg.backend_for("judge") is None

    def test_backend_missing_required_key(self, tmp_path):
        payload = {"backends": {"generator": {"base_url": "http://x/v1"}}}
        cfg = load_config(write_config(tmp_path, payload))
        with pytest.raises(ConfigError, match="generator"):
            cfg.backend_for("generator")

    def test_profile_for_defaults_and_overrides(self, tmp_path):
        payload = {
            "backends": {
                "generator": {
                    "base_url": "http://x/v1",
                    "model": "m",
                    "temperature": 0.9,
                }
            }
        }
        cfg = load_config(write_config(tmp_path, payload))
        profile = cfg.profile_for("generator", "SYSTEM")
        assert profile.system_prompt == "SYSTEM"
        assert profile.temperature == 0.9
        assert profile.top_p == 0.7
        assert profile.top_k == 20
        default = cfg.profile_for("evaluator", "S2")
        assert default.temperature == 0.2


class TestValidation:
    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown config sections"):
            load_config(write_config(tmp_path, {"surprises": {}}))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_non_object_top_level(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(tmp_path / "absent.json")

    def test_bands_wrong_length(self, tmp_path):
        payload = {"difficulty": {"bands": [1.0, 2.0]}}
        with pytest.raises(ConfigError, match="5 nondecreasing edges"):
            load_config(write_config(tmp_path, payload))

    def test_bands_not_sorted(self, tmp_path):
        payload = {"difficulty": {"bands": [1.0, 1.8, 1.4, 2.2, 2.625]}}
        with pytest.raises(ConfigError, match="5 nondecreasing edges"):
            load_config(write_config(tmp_path, payload))

    def test_unknown_path_key(self, tmp_path):
        payload = {"paths": {"dataset": "/nowhere"}}
        with pytest.raises(ConfigError, match="unknown path entry"):
            load_config(write_config(tmp_path, payload))

    def test_nonexistent_path_value(self, tmp_path):
        payload = {"paths": {"corpus": str(tmp_path / "missing.jsonl")}}
        with pytest.raises(ConfigError, match="does not exist"):
            load_config(write_config(tmp_path, payload))

    def test_unknown_backend_role(self, tmp_path):
        payload = {"backends": {"referee": {"base_url": "http://x", "model": "m"}}}
        with pytest.raises(ConfigError, match="unknown backend role"):
            load_config(write_config(tmp_path, payload))

    def test_backend_section_must_be_object(self, tmp_path):
        payload = {"backends": {"generator": "http://x"}}
        with pytest.raises(ConfigError, match="must be an object"):
            load_config(write_config(tmp_path, payload))

    def test_loop_threshold_validation_applies(self, tmp_path):
        payload = {"loop": {"thresholds": {"Sparkle": 5.0}}}
        with pytest.raises(ConfigError, match="unknown dimensions"):
            load_config(write_config(tmp_path, payload))

    def test_arena_validation(self):
        with pytest.raises(ConfigError):
            ArenaSettings(resamples=0)
        with pytest.raises(ConfigError):
            ArenaSettings(k_factor=0.0)
        with pytest.raises(ConfigError):
            ArenaSettings(retry_cap=-1)
