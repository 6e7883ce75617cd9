import json

import pytest

from scenegraph_slam.config import ConfigError, RunConfig, apply_override, load_config


class TestRunConfig:
    def test_defaults_round_trip(self):
        cfg = RunConfig()
        assert RunConfig.from_dict(json.loads(cfg.dumps())) == cfg

    def test_file_and_overrides(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 3, "association": {"rho": 0.7}}))
        cfg = load_config(p, ["association.rho=0.4", "solver.max_iterations=7", "seed=11"])
        assert cfg.association.rho == 0.4
        assert cfg.solver.max_iterations == 7
        assert cfg.seed == 11

    def test_int_coerced_to_float(self):
        assert RunConfig.from_dict({"association": {"rho": 1}}).association.rho == 1.0

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match=r"config\.bogus: unknown key"):
            RunConfig.from_dict({"bogus": {}})

    def test_unknown_key_path(self):
        with pytest.raises(ConfigError, match=r"config\.solver\.nope: unknown key"):
            load_config(overrides=["solver.nope=1"])

    def test_type_errors_name_the_path(self):
        with pytest.raises(ConfigError, match=r"config\.solver\.max_iterations"):
            RunConfig.from_dict({"solver": {"max_iterations": 2.5}})
        with pytest.raises(ConfigError, match=r"config\.seed"):
            RunConfig.from_dict({"seed": "x"})
        with pytest.raises(ConfigError, match=r"config\.noise\.confidence_range"):
            RunConfig.from_dict({"noise": {"confidence_range": [0.5]}})

    def test_invalid_value_rejected(self):
        with pytest.raises(ConfigError, match=r"config\.association"):
            RunConfig.from_dict({"association": {"rho": -1.0}})

    def test_bad_override_syntax(self):
        with pytest.raises(ConfigError, match="KEY=VALUE"):
            apply_override({}, "solver.max_iterations")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "none.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(p)
