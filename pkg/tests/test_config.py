import json

import pytest

from fdnet.config import RunConfig, apply_overrides, config_from_dict, load_config, with_overrides
from fdnet.errors import ConfigError


def test_defaults():
    cfg = load_config()
    assert (cfg.physics.beta, cfg.physics.dt, cfg.physics.num_steps, cfg.physics.num_points) == (0.0002, 1.0, 1000, 31)
    assert (cfg.data.num_samples, cfg.data.split_ratio) == (200, 0.75)
    assert (cfg.model.k, cfg.sampler.batch_size, cfg.sampler.seed) == (10, 64, 46)
    assert cfg.loss.boundary_weight == 10.0
    assert cfg.optimizer == "trcg" and cfg.trcg.epoch_budget == 3.0
    assert cfg.adam.learning_rate == 1e-3 and cfg.adam.epochs == 200
    assert (cfg.table1.dt, cfg.table1.num_steps) == (200.0, 5)


@pytest.mark.parametrize("doc", [
    {"bogus": 1},
    {"physics": {"betta": 1}},
    {"model": {"k": 0}},
    {"model": {"k": 2.5}},
    {"optimizer": "sgd"},
    {"physics": {"dt": -1}},
    {"physics": "x"},
    {"table1": {"ks": 3}},
    {"adam": {"learning_rate": "fast"}},
])
def test_rejects_invalid(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_overrides_parse_json_values():
    cfg = load_config(overrides=["model.k=20", 'optimizer="adam"', "table1.ks=[1,2]"])
    assert cfg.model.k == 20 and cfg.optimizer == "adam" and cfg.table1.ks == (1, 2)


def test_override_without_equals():
    with pytest.raises(ConfigError):
        apply_overrides({}, ["model.k"])


def test_file_and_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"model": {"k": 5}, "sampler": {"batch_size": 32}}))
    cfg = load_config(path, ["model.k=7"])
    assert cfg.model.k == 7 and cfg.sampler.batch_size == 32


def test_missing_and_unparseable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")


def test_round_trip_and_fingerprint():
    cfg = load_config(overrides=["model.k=3"])
    again = config_from_dict(cfg.to_dict())
    assert again == cfg and again.fingerprint() == cfg.fingerprint()
    assert cfg.fingerprint() != RunConfig().fingerprint()


def test_with_overrides_is_pure():
    cfg = RunConfig()
    other = with_overrides(cfg, {"model.k": 4})
    assert cfg.model.k == 10 and other.model.k == 4
