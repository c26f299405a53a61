from __future__ import annotations

import pytest
import yaml

from soilscreen import config
from soilscreen.config import DEFAULTS, ConfigError, PipelineConfig


def test_flatten_nested():
    assert config.flatten({"dbscan": {"eps": 1.0, "min_samples": 4}}) == {"dbscan.eps": 1.0, "dbscan.min_samples": 4}


def test_coerce():
    assert config.coerce("dbscan.min_samples", 5.0) == 5
    assert config.coerce("dbscan.eps", 2) == 2.0 and isinstance(config.coerce("dbscan.eps", 2), float)
    assert config.coerce("iforest.subsample", None) is None
    assert config.coerce("risk.recompute", True) is True


@pytest.mark.parametrize(
    "key,value",
    [("dbscan.eps", "wide"), ("dbscan.min_samples", 2.5), ("risk.recompute", 1), ("dbscan.eps", None), ("dbscan.radius", 1.0)],
)
def test_coerce_rejects(key, value):
    with pytest.raises(ConfigError):
        config.coerce(key, value)


def test_parse_value():
    assert config.parse_value("0.1") == 0.1
    assert config.parse_value("true") is True
    assert config.parse_value("null") is None
    assert config.parse_value("data.csv") == "data.csv"


def test_load_file_nested_and_dotted(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("dbscan:\n  eps: 0.8\npca.k: 3\n", encoding="utf-8")
    assert config.load_config_file(p) == {"dbscan.eps": 0.8, "pca.k": 3}


def test_load_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load_config_file(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        config.load_config_file(bad)
    unknown = tmp_path / "unknown.yaml"
    unknown.write_text("foo: 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown.yaml.*foo"):
        config.load_config_file(unknown)
    assert config.load_config_file(_empty(tmp_path)) == {}


def _empty(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("", encoding="utf-8")
    return p


def test_digest_ignores_key_order():
    items = list(DEFAULTS.items())
    assert config.config_digest(dict(items)) == config.config_digest(dict(reversed(items)))
    assert config.config_digest(DEFAULTS) != config.config_digest({**DEFAULTS, "pca.k": 3})


def test_dump_round_trip():
    assert config.merge({}, yaml.safe_load(config.dump_config(DEFAULTS))) == DEFAULTS


def test_from_flat_defaults():
    cfg = PipelineConfig.from_flat({})
    assert cfg.forest.contamination == 0.15 and cfg.forest.n_trees == 200
    assert cfg.dbscan.eps == 1.5 and cfg.dbscan.min_samples == 5
    assert (cfg.pca_k, cfg.pca_quantile, cfg.consensus_threshold) == (2, 0.85, 2)
    assert cfg.seed == 42 and cfg.input is None


@pytest.mark.parametrize(
    "override",
    [{"pca.k": 9}, {"pca.quantile": 1.0}, {"consensus.threshold": 0}, {"dbscan.eps": -1.0},
     {"risk.adult.AT_nc": 100.0}, {"risk.abs.As": 2.0}],
)
def test_from_flat_rejects(override):
    with pytest.raises(ConfigError):
        PipelineConfig.from_flat(override)


def test_toxicity_override():
    cfg = PipelineConfig.from_flat({"risk.tox.Cu.rfd_ing": 0.05})
    assert cfg.toxicity["Cu"].rfd_ing == 0.05
