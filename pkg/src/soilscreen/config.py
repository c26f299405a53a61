"""Pipeline configuration as flat dotted keys.

A config file is YAML. Keys may be written flat (``dbscan.eps: 1.5``) or
nested (``dbscan: {eps: 1.5}``); both flatten to the same dotted form.
Unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml

from .dbscan import DbscanConfig
from .geodata import METALS
from .iforest import ForestConfig
from .risk import (
    DEFAULT_ABS,
    DEFAULT_RECEPTORS,
    DEFAULT_TOXICITY,
    ExposureParams,
    MetalToxicity,
    ToxicityTable,
)


class ConfigError(ValueError):
    pass


def _default_flat() -> dict[str, Any]:
    flat: dict[str, Any] = {
        "input": None,
        "iforest.n_trees": 200,
        "iforest.contamination": 0.15,
        "iforest.subsample": None,
        "iforest.seed": 42,
        "dbscan.eps": 1.5,
        "dbscan.min_samples": 5,
        "pca.k": 2,
        "pca.quantile": 0.85,
        "consensus.threshold": 2,
        "risk.recompute": False,
        "report.plot_data": True,
    }
    for receptor, params in DEFAULT_RECEPTORS.items():
        for key, value in asdict(params).items():
            flat[f"risk.{receptor}.{key}"] = value
    for metal in METALS:
        flat[f"risk.abs.{metal}"] = DEFAULT_ABS[metal]
    for metal in METALS:
        for key, value in asdict(DEFAULT_TOXICITY[metal]).items():
            flat[f"risk.tox.{metal}.{key}"] = value
    return flat


DEFAULTS: dict[str, Any] = _default_flat()

# keys whose value may be null
_NULLABLE = {"input", "iforest.subsample"} | {
    f"risk.tox.{m}.{f.name}" for m in METALS for f in fields(MetalToxicity) if f.name != "carcinogen"
}
_INT_KEYS = {"iforest.n_trees", "iforest.subsample", "iforest.seed", "dbscan.min_samples", "pca.k", "consensus.threshold"}
_BOOL_KEYS = {"risk.recompute", "report.plot_data"} | {f"risk.tox.{m}.carcinogen" for m in METALS}
_STR_KEYS = {"input"}


def flatten(tree: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(flatten(value, f"{name}."))
        else:
            out[name] = value
    return out


def coerce(key: str, value: Any) -> Any:
    """Check ``value`` against the type expected for ``key``."""
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    if value is None:
        if key in _NULLABLE:
            return None
        raise ConfigError(f"{key} may not be null")
    if key in _BOOL_KEYS:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{key} expects true/false, got {value!r}")
    if key in _STR_KEYS:
        return str(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} expects a number, got {value!r}")
    if key in _INT_KEYS:
        if float(value) != int(value):
            raise ConfigError(f"{key} expects an integer, got {value!r}")
        return int(value)
    return float(value)


def parse_value(text: str) -> Any:
    """Type a command-line value the way YAML would (``0.1``, ``true``, ``null``)."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def merge(base: Mapping[str, Any], updates: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in flatten(updates).items():
        out[key] = coerce(key, value)
    return out


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if tree is None:
        return {}
    if not isinstance(tree, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping of keys to values")
    try:
        return merge({}, tree)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(flat: Mapping[str, Any]) -> str:
    return yaml.safe_dump(dict(flat), sort_keys=False, default_flow_style=False)


def config_digest(flat: Mapping[str, Any]) -> str:
    """sha256 over the sorted key/value pairs; insensitive to key order."""
    canonical = json.dumps(dict(flat), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PipelineConfig:
    input: Path | None
    forest: ForestConfig
    dbscan: DbscanConfig
    pca_k: int
    pca_quantile: float
    consensus_threshold: int
    exposure: ExposureParams
    toxicity: ToxicityTable
    recompute_risk: bool
    emit_plot_data: bool
    out_dir: Path | None
    flat: dict[str, Any]

    @property
    def digest(self) -> str:
        return config_digest(self.flat)

    @property
    def seed(self) -> int:
        return self.forest.seed

    @classmethod
    def from_flat(cls, flat: Mapping[str, Any], out_dir: str | Path | None = None) -> PipelineConfig:
        flat = merge(DEFAULTS, flat)
        try:
            forest = ForestConfig(
                n_trees=flat["iforest.n_trees"],
                contamination=flat["iforest.contamination"],
                subsample=flat["iforest.subsample"],
                seed=flat["iforest.seed"],
            )
            db = DbscanConfig(eps=flat["dbscan.eps"], min_samples=flat["dbscan.min_samples"])
            if not 1 <= flat["pca.k"] <= len(METALS):
                raise ValueError(f"pca.k must be in [1, {len(METALS)}], got {flat['pca.k']}")
            if not 0.0 < flat["pca.quantile"] < 1.0:
                raise ValueError(f"pca.quantile must be in (0, 1), got {flat['pca.quantile']}")
            if not 1 <= flat["consensus.threshold"] <= 3:
                raise ValueError(f"consensus.threshold must be in [1, 3], got {flat['consensus.threshold']}")
            risk_keys = {k[len("risk."):]: v for k, v in flat.items() if k.startswith("risk.")}
            exposure = ExposureParams.from_mapping(risk_keys)
            toxicity = ToxicityTable.from_mapping(
                {k[len("tox."):]: v for k, v in risk_keys.items() if k.startswith("tox.")}
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            input=Path(flat["input"]) if flat["input"] else None,
            forest=forest,
            dbscan=db,
            pca_k=flat["pca.k"],
            pca_quantile=flat["pca.quantile"],
            consensus_threshold=flat["consensus.threshold"],
            exposure=exposure,
            toxicity=toxicity,
            recompute_risk=flat["risk.recompute"],
            emit_plot_data=flat["report.plot_data"],
            out_dir=Path(out_dir) if out_dir is not None else None,
            flat=flat,
        )
