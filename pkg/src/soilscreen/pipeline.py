"""End-to-end screening run and report files.

Stages run in a fixed order: load, standardize, the three detectors, vote,
risk, validate. Any stage failure is re-raised as :class:`PipelineError`
naming the module it came from.
"""

from __future__ import annotations

import contextlib
import csv
import json
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from . import consensus, dbscan, geodata, iforest, pca_recon, risk
from .base import DetectorResult
from .config import PipelineConfig

logger = logging.getLogger(__name__)

REPORT_FILES = ("summary.json", "anomalies.csv", "count_matrix.csv", "stats.csv")
PLOT_FILES = ("kdistance.csv", "pca_scatter.csv")


class PipelineError(RuntimeError):
    def __init__(self, module: str, message: str) -> None:
        super().__init__(f"{module}: {message}")
        self.module = module


@contextlib.contextmanager
def stage(module: str) -> Iterator[None]:
    try:
        yield
    except PipelineError:
        raise
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        raise PipelineError(module, str(exc)) from exc


@dataclass(frozen=True)
class RunReport:
    timestamp: str
    seed: int
    config_digest: str
    config: dict[str, Any]
    input_path: str
    dataset: geodata.Dataset
    stats: geodata.DescriptiveStats
    correlation: np.ndarray
    standardized: geodata.FeatureMatrix
    detectors: tuple[DetectorResult, DetectorResult, DetectorResult]
    clusters: dbscan.ClusterLabels
    kdistance: np.ndarray
    suggested_eps: float
    pca_model: pca_recon.PcaModel
    pca_scores: np.ndarray  # (n, 2) plot coordinates
    recon: pca_recon.ReconResult
    consensus: consensus.ConsensusReport
    risk: risk.RiskProfile
    validation: consensus.ValidationSummary

    @property
    def detector_counts(self) -> dict[str, int]:
        return {d.detector_name: d.n_flagged for d in self.detectors}

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready summary; only ``run.timestamp`` varies between reruns."""
        c = self.consensus
        v = self.validation
        return _clean({
            "run": {
                "timestamp": self.timestamp,
                "seed": self.seed,
                "config_digest": self.config_digest,
                "input": self.input_path,
            },
            "config": self.config,
            "n_samples": len(self.dataset),
            "stats": {
                "std_convention": self.stats.std_convention,
                "quantile_rule": self.stats.quantile_rule,
                "per_metal": {m: vars(s) for m, s in self.stats.per_metal.items()},
            },
            "correlation": {
                "metals": list(geodata.METALS),
                "pearson": self.correlation.tolist(),
            },
            "detectors": {
                d.detector_name: {
                    "n_flagged": d.n_flagged,
                    "flagged": [sid for sid, f in zip(c.sample_ids, d.is_anomaly) if f],
                    "params": d.params_used,
                }
                for d in self.detectors
            },
            "dbscan": {
                "n_clusters": self.clusters.n_clusters,
                "n_noise": self.clusters.n_noise,
                "suggested_eps": self.suggested_eps,
            },
            "pca": {
                "k": self.pca_model.k,
                "explained_variance_ratio": self.pca_model.explained_variance_ratio.tolist(),
                "eigenvalues": self.pca_model.all_eigenvalues.tolist(),
                "jacobi_sweeps": self.pca_model.sweeps,
                "threshold": self.recon.threshold,
            },
            "consensus": {
                "threshold": c.threshold,
                "n_consensus": c.n_consensus,
                "samples": [sid for sid, f in zip(c.sample_ids, c.consensus_flag) if f],
                "count_matrix": {
                    "sites": c.site_order,
                    "columns": list(consensus.METHOD_COLUMNS),
                    "counts": c.count_matrix.tolist(),
                },
            },
            "risk": {"source": self.risk.source, "parameters": self.risk.parameters},
            "validation": {
                "hi_ratio": v.hi_ratio,
                "recon_hi_r": v.recon_hi_r,
                "hi_exceedance": v.hi_exceedance,
                "group_stats": {
                    rec: {g: {k: vars(s) for k, s in d.items()} for g, d in groups.items()}
                    for rec, groups in v.receptor_stats.items()
                },
                "control_consensus_count": v.control_consensus_count,
                "n_controls": v.n_controls,
                "consensus_sites": v.consensus_sites,
                "characterizations": v.characterizations,
            },
        })


def _clean(obj: Any) -> Any:
    """Plain JSON types; NaN/inf become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def run_pipeline(cfg: PipelineConfig, dataset: geodata.Dataset | None = None) -> RunReport:
    """Run the whole screening workflow on ``cfg.input`` (or ``dataset``)."""
    if dataset is None:
        if cfg.input is None:
            raise PipelineError("report_cli", "no input dataset given")
        with stage("geodata"):
            dataset = geodata.load_dataset(cfg.input)
    input_path = str(cfg.input) if cfg.input is not None else "<memory>"

    with stage("geodata"):
        raw = dataset.features()
        z = geodata.standardize(raw)
        stats = geodata.descriptive_stats(dataset)
        corr = geodata.pearson_matrix(raw)

    # detectors share only the immutable standardized matrix
    with stage("iforest"):
        if_result = iforest.detect(z, cfg.forest)
    with stage("dbscan"):
        db_result, clusters = dbscan.detect(z, cfg.dbscan)
        k = min(cfg.dbscan.min_samples, len(dataset) - 1)
        profile = dbscan.k_distance_profile(z, k) if k >= 1 else np.zeros(0)
        eps_hint = dbscan.suggest_eps(profile) if profile.size >= 3 else math.nan
    with stage("pca_recon"):
        pca_result, model, recon = pca_recon.detect(z, cfg.pca_k, cfg.pca_quantile)
        plot_model = model if model.k >= 2 else pca_recon.fit_pca(z, min(2, z.shape[1]))
        scores = pca_recon.project(plot_model, z)[:, :2]

    ids = dataset.sample_ids
    detectors = (if_result, db_result, pca_result)
    with stage("consensus"):
        report = consensus.vote(list(detectors), ids, dataset.sites, cfg.consensus_threshold)

    with stage("risk"):
        if cfg.recompute_risk or not dataset.has_risk:
            if not dataset.has_risk:
                logger.info("input has no risk columns; computing them")
            profile_r = risk.compute_profile(dataset, cfg.toxicity, cfg.exposure)
        else:
            profile_r = risk.given_profile(dataset)

    with stage("consensus"):
        summary = consensus.validate(report, profile_r, dataset, recon.errors, z.values)

    return RunReport(
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        seed=cfg.seed,
        config_digest=cfg.digest,
        config=dict(cfg.flat),
        input_path=input_path,
        dataset=dataset,
        stats=stats,
        correlation=corr,
        standardized=z,
        detectors=detectors,
        clusters=clusters,
        kdistance=profile,
        suggested_eps=eps_hint,
        pca_model=model,
        pca_scores=scores,
        recon=recon,
        consensus=report,
        risk=profile_r,
        validation=summary,
    )


def _num(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    f = float(x)
    return repr(f) if math.isfinite(f) else ""


def _write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise PipelineError("report_cli", f"cannot write {path}: {exc.strerror or exc}") from exc


def stats_rows(stats: geodata.DescriptiveStats) -> tuple[list[str], list[list[Any]]]:
    header = ["metal", "count", "mean", "std", "min", "p25", "median", "p75", "max"]
    rows = [
        [m, s.count, _num(s.mean), _num(s.std), _num(s.min), _num(s.p25), _num(s.median), _num(s.p75), _num(s.max)]
        for m, s in stats.per_metal.items()
    ]
    return header, rows


def anomaly_rows(r: RunReport) -> tuple[list[str], list[list[Any]]]:
    if_res, db_res, pca_res = r.detectors
    c = r.consensus
    header = [
        "sample_id", "site", "is_control",
        "if_score", "if_flag", "dbscan_label", "dbscan_core_distance", "dbscan_flag",
        "pca_error", "pca_flag", "votes", "consensus",
        "hi_adult", "hi_child", "ilcr_adult", "ilcr_child", "ilcr_band_child",
    ]
    controls = r.dataset.controls
    rows = []
    for i, sid in enumerate(c.sample_ids):
        il_child = float(r.risk.ilcr["child"][i])
        rows.append([
            sid, c.sites[i], _num(controls[i]),
            _num(if_res.scores[i]), _num(if_res.is_anomaly[i]),
            _num(r.clusters.labels[i]), _num(db_res.scores[i]), _num(db_res.is_anomaly[i]),
            _num(pca_res.scores[i]), _num(pca_res.is_anomaly[i]),
            _num(c.votes[i]), _num(c.consensus_flag[i]),
            _num(r.risk.hi["adult"][i]), _num(r.risk.hi["child"][i]),
            _num(r.risk.ilcr["adult"][i]), _num(il_child),
            risk.ilcr_band(il_child) if math.isfinite(il_child) else "",
        ])
    return header, rows


def kdistance_rows(profile: np.ndarray) -> tuple[list[str], list[list[Any]]]:
    return ["rank", "distance"], [[i + 1, _num(d)] for i, d in enumerate(profile)]


def emit_report(r: RunReport, out_dir: str | Path, plot_data: bool = True) -> list[Path]:
    """Write the report files into ``out_dir`` (created if absent)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineError("report_cli", f"cannot create {out}: {exc.strerror or exc}") from exc
    written = []

    path = out / "summary.json"
    try:
        path.write_text(json.dumps(r.to_dict(), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise PipelineError("report_cli", f"cannot write {path}: {exc.strerror or exc}") from exc
    written.append(path)

    header, rows = anomaly_rows(r)
    _write_csv(out / "anomalies.csv", header, rows)
    written.append(out / "anomalies.csv")

    c = r.consensus
    _write_csv(
        out / "count_matrix.csv",
        ["site", *consensus.METHOD_COLUMNS, "total"],
        [[s, *map(int, c.count_matrix[i]), int(c.site_totals[i])] for i, s in enumerate(c.site_order)],
    )
    written.append(out / "count_matrix.csv")

    header, rows = stats_rows(r.stats)
    _write_csv(out / "stats.csv", header, rows)
    written.append(out / "stats.csv")

    if plot_data:
        header, rows = kdistance_rows(r.kdistance)
        _write_csv(out / "kdistance.csv", header, rows)
        written.append(out / "kdistance.csv")
        _, db_res, pca_res = r.detectors
        _write_csv(
            out / "pca_scatter.csv",
            ["sample_id", "site", "pc1", "pc2", "error", "pca_flag", "consensus"],
            [
                [sid, c.sites[i], _num(r.pca_scores[i, 0]),
                 _num(r.pca_scores[i, 1]) if r.pca_scores.shape[1] > 1 else "",
                 _num(pca_res.scores[i]), _num(pca_res.is_anomaly[i]), _num(c.consensus_flag[i])]
                for i, sid in enumerate(c.sample_ids)
            ],
        )
        written.append(out / "pca_scatter.csv")
    logger.info("wrote %d report files to %s", len(written), out)
    return written
