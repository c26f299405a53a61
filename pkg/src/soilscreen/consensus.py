"""Majority-vote fusion of the three detectors and risk-based validation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .base import DetectorResult
from .geodata import METALS, Dataset, pearson
from .risk import RiskProfile

METHOD_COLUMNS: tuple[str, ...] = ("IF", "DBSCAN", "PCA", "Consensus")
EXTREME_Z = 3.0


@dataclass(frozen=True)
class ConsensusReport:
    sample_ids: list[str]
    sites: list[str]
    detector_names: list[str]
    flags: np.ndarray  # (n, n_detectors) bool
    votes: np.ndarray
    consensus_flag: np.ndarray
    threshold: int
    site_order: list[str]
    count_matrix: np.ndarray  # (n_sites, n_detectors + 1)

    @property
    def n_consensus(self) -> int:
        return int(np.count_nonzero(self.consensus_flag))

    @property
    def site_totals(self) -> np.ndarray:
        return self.count_matrix.sum(axis=1)

    def column_totals(self) -> dict[str, int]:
        cols = list(METHOD_COLUMNS[: len(self.detector_names)]) + ["Consensus"]
        return dict(zip(cols, (int(v) for v in self.count_matrix.sum(axis=0))))


def _site_sort_key(site: str) -> tuple[int, int, str]:
    if site.startswith("S") and site[1:].isdigit():
        return (0, int(site[1:]), site)
    return (1, 0, site)


def vote(results: list[DetectorResult], sample_ids: list[str], sites: list[str], threshold: int = 2) -> ConsensusReport:
    """Consensus = flagged by at least ``threshold`` detectors.

    ``results`` is the detector outputs in (IF, DBSCAN, PCA) order; each must
    cover the same samples as ``sample_ids``.
    """
    n = len(sample_ids)
    if len(sites) != n:
        raise ValueError(f"{len(sites)} site labels for {n} samples")
    if not results:
        raise ValueError("no detector results to vote on")
    for r in results:
        if len(r.is_anomaly) != n:
            raise ValueError(
                f"{r.detector_name} covers {len(r.is_anomaly)} samples, expected {n}"
            )
        ids = r.params_used.get("sample_ids")
        if ids is not None and list(ids) != list(sample_ids):
            raise ValueError(f"{r.detector_name}: sample order differs from the dataset")
    if not 1 <= threshold <= len(results):
        raise ValueError(f"consensus.threshold must be in [1, {len(results)}], got {threshold}")

    flags = np.column_stack([np.asarray(r.is_anomaly, dtype=bool) for r in results])
    votes = flags.sum(axis=1).astype(int)
    consensus = votes >= threshold

    site_order = sorted(set(sites), key=_site_sort_key)
    row_of = {s: i for i, s in enumerate(site_order)}
    counts = np.zeros((len(site_order), flags.shape[1] + 1), dtype=int)
    for i, site in enumerate(sites):
        counts[row_of[site], :-1] += flags[i]
        counts[row_of[site], -1] += consensus[i]
    return ConsensusReport(
        list(sample_ids), list(sites), [r.detector_name for r in results],
        flags, votes, consensus, threshold, site_order, counts,
    )


def characterize_anomaly(sample_z: np.ndarray, metals: tuple[str, ...] = METALS, tol: float = 0.0) -> list[tuple[str, float]]:
    """Metals ordered by |z| (largest first), sign kept; zero entries dropped."""
    z = np.asarray(sample_z, dtype=float)
    order = np.argsort(-np.abs(z), kind="stable")
    return [(metals[j], float(z[j])) for j in order if abs(z[j]) > tol]


def archetype(ranked: list[tuple[str, float]]) -> str:
    """Short label for the dominant deviation, e.g. ``"extreme Cu enrichment"``.

    ``|z| >= EXTREME_Z`` earns the "extreme" prefix.
    """
    if not ranked:
        return "neutral"
    metal, z = ranked[0]
    label = f"{metal} {'enrichment' if z > 0 else 'depletion'}"
    return f"extreme {label}" if abs(z) >= EXTREME_Z else label


@dataclass(frozen=True)
class GroupStats:
    n: int
    mean: float
    median: float

    @classmethod
    def of(cls, values: np.ndarray) -> GroupStats:
        if values.size == 0:
            return cls(0, math.nan, math.nan)
        return cls(int(values.size), float(values.mean()), float(np.median(values)))


@dataclass(frozen=True)
class ValidationSummary:
    receptor_stats: dict[str, dict[str, dict[str, GroupStats]]]
    hi_ratio: dict[str, dict[str, float]]
    recon_hi_r: dict[str, float]
    hi_exceedance: dict[str, dict[str, int]]
    control_consensus_count: int
    n_controls: int
    consensus_sites: dict[str, int]
    characterizations: list[dict[str, Any]] = field(default_factory=list)


def _ratio(a: GroupStats, b: GroupStats) -> float:
    if a.n == 0 or b.n == 0 or b.mean == 0:
        return math.nan
    return a.mean / b.mean


def validate(
    report: ConsensusReport,
    risks: RiskProfile,
    dataset: Dataset,
    recon_errors: np.ndarray,
    z_values: np.ndarray,
    top_metals: int = 3,
) -> ValidationSummary:
    """Compare anomaly groups against HI/ILCR, controls and site labels.

    HI ratios are given for the consensus set and for each detector's own set.
    Undefined ratios (an empty group) are NaN.
    """
    n = len(dataset)
    if len(report.sample_ids) != n or list(risks.sample_ids) != dataset.sample_ids:
        raise ValueError("risk profile, report and dataset must cover the same samples")
    groups = {"consensus": report.consensus_flag}
    for j, name in enumerate(report.detector_names):
        groups[name] = report.flags[:, j]

    stats: dict[str, dict[str, dict[str, GroupStats]]] = {}
    ratios: dict[str, dict[str, float]] = {}
    exceed: dict[str, dict[str, int]] = {}
    recon_r: dict[str, float] = {}
    for receptor in risks.hi:
        hi = risks.hi[receptor]
        il = risks.ilcr[receptor]
        stats[receptor] = {}
        ratios[receptor] = {}
        for gname, mask in groups.items():
            anom, norm = GroupStats.of(hi[mask]), GroupStats.of(hi[~mask])
            stats[receptor][gname] = {
                "hi_anomalous": anom,
                "hi_normal": norm,
                "ilcr_anomalous": GroupStats.of(il[mask]),
                "ilcr_normal": GroupStats.of(il[~mask]),
            }
            ratios[receptor][gname] = _ratio(anom, norm)
        c = report.consensus_flag
        exceed[receptor] = {
            "consensus_hi_gt_1": int(np.count_nonzero(hi[c] > 1.0)),
            "normal_hi_gt_1": int(np.count_nonzero(hi[~c] > 1.0)),
        }
        recon_r[receptor] = pearson(np.asarray(recon_errors, dtype=float), hi)
    if not report.consensus_flag.any():
        warnings.warn("no consensus anomalies; anomalous group is empty")

    controls = dataset.controls
    consensus_sites: dict[str, int] = {}
    chars = []
    for i in np.flatnonzero(report.consensus_flag):
        site = report.sites[i]
        consensus_sites[site] = consensus_sites.get(site, 0) + 1
        ranked = characterize_anomaly(z_values[i])
        chars.append({
            "sample_id": report.sample_ids[i],
            "site": site,
            "votes": int(report.votes[i]),
            "archetype": archetype(ranked),
            "top_metals": [{"metal": m, "z": z} for m, z in ranked[:top_metals]],
        })
    return ValidationSummary(
        receptor_stats=stats,
        hi_ratio=ratios,
        recon_hi_r=recon_r,
        hi_exceedance=exceed,
        control_consensus_count=int(np.count_nonzero(report.consensus_flag & controls)),
        n_controls=int(controls.sum()),
        consensus_sites=consensus_sites,
        characterizations=chars,
    )
