"""DBSCAN over standardized metal space, with the k-distance profile for eps.

Neighbour search is brute force on the full distance matrix; datasets here are
at most a few thousand rows.
"""

from __future__ import annotations

import logging
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from .base import DetectorResult
from .geodata import FeatureMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DbscanConfig:
    eps: float = 1.5
    min_samples: int = 5

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"dbscan.eps must be > 0, got {self.eps}")
        if self.min_samples < 1:
            raise ValueError(f"dbscan.min_samples must be >= 1, got {self.min_samples}")


@dataclass(frozen=True)
class ClusterLabels:
    labels: np.ndarray
    n_clusters: int
    is_core: np.ndarray

    @property
    def noise(self) -> np.ndarray:
        return self.labels == -1

    @property
    def n_noise(self) -> int:
        return int(np.count_nonzero(self.labels == -1))


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def k_distance_profile(m: FeatureMatrix, k: int) -> np.ndarray:
    """Sorted distances from each row to its k-th nearest other row."""
    n = m.values.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k-distance needs k < n, got k={k}, n={n}")
    dist = pairwise_distances(m.values)
    np.fill_diagonal(dist, np.inf)
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1]
    return np.sort(kth)


def suggest_eps(profile: np.ndarray) -> float:
    """Knee of a sorted k-distance profile.

    Both axes are rescaled to [0, 1]; the knee is the point lying furthest
    below the chord joining the first and last points. Advisory only.
    """
    y = np.asarray(profile, dtype=float)
    if y.size < 3:
        raise ValueError(f"need at least 3 profile points, got {y.size}")
    span = y[-1] - y[0]
    if span <= 0:
        warnings.warn("constant k-distance profile: no knee")
        return float(y[0])
    t = np.linspace(0.0, 1.0, y.size)
    gap = t - (y - y[0]) / span  # chord height minus curve height, rescaled
    best = int(np.argmax(gap))
    if gap[best] <= 1e-12:
        warnings.warn("no clear knee in k-distance profile; returning the midpoint value")
        return float(y[(y.size - 1) // 2])
    return float(y[best])


def cluster(m: FeatureMatrix, cfg: DbscanConfig = DbscanConfig()) -> ClusterLabels:
    """Label rows with cluster ids (0..k-1) or -1 for noise.

    A row is core when at least ``min_samples`` rows, itself included, lie
    within ``eps``. Clusters are seeded and grown in row order, so a border
    row reachable from several clusters joins the one seeded first.
    """
    x = m.values
    n = x.shape[0]
    if n < 1:
        raise ValueError("dbscan needs at least one sample")
    within = pairwise_distances(x) <= cfg.eps
    neighbours = [np.flatnonzero(row) for row in within]
    is_core = np.array([nb.size >= cfg.min_samples for nb in neighbours], dtype=bool)

    labels = np.full(n, -1, dtype=int)
    cluster_id = 0
    for seed in range(n):
        if not is_core[seed] or labels[seed] != -1:
            continue
        labels[seed] = cluster_id
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in neighbours[p]:
                if labels[q] != -1:
                    continue
                labels[q] = cluster_id
                if is_core[q]:
                    queue.append(q)
        cluster_id += 1
    logger.debug(
        "dbscan eps=%g min_samples=%d: %d clusters, %d noise",
        cfg.eps, cfg.min_samples, cluster_id, int((labels == -1).sum()),
    )
    return ClusterLabels(labels, cluster_id, is_core)


def core_distances(m: FeatureMatrix, min_samples: int) -> np.ndarray:
    """Radius each row needs to become core (0 when min_samples == 1)."""
    n = m.values.shape[0]
    if min_samples <= 1:
        return np.zeros(n)
    k = min(min_samples - 1, n - 1)
    if k < 1:
        return np.zeros(n)
    dist = pairwise_distances(m.values)
    np.fill_diagonal(dist, np.inf)
    return np.partition(dist, k - 1, axis=1)[:, k - 1]


def detect(m: FeatureMatrix, cfg: DbscanConfig = DbscanConfig()) -> tuple[DetectorResult, ClusterLabels]:
    """Noise rows are the anomalies; score is the row's core distance."""
    labels = cluster(m, cfg)
    result = DetectorResult(
        "dbscan",
        core_distances(m, cfg.min_samples),
        labels.noise.copy(),
        {"eps": cfg.eps, "min_samples": cfg.min_samples, "n_clusters": labels.n_clusters},
    )
    return result, labels
