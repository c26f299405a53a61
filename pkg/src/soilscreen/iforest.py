"""Isolation Forest built from scratch.

Trees are stored as flat node arrays and grown breadth-first, one depth level
at a time, so each level costs a handful of vectorised numpy calls. Every tree
owns an independent RNG stream spawned from the master seed, which keeps the
forest bit-identical whatever order the trees are built in.

Scores follow the canonical orientation: ``s = 2 ** (-E[h(x)] / c(psi))`` lies
in (0, 1) and HIGHER means more anomalous. (scikit-learn's ``score_samples``
returns ``-s``, where lower means more anomalous.)
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .base import DetectorResult, flag_top_k, top_k_count
from .geodata import FeatureMatrix

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329


def expected_path_length(n: int | np.ndarray) -> float | np.ndarray:
    """Average depth of an unsuccessful search in a random BST of ``n`` keys.

    c(n) = 2 H(n-1) - 2 (n-1) / n with H(i) ~ ln(i) + Euler's constant;
    c(0) = c(1) = 0 and c(2) = 1.
    """
    arr = np.asarray(n, dtype=float)
    out = np.zeros_like(arr)
    two = arr == 2
    big = arr > 2
    out[two] = 1.0
    m = arr[big]
    out[big] = 2.0 * (np.log(m - 1.0) + EULER_GAMMA) - 2.0 * (m - 1.0) / m
    if np.ndim(n) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    contamination: float = 0.15
    subsample: int | None = None
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"iforest.n_trees must be >= 1, got {self.n_trees}")
        if not 0.0 < self.contamination <= 0.5:
            raise ValueError(
                f"iforest.contamination must be in (0, 0.5], got {self.contamination}"
            )
        if self.subsample is not None and self.subsample < 2:
            raise ValueError(f"iforest.subsample must be >= 2, got {self.subsample}")


@dataclass(frozen=True)
class IsolationTree:
    """Flat binary tree. ``feature[i] == -1`` marks a leaf; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    height_limit: int

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def leaf_depths(self) -> np.ndarray:
        return self.depth[self.feature < 0]


@dataclass(frozen=True)
class Forest:
    """All trees stacked into ``(n_trees, capacity)`` node tables."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    n_nodes: np.ndarray
    subsets: np.ndarray
    subsample: int
    height_limit: int
    columns: tuple[str, ...]
    config: ForestConfig

    @property
    def n_trees(self) -> int:
        return int(self.feature.shape[0])

    def tree(self, t: int) -> IsolationTree:
        k = int(self.n_nodes[t])
        return IsolationTree(
            self.feature[t, :k], self.threshold[t, :k], self.left[t, :k],
            self.right[t, :k], self.size[t, :k], self.depth[t, :k], self.height_limit,
        )

    @property
    def trees(self) -> list[IsolationTree]:
        return [self.tree(t) for t in range(self.n_trees)]

    def path_lengths(self, x: np.ndarray) -> np.ndarray:
        """``(n_trees, n)`` isolation depths, leaf-size corrected."""
        n_trees = self.n_trees
        node = np.zeros((n_trees, x.shape[0]), dtype=np.intp)
        t_idx = np.arange(n_trees)[:, None]
        cols = np.arange(x.shape[0])[None, :]
        for _ in range(self.height_limit):
            feat = self.feature[t_idx, node]
            internal = feat >= 0
            if not internal.any():
                break
            value = x[cols, np.where(internal, feat, 0)]
            go_left = value < self.threshold[t_idx, node]
            step = np.where(go_left, self.left[t_idx, node], self.right[t_idx, node])
            node = np.where(internal, step, node)
        return self.depth[t_idx, node] + expected_path_length(self.size[t_idx, node])


def _grow_forest(x: np.ndarray, height_limit: int, uniforms: np.ndarray) -> tuple[np.ndarray, ...]:
    """Grow every tree breadth-first in lockstep.

    ``x`` is ``(n_trees, psi, d)``: each tree's own subsample. ``uniforms`` is
    ``(n_trees, capacity, 2)``: the draws for feature choice and cut position,
    addressed by the tree-local node id so trees never share randomness.
    """
    n_trees, psi, d = x.shape
    cap = uniforms.shape[1]
    shape = (n_trees, cap)
    feature = np.full(shape, -1, dtype=np.intp)
    threshold = np.zeros(shape)
    left = np.full(shape, -1, dtype=np.intp)
    right = np.full(shape, -1, dtype=np.intp)
    size = np.zeros(shape, dtype=np.intp)
    depth = np.zeros(shape, dtype=np.intp)
    size[:, 0] = psi
    n_nodes = np.ones(n_trees, dtype=np.intp)

    flat_x = x.reshape(n_trees * psi, d)
    row_tree = np.repeat(np.arange(n_trees), psi)
    member = np.zeros(n_trees * psi, dtype=np.intp)  # tree-local node of each row
    active = np.ones(n_trees * psi, dtype=bool)  # row still in a splittable node

    for level in range(height_limit):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        key = row_tree[rows] * cap + member[rows]
        order = np.argsort(key, kind="stable")
        rows, key = rows[order], key[order]
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        node_t = key[starts] // cap
        node_l = key[starts] % cap
        vals = flat_x[rows]
        lo = np.minimum.reduceat(vals, starts, axis=0)
        hi = np.maximum.reduceat(vals, starts, axis=0)
        spread = hi > lo
        splittable = spread.any(axis=1)

        # uniform choice among each node's non-constant features
        u = uniforms[node_t, node_l]
        n_ok = np.maximum(spread.sum(axis=1), 1)
        pick = np.minimum((u[:, 0] * n_ok).astype(np.intp), n_ok - 1)
        rank = np.cumsum(spread, axis=1) - 1
        feat = np.argmax(spread & (rank == pick[:, None]), axis=1)
        g = np.arange(starts.size)
        a, b = lo[g, feat], hi[g, feat]
        cut = a + u[:, 1] * (b - a)
        # keep the cut strictly inside (a, b)
        cut = np.minimum(np.maximum(cut, np.nextafter(a, np.inf)), np.nextafter(b, -np.inf))
        cut = np.where(cut > a, cut, b)

        sp = np.flatnonzero(splittable)
        pt, pl = node_t[sp], node_l[sp]
        # tree-local child ids: parents are sorted by (tree, node)
        first = np.searchsorted(pt, pt, side="left")
        child_left = n_nodes[pt] + 2 * (np.arange(sp.size) - first)
        np.add.at(n_nodes, pt, 2)
        feature[pt, pl] = feat[sp]
        threshold[pt, pl] = cut[sp]
        left[pt, pl] = child_left
        right[pt, pl] = child_left + 1

        grp = np.repeat(g, np.diff(np.r_[starts, rows.size]))
        row_child = np.full(starts.size, -1, dtype=np.intp)
        row_child[sp] = child_left
        moving = splittable[grp]
        r, gg = rows[moving], grp[moving]
        go_right = flat_x[r, feat[gg]] >= cut[gg]
        member[r] = row_child[gg] + go_right
        active[rows[~moving]] = False

        depth[pt, child_left] = level + 1
        depth[pt, child_left + 1] = level + 1
        counts = np.zeros(shape, dtype=np.intp)
        np.add.at(counts, (row_tree[r], member[r]), 1)
        size[pt, child_left] = counts[pt, child_left]
        size[pt, child_left + 1] = counts[pt, child_left + 1]
        active[r] = size[row_tree[r], member[r]] > 1

    return feature, threshold, left, right, size, depth, n_nodes


def fit_forest(m: FeatureMatrix, cfg: ForestConfig = ForestConfig()) -> Forest:
    n = m.values.shape[0]
    if n < 2:
        raise ValueError(f"isolation forest needs at least 2 samples, got {n}")
    if not m.standardized:
        warnings.warn("fitting isolation forest on an unstandardized matrix")
    psi = cfg.subsample if cfg.subsample is not None else min(256, n)
    if psi > n:
        warnings.warn(f"iforest.subsample={psi} exceeds n={n}; clamped to {n}")
        psi = n
    height_limit = math.ceil(math.log2(psi))
    cap = 2 * psi  # every leaf is non-empty, so at most 2*psi - 1 nodes

    # one independent stream per tree: subsample first, then node draws
    subsets = np.empty((cfg.n_trees, psi), dtype=np.intp)
    uniforms = np.empty((cfg.n_trees, cap, 2))
    for t, ss in enumerate(np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees)):
        rng = np.random.default_rng(ss)
        subsets[t] = np.sort(rng.choice(n, size=psi, replace=False))
        uniforms[t] = rng.random((cap, 2))

    tables = _grow_forest(m.values[subsets], height_limit, uniforms)
    logger.debug("grew %d trees (psi=%d, height limit %d)", cfg.n_trees, psi, height_limit)
    return Forest(*tables, subsets, psi, height_limit, tuple(m.columns), cfg)


def score_samples(forest: Forest, m: FeatureMatrix) -> np.ndarray:
    """Anomaly score in (0, 1) per row; higher = more anomalous."""
    if tuple(m.columns) != forest.columns:
        raise ValueError(
            f"column mismatch: forest trained on {list(forest.columns)}, got {m.columns}"
        )
    mean_path = forest.path_lengths(m.values).mean(axis=0)
    return np.power(2.0, -mean_path / expected_path_length(forest.subsample))


def label_anomalies(scores: np.ndarray, contamination: float) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.size < 1:
        raise ValueError("need at least one score")
    return flag_top_k(scores, top_k_count(contamination, scores.size))


def detect(m: FeatureMatrix, cfg: ForestConfig = ForestConfig()) -> DetectorResult:
    forest = fit_forest(m, cfg)
    scores = score_samples(forest, m)
    params = asdict(cfg)
    params["subsample"] = forest.subsample
    params["height_limit"] = forest.height_limit
    return DetectorResult(
        "isolation_forest", scores, label_anomalies(scores, cfg.contamination), params
    )
