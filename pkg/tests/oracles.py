"""Slow, obviously-correct reference implementations used as test oracles."""

from __future__ import annotations

import math

import numpy as np


def brute_dbscan(x: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Labels from first principles.

    Cores are rows with >= min_samples rows (self included) within eps.
    Clusters are connected components of the core graph, numbered by their
    smallest core index. A border row within eps of cores from several
    components joins the lowest-numbered one, i.e. the cluster a row-order
    scan seeds first.
    """
    n = len(x)
    dist = [[math.dist(x[i], x[j]) for j in range(n)] for i in range(n)]
    core = [sum(dist[i][j] <= eps for j in range(n)) >= min_samples for i in range(n)]

    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(n):
        for j in range(i + 1, n):
            if core[i] and core[j] and dist[i][j] <= eps:
                ra, rb = find(i), find(j)
                parent[max(ra, rb)] = min(ra, rb)

    first_core: dict[int, int] = {}
    for i in range(n):
        if core[i]:
            first_core.setdefault(find(i), i)
    number = {r: k for k, r in enumerate(sorted(first_core, key=first_core.get))}
    labels = np.full(n, -1)
    for i in range(n):
        if core[i]:
            labels[i] = number[find(i)]
            continue
        reach = [find(j) for j in range(n) if core[j] and dist[i][j] <= eps]
        if reach:
            labels[i] = number[min(reach, key=lambda r: first_core[r])]
    return labels


def canonical(labels: np.ndarray) -> list[int]:
    """Renumber clusters by first appearance; noise stays -1."""
    mapping: dict[int, int] = {}
    out = []
    for v in labels:
        v = int(v)
        if v == -1:
            out.append(-1)
            continue
        mapping.setdefault(v, len(mapping))
        out.append(mapping[v])
    return out


def type7_quantile(values: list[float], q: float) -> float:
    s = sorted(values)
    h = (len(s) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (h - lo) * (s[hi] - s[lo])


def c_formula(n: int) -> float:
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + 0.5772156649015329) - 2.0 * (n - 1) / n


def cdi_reference(c, pathway, p, abs_=None):
    """CDI with plain floats for one receptor parameter object."""
    if pathway == "ingestion":
        return c * p.IngR * p.EF * p.ED * 1e-6 / (p.BW * p.AT_nc)
    if pathway == "dermal":
        return c * p.SA * p.AF * abs_ * p.EF * p.ED * 1e-6 / (p.BW * p.AT_nc)
    return c * p.InhR * p.EF * p.ED / (p.PEF * p.BW * p.AT_nc)


def power_iteration_top(a: np.ndarray, iters: int = 5000) -> float:
    v = np.ones(a.shape[0]) / math.sqrt(a.shape[0])
    lam = 0.0
    for _ in range(iters):
        w = a @ v
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) < 1e-15 * max(1.0, abs(lam_new)):
            break
        lam = lam_new
    return lam_new
