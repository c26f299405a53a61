"""PCA by cyclic Jacobi eigendecomposition, and reconstruction-error flagging."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .base import DetectorResult, flag_top_k, top_k_count
from .geodata import FeatureMatrix

logger = logging.getLogger(__name__)

MAX_SWEEPS = 100
OFF_TOL = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PcaModel:
    """Leading principal axes (rows of ``components``), largest variance first."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    total_variance: float
    all_eigenvalues: np.ndarray
    columns: tuple[str, ...]
    sweeps: int = 0

    @property
    def k(self) -> int:
        return int(self.components.shape[0])

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance == 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / self.total_variance


@dataclass(frozen=True)
class ReconResult:
    errors: np.ndarray
    threshold: float
    is_anomaly: np.ndarray
    explained_variance_ratio: np.ndarray
    quantile: float


def jacobi_eigh(a: np.ndarray, tol: float = OFF_TOL, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray, int]:
    """Eigenvalues and column eigenvectors of a symmetric matrix.

    Cyclic Jacobi: sweep every (p, q) pair with a rotation zeroing ``a[p, q]``
    until the off-diagonal Frobenius norm drops below ``tol`` (relative to the
    matrix norm when that exceeds 1). Returns unsorted results and the number
    of sweeps used.
    """
    a = np.array(a, dtype=float)
    d = a.shape[0]
    if a.shape != (d, d):
        raise ValueError(f"expected a square matrix, got {a.shape}")
    a = (a + a.T) / 2.0
    v = np.eye(d)
    limit = tol * max(1.0, float(np.linalg.norm(a)))

    upper = np.triu_indices(d, 1)

    def off_norm(m: np.ndarray) -> float:
        # summed directly; total minus diagonal cancels to ~sqrt(eps) * |A|
        return math.sqrt(2.0) * float(np.linalg.norm(m[upper]))

    sweeps = 0
    while off_norm(a) >= limit:
        if sweeps >= max_sweeps:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diag(a).copy(), v, sweeps


def covariance(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and the n-1 sample covariance."""
    mean = x.mean(axis=0)
    centered = x - mean
    return mean, centered.T @ centered / (x.shape[0] - 1)


def fit_pca(m: FeatureMatrix, k: int = 2) -> PcaModel:
    x = m.values
    n, d = x.shape
    if not 1 <= k <= d:
        raise ValueError(f"pca.k must be in [1, {d}], got {k}")
    if n < 2:
        raise ValueError(f"PCA needs at least 2 samples, got {n}")
    mean, cov = covariance(x)
    values, vectors, sweeps = jacobi_eigh(cov)

    order = np.argsort(-values, kind="stable")
    values = np.maximum(values[order], 0.0)
    vectors = vectors[:, order].T
    # sign rule: largest-magnitude loading of each axis is positive
    lead = np.argmax(np.abs(vectors), axis=1)
    signs = np.where(vectors[np.arange(d), lead] < 0, -1.0, 1.0)
    vectors = vectors * signs[:, None]

    logger.debug("Jacobi converged after %d sweeps", sweeps)
    return PcaModel(
        mean=mean,
        components=vectors[:k].copy(),
        eigenvalues=values[:k].copy(),
        total_variance=float(np.trace(cov)),
        all_eigenvalues=values,
        columns=tuple(m.columns),
        sweeps=sweeps,
    )


def _check_columns(model: PcaModel, m: FeatureMatrix) -> None:
    if tuple(m.columns) != model.columns:
        raise ValueError(f"column mismatch: model fitted on {list(model.columns)}, got {m.columns}")


def project(model: PcaModel, m: FeatureMatrix) -> np.ndarray:
    """Principal-component scores, ``(n, k)``."""
    _check_columns(model, m)
    return (m.values - model.mean) @ model.components.T


def reconstruction_errors(model: PcaModel, m: FeatureMatrix) -> np.ndarray:
    """Euclidean distance from each row to its rank-k reconstruction."""
    _check_columns(model, m)
    centered = m.values - model.mean
    c = model.components
    residual = centered - (centered @ c.T) @ c
    return np.sqrt(np.einsum("ij,ij->i", residual, residual))


def threshold_labels(errors: np.ndarray, q: float = 0.85, explained_variance_ratio: np.ndarray | None = None) -> ReconResult:
    """Flag the ceil((1 - q) * n) largest errors, lower index first on ties."""
    errors = np.asarray(errors, dtype=float)
    n = errors.size
    if n < 1:
        raise ValueError("need at least one error value")
    if not 0.0 < q < 1.0:
        raise ValueError(f"pca.quantile must be in (0, 1), got {q}")
    flags = flag_top_k(errors, top_k_count(1.0 - q, n))
    evr = np.array([]) if explained_variance_ratio is None else explained_variance_ratio
    return ReconResult(errors, float(errors[flags].min()), flags, evr, q)


def detect(m: FeatureMatrix, k: int = 2, q: float = 0.85) -> tuple[DetectorResult, PcaModel, ReconResult]:
    model = fit_pca(m, k)
    recon = threshold_labels(reconstruction_errors(model, m), q, model.explained_variance_ratio)
    result = DetectorResult(
        "pca_reconstruction",
        recon.errors,
        recon.is_anomaly.copy(),
        {"k": k, "quantile": q, "threshold": recon.threshold},
    )
    return result, model, recon
