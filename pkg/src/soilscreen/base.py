"""Shared detector result type and count-based flagging."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class DetectorResult:
    """Per-sample output of one detector. Higher score = more anomalous."""

    detector_name: str
    scores: np.ndarray
    is_anomaly: np.ndarray
    params_used: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.scores) != len(self.is_anomaly):
            raise ValueError(
                f"{self.detector_name}: {len(self.scores)} scores vs "
                f"{len(self.is_anomaly)} flags"
            )

    @property
    def n_flagged(self) -> int:
        return int(np.count_nonzero(self.is_anomaly))


def top_k_count(fraction: float, n: int) -> int:
    """ceil(fraction * n), guarded against float noise such as 0.15 * 20."""
    return min(n, math.ceil(round(fraction * n, 9)))


def flag_top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Flag the ``k`` largest scores; ties go to the lower row index."""
    scores = np.asarray(scores, dtype=float)
    order = np.argsort(-scores, kind="stable")
    flags = np.zeros(scores.shape[0], dtype=bool)
    flags[order[:k]] = True
    return flags
