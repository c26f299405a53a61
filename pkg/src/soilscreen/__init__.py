"""Unsupervised screening of soil heavy-metal surveys.

Three detectors (Isolation Forest, DBSCAN noise, PCA reconstruction error)
vote on each sample; consensus anomalies are checked against USEPA-style
hazard and cancer-risk indices.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .geodata import METALS, DataError, Dataset, FeatureMatrix, load_dataset, standardize  # noqa: E402

__all__ = ["METALS", "DataError", "Dataset", "FeatureMatrix", "load_dataset", "standardize", "__version__"]
