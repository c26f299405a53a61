"""Soil sample data model, CSV ingestion, summary statistics and scaling.

All matrices derived from a :class:`Dataset` share the fixed metal column
order ``METALS``.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TextIO

import numpy as np

logger = logging.getLogger(__name__)

METALS: tuple[str, ...] = ("As", "Cd", "Cr", "Cu", "Hg", "Ni", "Pb", "Zn")
SITES: tuple[str, ...] = tuple(f"S{i}" for i in range(1, 13)) + ("Residential",)
RISK_COLUMNS: tuple[str, ...] = ("hi_adult", "hi_child", "ilcr_adult", "ilcr_child")
ID_COLUMNS: tuple[str, ...] = ("sample_id", "site", "is_control")

_TRUE = {"true", "1"}
_FALSE = {"false", "0"}


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    site: str
    is_control: bool
    conc: dict[str, float]
    risk_given: dict[str, float] | None = None

    def __post_init__(self) -> None:
        missing = [m for m in METALS if m not in self.conc]
        if missing:
            raise DataError(f"sample {self.sample_id}: missing metals {missing}")
        for metal in METALS:
            value = self.conc[metal]
            if not math.isfinite(value) or value < 0:
                raise DataError(
                    f"sample {self.sample_id}: {metal} concentration must be a "
                    f"finite value >= 0, got {value}"
                )
        if self.is_control != (self.site == "Residential"):
            raise DataError(
                f"sample {self.sample_id}: is_control={self.is_control} "
                f"inconsistent with site {self.site!r}"
            )

    def vector(self) -> np.ndarray:
        return np.array([self.conc[m] for m in METALS], dtype=float)


@dataclass(frozen=True)
class Dataset:
    samples: tuple[SampleRecord, ...]
    metal_order: tuple[str, ...] = METALS

    def __post_init__(self) -> None:
        if tuple(self.metal_order) != METALS:
            raise DataError(f"metal_order must be {METALS}")
        seen: set[str] = set()
        for s in self.samples:
            if s.sample_id in seen:
                raise DataError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def sample_ids(self) -> list[str]:
        return [s.sample_id for s in self.samples]

    @property
    def sites(self) -> list[str]:
        return [s.site for s in self.samples]

    @property
    def controls(self) -> np.ndarray:
        return np.array([s.is_control for s in self.samples], dtype=bool)

    @property
    def has_risk(self) -> bool:
        return bool(self.samples) and all(s.risk_given is not None for s in self.samples)

    def risk_column(self, name: str) -> np.ndarray:
        if not self.has_risk:
            raise DataError("dataset carries no precomputed risk columns")
        return np.array([s.risk_given[name] for s in self.samples], dtype=float)

    def features(self) -> FeatureMatrix:
        """Raw (unstandardized) n x 8 concentration matrix."""
        values = np.array([s.vector() for s in self.samples], dtype=float).reshape(-1, len(METALS))
        return FeatureMatrix(values=values, columns=list(METALS), row_ids=self.sample_ids)


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    columns: list[str]
    row_ids: list[str]
    standardized: bool = False
    col_means: np.ndarray | None = None
    col_stds: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise DataError(f"expected a 2D matrix, got shape {self.values.shape}")
        n, d = self.values.shape
        if n != len(self.row_ids) or d != len(self.columns):
            raise DataError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.row_ids)} row ids x {len(self.columns)} columns"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def inverse_transform(self) -> FeatureMatrix:
        """Map z-scores back to raw units (z * std + mean)."""
        if not self.standardized or self.col_means is None or self.col_stds is None:
            raise DataError("matrix is not standardized")
        raw = self.values * self.col_stds + self.col_means
        return FeatureMatrix(values=raw, columns=list(self.columns), row_ids=list(self.row_ids))


@dataclass(frozen=True)
class MetalStats:
    count: int
    mean: float
    std: float
    min: float
    p25: float
    median: float
    p75: float
    max: float
    std_defined: bool = True


@dataclass(frozen=True)
class DescriptiveStats:
    """Per-metal summary. ``std`` uses the n-1 denominator; quantiles are type 7."""

    per_metal: dict[str, MetalStats]
    std_convention: str = "sample (n-1)"
    quantile_rule: str = "linear interpolation (type 7)"
    metadata: dict[str, str] = field(default_factory=dict)

    def __getitem__(self, metal: str) -> MetalStats:
        return self.per_metal[metal]

    def rows(self) -> list[tuple[str, list[float]]]:
        names = ("count", "mean", "std", "min", "p25", "median", "p75", "max")
        return [
            (name, [float(getattr(self.per_metal[m], name)) for m in self.per_metal])
            for name in names
        ]


def _parse_bool(text: str, row: int) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise DataError(f"row {row}, column is_control: expected true/false/0/1, got {text!r}")


def _parse_float(text: str, row: int, column: str) -> float:
    if text is None or text.strip() == "":
        raise DataError(f"row {row}, column {column}: missing value")
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {column}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {column}: non-finite value {text!r}")
    return value


def load_dataset(path: str | Path) -> Dataset:
    """Read a sample CSV.

    Row numbers in error messages are 1-based file lines (header = line 1).
    Risk columns are optional but must be all present or all absent.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: no data rows")
        header = [h.strip() for h in header]
        missing = [c for c in ID_COLUMNS + METALS if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        present_risk = [c for c in RISK_COLUMNS if c in header]
        if present_risk and len(present_risk) != len(RISK_COLUMNS):
            raise DataError(f"{path}: risk columns must be all present or all absent")
        index = {name: i for i, name in enumerate(header)}

        samples: list[SampleRecord] = []
        seen: dict[str, int] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"row {line_no}: expected {len(header)} fields, got {len(row)}"
                )
            sample_id = row[index["sample_id"]].strip()
            if not sample_id:
                raise DataError(f"row {line_no}, column sample_id: missing value")
            if sample_id in seen:
                raise DataError(
                    f"row {line_no}: duplicate sample_id {sample_id!r} "
                    f"(first seen on row {seen[sample_id]})"
                )
            seen[sample_id] = line_no
            site = row[index["site"]].strip()
            is_control = _parse_bool(row[index["is_control"]], line_no)
            conc = {}
            for metal in METALS:
                value = _parse_float(row[index[metal]], line_no, metal)
                if value < 0:
                    raise DataError(
                        f"row {line_no}, column {metal}: negative concentration {value}"
                    )
                conc[metal] = value
            risk = None
            if present_risk:
                risk = {c: _parse_float(row[index[c]], line_no, c) for c in RISK_COLUMNS}
            try:
                samples.append(SampleRecord(sample_id, site, is_control, conc, risk))
            except DataError as exc:
                raise DataError(f"row {line_no}: {exc}") from None

    if not samples:
        raise DataError(f"{path}: no data rows")
    logger.info("loaded %d samples from %s", len(samples), path)
    return Dataset(tuple(samples))


def dump_dataset(dataset: Dataset, fh: TextIO) -> None:
    """Write ``dataset`` as CSV to an open text stream."""
    with_risk = dataset.has_risk
    header = list(ID_COLUMNS + METALS) + (list(RISK_COLUMNS) if with_risk else [])
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for s in dataset.samples:
        row = [s.sample_id, s.site, "true" if s.is_control else "false"]
        row += [repr(float(s.conc[m])) for m in METALS]
        if with_risk:
            row += [repr(float(s.risk_given[c])) for c in RISK_COLUMNS]
        writer.writerow(row)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write ``dataset`` in the same CSV layout :func:`load_dataset` reads."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        dump_dataset(dataset, fh)


def quantile(values: np.ndarray, q: float) -> float:
    """Type-7 quantile: linear interpolation between order statistics."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise DataError("quantile of empty data")
    h = (x.size - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, x.size - 1)
    return float(x[lo] + (h - lo) * (x[hi] - x[lo]))


def descriptive_stats(dataset: Dataset) -> DescriptiveStats:
    if len(dataset) == 0:
        raise DataError("descriptive statistics need at least one sample")
    x = dataset.features().values
    n = x.shape[0]
    per_metal = {}
    for j, metal in enumerate(METALS):
        col = x[:, j]
        std_defined = n >= 2
        per_metal[metal] = MetalStats(
            count=n,
            mean=float(col.mean()),
            std=float(col.std(ddof=1)) if std_defined else 0.0,
            min=float(col.min()),
            p25=quantile(col, 0.25),
            median=quantile(col, 0.5),
            p75=quantile(col, 0.75),
            max=float(col.max()),
            std_defined=std_defined,
        )
    if n < 2:
        warnings.warn("single sample: standard deviation undefined, reported as 0")
    return DescriptiveStats(per_metal)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson r of two vectors; 0.0 (with a warning) if either is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"pearson needs two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DataError("pearson needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        warnings.warn("zero-variance input: correlation defined as 0")
        return 0.0
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_matrix(m: FeatureMatrix) -> np.ndarray:
    x = m.values
    n, d = x.shape
    if n < 2:
        raise DataError("correlation needs at least 2 samples")
    centered = x - x.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    zero = ss == 0.0
    if zero.any():
        names = [m.columns[j] for j in np.flatnonzero(zero)]
        warnings.warn(f"zero-variance column(s) {names}: correlation defined as 0")
    scale = np.sqrt(np.where(zero, 1.0, ss))
    unit = centered / scale
    r = unit.T @ unit
    r[zero, :] = 0.0
    r[:, zero] = 0.0
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def standardize(m: FeatureMatrix) -> FeatureMatrix:
    """Column z-scores with the population (n) standard deviation.

    Zero-variance columns become all zeros; their stored std is 1 so the
    inverse transform still returns the constant.
    """
    if m.standardized:
        raise DataError("matrix is already standardized")
    x = m.values
    n = x.shape[0]
    if n < 2:
        raise DataError(f"standardization needs at least 2 samples, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    # second pass removes the rounding residue of the first mean
    residue = centered.mean(axis=0)
    centered -= residue
    mean = mean + residue
    std = np.sqrt((centered**2).mean(axis=0))
    zero = std == 0.0
    if zero.any():
        names = [m.columns[j] for j in np.flatnonzero(zero)]
        warnings.warn(f"zero-variance column(s) {names} standardized to zeros")
    safe = np.where(zero, 1.0, std)
    z = centered / safe
    z[:, zero] = 0.0
    return replace(m, values=z, standardized=True, col_means=mean, col_stds=safe)
