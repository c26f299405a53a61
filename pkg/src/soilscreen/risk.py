"""USEPA-style soil exposure and health-risk indices.

Chronic daily intake per pathway (mg/kg/day)::

    ingestion   C * IngR * EF * ED * CF / (BW * AT)
    dermal      C * SA * AF * ABS * EF * ED * CF / (BW * AT)
    inhalation  C * InhR * EF * ED / (PEF * BW * AT)

with CF = 1e-6 kg/mg. AT is ``AT_nc`` for hazard quotients and ``AT_ca`` for
cancer intakes. HQ = sum over pathways of CDI / RfD, HI = sum of HQ over
metals, ILCR = sum over carcinogens and pathways of CDI_ca * SF.

Default parameters are residential-soil values of the kind used in RAGS-based
assessments; every one of them can be overridden from configuration.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Mapping

import numpy as np

from .geodata import METALS, Dataset, SampleRecord

logger = logging.getLogger(__name__)

CF = 1e-6
PATHWAYS: tuple[str, ...] = ("ingestion", "dermal", "inhalation")
RECEPTORS: tuple[str, ...] = ("adult", "child")
NEGLIGIBLE_RISK = 1e-6
UNACCEPTABLE_RISK = 1e-4


class RiskConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ReceptorParams:
    IngR: float  # mg/day
    InhR: float  # m3/day
    SA: float  # cm2
    AF: float  # mg/cm2/day
    EF: float  # days/yr
    ED: float  # yr
    BW: float  # kg
    AT_nc: float  # days
    AT_ca: float  # days
    PEF: float  # m3/kg

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise RiskConfigError(f"exposure parameter {f.name} must be > 0, got {value!r}")
        if not math.isclose(self.AT_nc, self.ED * 365.0, rel_tol=1e-12):
            raise RiskConfigError(
                f"AT_nc must equal ED * 365 ({self.ED * 365.0}), got {self.AT_nc}"
            )


DEFAULT_RECEPTORS = {
    "adult": ReceptorParams(
        IngR=100.0, InhR=20.0, SA=5700.0, AF=0.07, EF=350.0, ED=24.0, BW=70.0,
        AT_nc=24.0 * 365.0, AT_ca=70.0 * 365.0, PEF=1.36e9,
    ),
    "child": ReceptorParams(
        IngR=200.0, InhR=10.0, SA=2800.0, AF=0.2, EF=350.0, ED=6.0, BW=15.0,
        AT_nc=6.0 * 365.0, AT_ca=70.0 * 365.0, PEF=1.36e9,
    ),
}
DEFAULT_ABS = {m: 0.001 for m in METALS} | {"As": 0.03}


@dataclass(frozen=True)
class ExposureParams:
    receptors: dict[str, ReceptorParams] = field(default_factory=lambda: dict(DEFAULT_RECEPTORS))
    abs_: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_ABS))

    def __post_init__(self) -> None:
        for metal, value in self.abs_.items():
            if not 0.0 < value <= 1.0:
                raise RiskConfigError(f"ABS for {metal} must be in (0, 1], got {value}")

    def receptor(self, name: str) -> ReceptorParams:
        try:
            return self.receptors[name]
        except KeyError:
            raise RiskConfigError(f"no exposure parameters for receptor {name!r}") from None

    def absorption(self, metal: str) -> float:
        try:
            return self.abs_[metal]
        except KeyError:
            raise RiskConfigError(f"missing exposure parameter ABS for {metal}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "receptors": {k: asdict(v) for k, v in self.receptors.items()},
            "ABS": dict(self.abs_),
            "CF": CF,
        }

    @classmethod
    def from_mapping(cls, flat: Mapping[str, Any]) -> ExposureParams:
        """Build from dotted keys ``<receptor>.<PARAM>`` and ``abs.<metal>``."""
        receptors = {}
        for name in RECEPTORS:
            kwargs = {}
            for f in fields(ReceptorParams):
                key = f"{name}.{f.name}"
                if key not in flat:
                    raise RiskConfigError(f"missing exposure parameter {key}")
                kwargs[f.name] = float(flat[key])
            receptors[name] = ReceptorParams(**kwargs)
        abs_ = {}
        for metal in METALS:
            key = f"abs.{metal}"
            if key not in flat:
                raise RiskConfigError(f"missing exposure parameter {key}")
            abs_[metal] = float(flat[key])
        return cls(receptors, abs_)


@dataclass(frozen=True)
class MetalToxicity:
    rfd_ing: float | None = None
    rfd_derm: float | None = None
    rfd_inh: float | None = None
    giabs: float | None = None
    sf_ing: float | None = None
    sf_derm: float | None = None
    sf_inh: float | None = None
    carcinogen: bool = False

    def __post_init__(self) -> None:
        for name in ("rfd_ing", "rfd_derm", "rfd_inh", "giabs"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise RiskConfigError(f"{name} must be > 0, got {value}")
        for name in ("sf_ing", "sf_derm", "sf_inh"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise RiskConfigError(f"{name} must be >= 0, got {value}")

    def rfd(self, pathway: str) -> float | None:
        if pathway == "ingestion":
            return self.rfd_ing
        if pathway == "dermal":
            if self.rfd_derm is not None:
                return self.rfd_derm
            if self.rfd_ing is not None and self.giabs is not None:
                return self.rfd_ing * self.giabs
            return None
        if pathway == "inhalation":
            return self.rfd_inh
        raise ValueError(f"unknown pathway {pathway!r}")

    def slope(self, pathway: str) -> float | None:
        return {"ingestion": self.sf_ing, "dermal": self.sf_derm, "inhalation": self.sf_inh}[pathway]


DEFAULT_TOXICITY = {
    "As": MetalToxicity(rfd_ing=3.0e-4, rfd_inh=3.01e-4, giabs=1.0, sf_ing=1.5, carcinogen=True),
    "Cd": MetalToxicity(rfd_ing=1.0e-3, rfd_inh=1.0e-3, giabs=0.025, sf_ing=0.38, carcinogen=True),
    "Cr": MetalToxicity(rfd_ing=3.0e-3, rfd_inh=2.86e-5, giabs=0.025, sf_ing=0.5, carcinogen=True),
    "Cu": MetalToxicity(rfd_ing=4.0e-2, rfd_inh=4.02e-2, giabs=1.0),
    "Hg": MetalToxicity(rfd_ing=3.0e-4, rfd_inh=8.57e-5, giabs=0.07),
    "Ni": MetalToxicity(rfd_ing=2.0e-2, rfd_inh=2.06e-2, giabs=0.04, sf_ing=1.7, carcinogen=True),
    "Pb": MetalToxicity(rfd_ing=3.5e-3, rfd_inh=3.52e-3, giabs=1.0, sf_ing=8.5e-3, carcinogen=True),
    "Zn": MetalToxicity(rfd_ing=3.0e-1, rfd_inh=3.0e-1, giabs=1.0),
}


@dataclass(frozen=True)
class ToxicityTable:
    metals: dict[str, MetalToxicity] = field(default_factory=lambda: dict(DEFAULT_TOXICITY))

    def __getitem__(self, metal: str) -> MetalToxicity:
        try:
            return self.metals[metal]
        except KeyError:
            raise RiskConfigError(f"no toxicity entry for {metal}") from None

    @property
    def carcinogens(self) -> list[str]:
        return [m for m in METALS if m in self.metals and self.metals[m].carcinogen]

    def to_dict(self) -> dict[str, Any]:
        return {m: asdict(t) for m, t in self.metals.items()}

    @classmethod
    def from_mapping(cls, flat: Mapping[str, Any]) -> ToxicityTable:
        """Build from dotted keys ``<metal>.<field>``; absent fields stay unset."""
        metals = {}
        for metal in METALS:
            kwargs = {}
            for f in fields(MetalToxicity):
                key = f"{metal}.{f.name}"
                if key in flat and flat[key] is not None:
                    kwargs[f.name] = bool(flat[key]) if f.name == "carcinogen" else float(flat[key])
            if not kwargs:
                raise RiskConfigError(f"missing toxicity entry for {metal}")
            metals[metal] = MetalToxicity(**kwargs)
        return cls(metals)


def cdi(
    conc: float | np.ndarray,
    pathway: str,
    params: ExposureParams,
    receptor: str,
    metal: str | None = None,
    cancer: bool = False,
) -> float | np.ndarray:
    """Chronic daily intake in mg/kg/day; linear in ``conc``.

    ``metal`` selects the dermal absorption fraction and is required for the
    dermal pathway. ``cancer`` switches the averaging time to ``AT_ca``.
    """
    p = params.receptor(receptor)
    at = p.AT_ca if cancer else p.AT_nc
    if pathway == "ingestion":
        return conc * p.IngR * p.EF * p.ED * CF / (p.BW * at)
    if pathway == "dermal":
        if metal is None:
            raise RiskConfigError("dermal intake needs the metal to look up ABS")
        return conc * p.SA * p.AF * params.absorption(metal) * p.EF * p.ED * CF / (p.BW * at)
    if pathway == "inhalation":
        return conc * p.InhR * p.EF * p.ED / (p.PEF * p.BW * at)
    raise ValueError(f"unknown pathway {pathway!r}")


@dataclass(frozen=True)
class HazardResult:
    hq: dict[str, float]
    hq_by_pathway: dict[str, dict[str, float]]
    hi: float

    @property
    def exceeds(self) -> bool:
        return self.hi > 1.0


def _warn_skipped(metal: str, pathway: str, what: str) -> None:
    warnings.warn(f"{metal}: no {what} for {pathway} pathway; pathway skipped", stacklevel=3)


def hazard_index(sample: SampleRecord, tox: ToxicityTable, params: ExposureParams, receptor: str) -> HazardResult:
    hq: dict[str, float] = {}
    by_path: dict[str, dict[str, float]] = {}
    for metal in METALS:
        entry = tox[metal]
        parts = {}
        for pathway in PATHWAYS:
            rfd = entry.rfd(pathway)
            if rfd is None:
                _warn_skipped(metal, pathway, "reference dose")
                continue
            parts[pathway] = cdi(sample.conc[metal], pathway, params, receptor, metal) / rfd
        by_path[metal] = parts
        hq[metal] = math.fsum(parts.values())
    return HazardResult(hq, by_path, math.fsum(hq.values()))


def ilcr(sample: SampleRecord, tox: ToxicityTable, params: ExposureParams, receptor: str) -> float:
    carcinogens = tox.carcinogens
    if not carcinogens:
        warnings.warn("no carcinogens configured; ILCR is 0")
        return 0.0
    terms = []
    for metal in carcinogens:
        entry = tox[metal]
        for pathway in PATHWAYS:
            sf = entry.slope(pathway)
            if sf is None:
                continue
            terms.append(cdi(sample.conc[metal], pathway, params, receptor, metal, cancer=True) * sf)
    return math.fsum(terms)


def ilcr_band(value: float) -> str:
    if value < NEGLIGIBLE_RISK:
        return "negligible"
    if value > UNACCEPTABLE_RISK:
        return "unacceptable"
    return "tolerable"


@dataclass(frozen=True)
class RiskProfile:
    """Per-sample risk for every receptor.

    ``cdi[r]`` is ``(n, 8, 3)`` (metal x pathway, non-cancer averaging time);
    ``hq[r]`` is ``(n, 8)``; ``hi[r]`` and ``ilcr[r]`` are n-vectors.
    """

    sample_ids: list[str]
    cdi: dict[str, np.ndarray]
    hq: dict[str, np.ndarray]
    hi: dict[str, np.ndarray]
    ilcr: dict[str, np.ndarray]
    parameters: dict[str, Any]
    source: str = "recomputed"

    def column(self, name: str) -> np.ndarray:
        """``hi_adult``-style access."""
        kind, receptor = name.split("_", 1)
        return {"hi": self.hi, "ilcr": self.ilcr}[kind][receptor]


def compute_profile(dataset: Dataset, tox: ToxicityTable | None = None, params: ExposureParams | None = None) -> RiskProfile:
    tox = tox or ToxicityTable()
    params = params or ExposureParams()
    n = len(dataset)
    cdis, hqs, his, ilcrs = {}, {}, {}, {}
    for receptor in RECEPTORS:
        c = np.zeros((n, len(METALS), len(PATHWAYS)))
        q = np.zeros((n, len(METALS)))
        h = np.zeros(n)
        cr = np.zeros(n)
        for i, sample in enumerate(dataset.samples):
            for j, metal in enumerate(METALS):
                for k, pathway in enumerate(PATHWAYS):
                    c[i, j, k] = cdi(sample.conc[metal], pathway, params, receptor, metal)
            hz = hazard_index(sample, tox, params, receptor)
            q[i] = [hz.hq[m] for m in METALS]
            h[i] = hz.hi
            cr[i] = ilcr(sample, tox, params, receptor)
        cdis[receptor], hqs[receptor], his[receptor], ilcrs[receptor] = c, q, h, cr
    return RiskProfile(
        dataset.sample_ids, cdis, hqs, his, ilcrs,
        {"exposure": params.to_dict(), "toxicity": tox.to_dict()},
    )


def given_profile(dataset: Dataset) -> RiskProfile:
    """Wrap the dataset's precomputed HI/ILCR columns (no CDI/HQ detail)."""
    n = len(dataset)
    empty_cdi = {r: np.full((n, len(METALS), len(PATHWAYS)), np.nan) for r in RECEPTORS}
    empty_hq = {r: np.full((n, len(METALS)), np.nan) for r in RECEPTORS}
    return RiskProfile(
        dataset.sample_ids,
        empty_cdi,
        empty_hq,
        {r: dataset.risk_column(f"hi_{r}") for r in RECEPTORS},
        {r: dataset.risk_column(f"ilcr_{r}") for r in RECEPTORS},
        {"source": "risk columns supplied with the input"},
        source="given",
    )
