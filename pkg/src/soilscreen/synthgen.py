"""Deterministic synthetic soil dataset shaped like the published summary.

Twelve waste sites with six samples each plus six residential controls.
Each site has a mean concentration profile; samples scatter around it with
noise built from three shared latent factors plus small independent
per-metal noise; draws with a negative value are rejected. Site S3's Cu is
drawn lognormal to produce the extreme Cu tail.

The site profiles encode the qualitative structure reported for the survey:
a multi-metal hotspot with a Cu spike at S3, depleted Ni at S4/S5, Pb-Zn
co-elevation at S9-S12, and low-concentration residential controls.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geodata import METALS, Dataset, SampleRecord, descriptive_stats, load_dataset, pearson_matrix
from .risk import ExposureParams, ToxicityTable, compute_profile

logger = logging.getLogger(__name__)

# Published per-metal means (mg/kg) the generator is calibrated against.
TARGET_MEANS = {
    "As": 6.48, "Cd": 3.35, "Cr": 83.88, "Cu": 108.65,
    "Hg": 2.44, "Ni": 25.03, "Pb": 25.65, "Zn": 67.43,
}
CU_MAX_RANGE = (550.0, 650.0)
MEAN_TOLERANCE = 0.15
FIXTURE_SEED = 42
FIXTURE_NAME = "fixture_seed42.csv"


class CalibrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SiteModel:
    """Per-metal location and scale (mg/kg) for one site.

    ``cu_lognormal`` = (median, sigma) replaces the normal Cu draw.
    """

    site: str
    location: dict[str, float]
    scale: dict[str, float]
    cu_lognormal: tuple[float, float] | None = None
    factor_amplitude: float = 1.0

    def __post_init__(self) -> None:
        for metal in METALS:
            if self.scale[metal] <= 0:
                raise ValueError(f"{self.site}: scale for {metal} must be > 0")


def _profile(**loc: float) -> dict[str, float]:
    return {m: float(loc[m]) for m in METALS}


# Within-site coefficient of variation: scatter grows with concentration.
_CV = _profile(As=0.05, Cd=0.04, Cr=0.025, Cu=0.012, Hg=0.05, Ni=0.03, Pb=0.06, Zn=0.06)

# fmt: off
_A = dict(As=9.8, Cd=3.55, Cr=92.0, Cu=79.0, Hg=2.75, Ni=26.8, Pb=42.0, Zn=38.0)   # As-Pb enriched
_B = dict(As=6.0, Cd=3.50, Cr=88.0, Cu=78.0, Hg=2.45, Ni=26.8, Pb=22.0, Zn=70.0)   # background-like
_NI_LOW = dict(As=4.5, Cd=3.45, Cr=87.0, Cu=78.0, Hg=2.35, Ni=2.5, Pb=8.0, Zn=125.0)

_SITE_LOCATIONS = {
    "S1":  _profile(**_A),
    "S2":  _profile(**{**_A, "As": 10.1, "Pb": 44.0}),
    # Cu comes from the lognormal draw; the 0.0 here is a placeholder
    "S3":  _profile(**{**_A, "As": 11.2, "Cd": 5.46, "Cr": 97.0, "Cu": 0.0, "Hg": 3.8, "Ni": 55.0, "Pb": 52.0}),
    "S4":  _profile(**_NI_LOW),
    "S5":  _profile(**{**_NI_LOW, "Ni": 3.2, "Zn": 120.0}),
    "S6":  _profile(**{**_A, "Cr": 94.0, "Hg": 2.9}),
    "S7":  _profile(**{**_B, "Pb": 18.0, "Zn": 62.0}),
    "S8":  _profile(**{**_B, "Pb": 17.0, "Zn": 60.0}),
    # moderate Pb-Zn co-elevation
    "S9":  _profile(**{**_B, "Pb": 27.0, "Zn": 82.0}),
    "S10": _profile(**{**_B, "Pb": 28.0, "Zn": 86.0}),
    "S11": _profile(**{**_B, "Pb": 26.0, "Zn": 80.0}),
    "S12": _profile(**{**_B, "Pb": 27.0, "Zn": 84.0}),
    "Residential": _profile(As=0.6, Cd=0.25, Cr=4.0, Cu=12.0, Hg=0.15, Ni=20.0, Pb=2.0, Zn=14.0),
}
# fmt: on

# Shared latent factors, in units of each metal's published standard deviation:
# overall contamination level, As/Pb versus Zn, and a Zn-only factor that
# spreads sites without adding much hazard.
TARGET_STDS = _profile(As=3.33, Cd=1.17, Cr=24.90, Cu=148.10, Hg=0.92, Ni=14.46, Pb=19.27, Zn=44.17)
_LOADINGS = np.array([
    # As    Cd    Cr    Cu    Hg    Ni    Pb    Zn
    [0.20, 0.25, 0.25, 0.00, 0.25, 0.00, 0.15, 0.10],
    [0.20, 0.00, 0.00, 0.00, 0.00, 0.00, 0.20, -0.20],
    [0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.50],
])
_FACTOR_AMPLITUDE = 1.2
# S3 is kept compact; controls barely move.
_SITE_AMPLITUDE = {"S3": 0.4, "Residential": 0.15}
_S3_CU_LOGNORMAL = (540.0, 0.06)  # (median, sigma)


def _scale_for(location: dict[str, float]) -> dict[str, float]:
    return {m: max(_CV[m] * location[m], 0.01) for m in METALS}


def default_site_models() -> list[SiteModel]:
    models = []
    for i in range(1, 13):
        site = f"S{i}"
        cu = _S3_CU_LOGNORMAL if site == "S3" else None
        loc = _SITE_LOCATIONS[site]
        amp = _SITE_AMPLITUDE.get(site, _FACTOR_AMPLITUDE)
        models.append(SiteModel(site, loc, _scale_for(loc), cu, amp))
    loc = _SITE_LOCATIONS["Residential"]
    models.append(SiteModel("Residential", loc, _scale_for(loc), None, _SITE_AMPLITUDE["Residential"]))
    return models


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 42
    n_sites: int = 12
    samples_per_site: int = 6
    n_controls: int = 6
    max_retries: int = 25
    decimals: int = 2
    sites: list[SiteModel] = field(default_factory=default_site_models)

    def __post_init__(self) -> None:
        if self.n_sites != 12 or self.samples_per_site != 6 or self.n_controls != 6:
            raise ValueError("the calibrated layout is 12 sites x 6 samples + 6 controls (n = 78)")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")

    @property
    def n_total(self) -> int:
        return self.n_sites * self.samples_per_site + self.n_controls


def _draw_site(model: SiteModel, count: int, rng: np.random.Generator, floor: float) -> np.ndarray:
    loc = np.array([model.location[m] for m in METALS])
    scale = np.array([model.scale[m] for m in METALS])
    loadings = _LOADINGS * np.array([TARGET_STDS[m] for m in METALS]) * model.factor_amplitude
    out = np.empty((count, len(METALS)))
    for i in range(count):
        while True:
            factors = rng.standard_normal(_LOADINGS.shape[0])
            row = loc + factors @ loadings + scale * rng.standard_normal(len(METALS))
            if model.cu_lognormal is not None:
                median, sigma = model.cu_lognormal
                row[METALS.index("Cu")] = median * math.exp(sigma * rng.standard_normal())
            if (row >= 0).all():
                break
        out[i] = np.maximum(row, floor)
    return out


def calibration_problems(dataset: Dataset) -> list[str]:
    """Reasons ``dataset`` misses the summary targets (empty when it passes)."""
    problems = []
    if len(dataset) != 78:
        problems.append(f"n = {len(dataset)}, expected 78")
    stats = descriptive_stats(dataset)
    for metal, target in TARGET_MEANS.items():
        mean = stats[metal].mean
        if abs(mean - target) > MEAN_TOLERANCE * target:
            problems.append(f"{metal} mean {mean:.2f} not within 15% of {target}")
    cu_max = stats["Cu"].max
    if not CU_MAX_RANGE[0] <= cu_max <= CU_MAX_RANGE[1]:
        problems.append(f"Cu max {cu_max:.2f} outside {CU_MAX_RANGE}")
    r = pearson_matrix(dataset.features())
    idx = {m: i for i, m in enumerate(METALS)}
    for a, b in (("Cr", "Hg"), ("Cd", "Cr"), ("As", "Pb")):
        if r[idx[a], idx[b]] < 0.6:
            problems.append(f"r({a},{b}) = {r[idx[a], idx[b]]:.2f} < 0.6")
    for a, b in (("Zn", "As"), ("Zn", "Pb")):
        if r[idx[a], idx[b]] > 0:
            problems.append(f"r({a},{b}) = {r[idx[a], idx[b]]:.2f} > 0")
    return problems


def _build(cfg: GeneratorConfig, rng: np.random.Generator) -> Dataset:
    floor = 10.0 ** -cfg.decimals
    samples = []
    for model in cfg.sites:
        control = model.site == "Residential"
        count = cfg.n_controls if control else cfg.samples_per_site
        values = np.round(_draw_site(model, count, rng, floor), cfg.decimals)
        prefix = "R" if control else model.site
        for i, row in enumerate(values, start=1):
            samples.append(
                SampleRecord(
                    f"{prefix}-{i:02d}", model.site, control,
                    {m: float(v) for m, v in zip(METALS, row)},
                )
            )
    return Dataset(tuple(samples))


def attach_risk(dataset: Dataset, tox: ToxicityTable | None = None, params: ExposureParams | None = None) -> Dataset:
    profile = compute_profile(dataset, tox, params)
    samples = []
    for i, s in enumerate(dataset.samples):
        risk = {
            "hi_adult": float(profile.hi["adult"][i]),
            "hi_child": float(profile.hi["child"][i]),
            "ilcr_adult": float(profile.ilcr["adult"][i]),
            "ilcr_child": float(profile.ilcr["child"][i]),
        }
        samples.append(SampleRecord(s.sample_id, s.site, s.is_control, dict(s.conc), risk))
    return Dataset(tuple(samples))


def generate(cfg: GeneratorConfig = GeneratorConfig()) -> Dataset:
    """Draw a calibrated dataset; retries use fresh child streams of the seed."""
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.max_retries)
    problems: list[str] = []
    for attempt, ss in enumerate(streams):
        dataset = _build(cfg, np.random.default_rng(ss))
        problems = calibration_problems(dataset)
        if not problems:
            logger.info("seed %d calibrated on attempt %d", cfg.seed, attempt + 1)
            return attach_risk(dataset)
        logger.debug("seed %d attempt %d rejected: %s", cfg.seed, attempt + 1, problems)
    raise CalibrationError(
        f"seed {cfg.seed}: calibration failed after {cfg.max_retries} attempts "
        f"({'; '.join(problems)}); try a different seed"
    )


def fixture_path() -> Path:
    """Path of the bundled seed-42 fixture CSV."""
    return Path(str(resources.files("soilscreen").joinpath("data", FIXTURE_NAME)))


def load_fixture() -> Dataset:
    return load_dataset(fixture_path())
