from __future__ import annotations

import dataclasses
import io

import pytest

from soilscreen import geodata, synthgen
from soilscreen.synthgen import CalibrationError, GeneratorConfig


@pytest.fixture(scope="module")
def regenerated():
    return synthgen.generate(GeneratorConfig(seed=synthgen.FIXTURE_SEED))


def test_deterministic(regenerated):
    assert synthgen.generate(GeneratorConfig(seed=42)) == regenerated


def test_matches_committed_fixture_bytes(regenerated):
    buf = io.StringIO()
    geodata.dump_dataset(regenerated, buf)
    committed = synthgen.fixture_path().read_text(encoding="utf-8")
    assert buf.getvalue() == committed


def test_fixture_is_calibrated(fixture_dataset):
    assert synthgen.calibration_problems(fixture_dataset) == []


def test_layout(fixture_dataset):
    ids = fixture_dataset.sample_ids
    assert ids[0] == "S1-01" and ids[71] == "S12-06" and ids[-1] == "R-06"
    assert fixture_dataset.features().values.min() > 0


def test_other_seed_differs(regenerated):
    other = synthgen.generate(GeneratorConfig(seed=7))
    assert other != regenerated
    assert synthgen.calibration_problems(other) == []


def test_impossible_target_raises():
    sites = [
        dataclasses.replace(m, cu_lognormal=(5000.0, 0.01)) if m.cu_lognormal else m
        for m in synthgen.default_site_models()
    ]
    with pytest.raises(CalibrationError, match="Cu max"):
        synthgen.generate(GeneratorConfig(seed=1, max_retries=2, sites=sites))


def test_layout_is_fixed():
    with pytest.raises(ValueError):
        GeneratorConfig(n_sites=10)
    with pytest.raises(ValueError):
        GeneratorConfig(max_retries=0)


def test_site_model_scale_positive():
    m = synthgen.default_site_models()[0]
    with pytest.raises(ValueError):
        dataclasses.replace(m, scale={**m.scale, "As": 0.0})
