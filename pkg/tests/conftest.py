from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

from soilscreen import synthgen
from soilscreen.config import PipelineConfig
from soilscreen.pipeline import run_pipeline

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fixture_dataset():
    return synthgen.load_fixture()


@pytest.fixture(scope="session")
def fixture_report(fixture_dataset):
    cfg = PipelineConfig.from_flat({"input": str(synthgen.fixture_path())})
    return run_pipeline(cfg, fixture_dataset)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
