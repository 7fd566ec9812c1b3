"""Shared fixtures: a small generated cohort and the stub plugin command."""

import sys
from pathlib import Path

import pytest

from isr.engine import RouteData
from isr.synth import (
    CohortConfig,
    EventConfig,
    RouteConfig,
    generate_cohort,
    ingest_session,
    write_cohort,
)

STUB_PATH = Path(__file__).parent / "plugin_stub.py"
STUB_CMD = f"{sys.executable} {STUB_PATH}"


def tiny_config(seed: int = 7, effect_size: float = 1.0) -> CohortConfig:
    """One short route, 15 sessions: fast enough for unit tests."""
    return CohortConfig(
        routes=(
            RouteConfig(
                "route_a",
                3200,
                (EventConfig("event_1", 800, 1200, effect_size),),
            ),
        ),
        participants_per_class=5,
        seed=seed,
    )


@pytest.fixture(scope="session")
def tiny_cohort():
    config = tiny_config()
    lattices, sessions = generate_cohort(config)
    sessions = [ingest_session(s) for s in sessions]
    return config, lattices, sessions


@pytest.fixture(scope="session")
def tiny_route(tiny_cohort):
    _, lattices, sessions = tiny_cohort
    return RouteData(lattices[0], sessions)


@pytest.fixture(scope="session")
def tiny_cohort_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cohort")
    write_cohort(tiny_config(), out)
    return out


@pytest.fixture()
def stub_plugin_cmd(monkeypatch):
    monkeypatch.setenv("ISR_PLUGIN_CMD", STUB_CMD)
    return STUB_CMD
