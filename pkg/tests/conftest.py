"""Shared fixtures: small towns so unit tests stay fast.

Acceptance tests build their own full-size configs; everything else runs
on a few hundred people and short horizons.
"""

import numpy as np
import pytest

from epitown.engine import EngineConfig, run
from epitown.world import LocationCounts, PopulationConfig, build_population


def small_population(size: int = 300) -> PopulationConfig:
    return PopulationConfig(
        size=size,
        locations=LocationCounts(
            homes=max(size // 3, 10),
            groceries=2,
            offices=3,
            schools=1,
            hospitals=1,
            retail=2,
            salons=2,
            cemeteries=1,
        ),
    )


def small_config(size: int = 300, horizon: int = 15, **over) -> EngineConfig:
    cfg = EngineConfig(population=small_population(size), horizon_days=horizon)
    for key, val in over.items():
        setattr(cfg, key, val)
    return cfg


@pytest.fixture(scope="session")
def tiny_world():
    return build_population(small_population(), seed=11)


@pytest.fixture(scope="session")
def short_run():
    """One cached 15-day unregulated run on the small town."""
    return run(small_config(), seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(123)
