from pathlib import Path

import numpy as np
import pytest

from armmpc.dynamics import default_links
from armmpc.kinematics import ArmGeometry

REPO = Path(__file__).resolve().parents[1]
SCENARIOS = REPO / "scenarios"
FIXTURES = SCENARIOS / "fixtures"

TARGET_QD = np.radians([28.1, 67.8, 53.8])


@pytest.fixture(scope="session")
def geom():
    return ArmGeometry()


@pytest.fixture(scope="session")
def links(geom):
    return default_links(geom)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
