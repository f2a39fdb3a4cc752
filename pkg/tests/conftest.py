import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from experiments.instances import Instance, decoupled_instance, random_instance, reference_instance  # noqa: E402
from schemas import ProjectionKind  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale acceptance runs (deselect with -m \"not slow\")")


@pytest.fixture
def reference():
    """A = [[0, 1], [0, 0]], P = diag(1, 0)."""
    return reference_instance()


@pytest.fixture
def decoupled():
    """A = 0, P = diag(1, 0)."""
    return decoupled_instance()


@pytest.fixture
def seeded():
    def make(seed=0, dim=8, kind=ProjectionKind.ORTHOGONAL_COORDINATE, scale=1.0):
        return random_instance(seed, dim, kind, scale)
    return make


@pytest.fixture
def instance_set():
    """Decoupled, Reference and two small seeded instances (one oblique)."""
    return [
        Instance(0, *decoupled_instance(), kind="decoupled"),
        Instance(0, *reference_instance(), kind="reference"),
        Instance(3, *random_instance(3, 4), kind="orthogonal-coordinate"),
        Instance(5, *random_instance(5, 5, ProjectionKind.OBLIQUE), kind="oblique"),
    ]
