import numpy as np
import pytest

from lcpmatch.geometry import RigidMotion
from lcpmatch.oracle import random_rotation


def random_motion(rng: np.random.Generator, span: float = 10.0) -> RigidMotion:
    return RigidMotion(random_rotation(rng), rng.uniform(-span, span, size=3))


def random_points(rng: np.random.Generator, n: int, span: float = 10.0) -> np.ndarray:
    return rng.uniform(-span, span, size=(n, 3))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)
