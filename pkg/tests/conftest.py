import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from triloc.manifold import TrianglePoint


SIDE = 0.1

# Transmitter triangle used throughout: apex height chosen so the triangle
# is exactly equilateral (1 + 0.05*sqrt(3) in the third coordinate).
TRUTH_COLUMNS = np.column_stack(
    [
        [2.0, 2.0, 1.0],
        [2.1, 2.0, 1.0],
        [2.05, 2.0, 1.0 + 0.05 * np.sqrt(3.0)],
    ]
)

BEACONS = np.array(
    [
        [0.0, 0.0, 3.0],
        [4.0, 0.0, 3.0],
        [0.0, 4.0, 3.0],
        [4.0, 4.0, 0.0],
    ]
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def truth_point():
    return TrianglePoint(TRUTH_COLUMNS.copy(), SIDE)
