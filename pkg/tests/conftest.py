import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from inscribed_trefoil.curve import preset  # noqa: E402
from inscribed_trefoil.solve import find_inscribed_prisms, s3_model  # noqa: E402

SYMMETRIC_T = np.arange(6) / 6


@pytest.fixture(scope="session")
def std_trefoil():
    return preset("paper-trefoil-s3")


@pytest.fixture(scope="session")
def std_solutions(std_trefoil):
    return find_inscribed_prisms(std_trefoil, 0.0, 12)


@pytest.fixture(scope="session")
def figure_eight_solutions():
    return find_inscribed_prisms(s3_model(preset("figure-eight-r3")), 0.0, 12)


@pytest.fixture(scope="session")
def trefoil_solutions():
    return find_inscribed_prisms(s3_model(preset("trefoil-r3")), 0.0, 12)
