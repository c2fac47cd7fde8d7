import numpy as np
import pytest

from emstress.geometry import Segment, build_tree, unfold
from emstress.physics import MaterialParams, ThermalModel


@pytest.fixture(scope="session")
def params():
    return MaterialParams()


@pytest.fixture(scope="session")
def two_segment_tree():
    """The two-segment wire: 20 um at 4e10 A/m^2, 30 um at -1e10 A/m^2."""
    return build_tree(
        [
            Segment(1, 20e-6, 4e10, 0, 1),
            Segment(2, 30e-6, -1e10, 1, 2),
        ]
    )


@pytest.fixture(scope="session")
def two_segment_domain(two_segment_tree):
    return unfold(two_segment_tree, 0.5e-6)


@pytest.fixture(scope="session")
def single_wire_tree():
    return build_tree([Segment(1, 50e-6, 1e10, 0, 1)])


@pytest.fixture(scope="session")
def thermal_case1():
    return ThermalModel(case="I")


@pytest.fixture(scope="session")
def thermal_case2():
    return ThermalModel(case="II")


@pytest.fixture(scope="session")
def thermal_case3():
    return ThermalModel(case="III")


def rel_l2(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
