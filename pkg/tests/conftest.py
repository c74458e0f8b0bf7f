import numpy as np
import pytest
from hypothesis import settings

from brwcover.offspring import OffspringDist, parse_dist
from brwcover.rng import stream

settings.register_profile("brw", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("brw")

BUILTIN_SPECS = ["det:3", "poisson:3", "geom:3", "table:0=1/2,6=1/2", "det:4", "poisson:4"]


@pytest.fixture
def rng():
    return stream(20240611)


@pytest.fixture
def det3() -> OffspringDist:
    return parse_dist("det:3")


@pytest.fixture
def builtin_dists() -> list[OffspringDist]:
    return [parse_dist(s) for s in BUILTIN_SPECS]


def se_of_mean(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x.std(ddof=1) / np.sqrt(x.size))
