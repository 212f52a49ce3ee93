import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from igac.splines import KnotVector

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@st.composite
def knot_vectors(draw, degrees=(1, 2, 3, 4), max_interior=8):
    """Clamped knot vectors with random (possibly repeated) interior knots."""
    p = draw(st.sampled_from(degrees))
    a = draw(st.floats(-3.0, 3.0))
    width = draw(st.floats(0.5, 4.0))
    n = draw(st.integers(0, max_interior))
    fracs = draw(st.lists(st.floats(0.02, 0.98), min_size=n, max_size=n))
    inner = sorted(a + width * f for f in fracs)
    # cap interior multiplicity at the degree
    kept = []
    for t in inner:
        if kept.count(t) < p:
            kept.append(t)
    return KnotVector(p, [a] * (p + 1) + kept + [a + width] * (p + 1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cubic_single():
    return KnotVector(3, [0, 0, 0, 0, 1, 1, 1, 1])
