import numpy as np
import pytest
from hypothesis import strategies as st

from prophet_samples import Instance, ValueDist


@pytest.fixture
def instance_a() -> Instance:
    """Two boxes: a sure 1, then 2 or 0 with equal odds."""
    return Instance((ValueDist.atom(1.0), ValueDist.discrete({2.0: 0.5, 0.0: 0.5})))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)


@st.composite
def value_dists(draw, max_segments: int = 3, discrete_only: bool = False) -> ValueDist:
    nseg = draw(st.integers(1, max_segments))
    raw = [draw(st.floats(0.05, 1.0)) for _ in range(nseg)]
    total = sum(raw)
    parts = []
    for w in raw:
        lo = draw(st.floats(0.0, 5.0))
        if discrete_only or draw(st.booleans()):
            parts.append((w / total, lo, lo))
        else:
            width = draw(st.floats(0.1, 3.0))
            parts.append((w / total, lo, lo + width))
    return ValueDist(tuple(parts))


@st.composite
def instances(draw, max_boxes: int = 4, discrete_only: bool = False) -> Instance:
    n = draw(st.integers(1, max_boxes))
    return Instance(
        tuple(draw(value_dists(discrete_only=discrete_only)) for _ in range(n))
    )
