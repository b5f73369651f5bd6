import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

import parkflux as pf
from parkflux import _kernels

settings.register_profile(
    "dev", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.data_too_large])
settings.load_profile("dev")


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    _kernels.warm_up()


@pytest.fixture(scope="session")
def geo_half():
    return pf.make_law(pf.DistSpec.geometric(0.5))


@pytest.fixture(scope="session")
def poisson1():
    return pf.make_law(pf.DistSpec.poisson(1.0))


@st.composite
def parent_trees(draw, max_nodes=40, permute=True):
    """Arbitrary rooted trees as random-attachment parent arrays, optionally
    relabeled so the root is not node 0 (exercises the slow parking order)."""
    n = draw(st.integers(1, max_nodes))
    parent = np.full(n, -1, dtype=np.int64)
    for i in range(1, n):
        parent[i] = draw(st.integers(0, i - 1))
    if permute and n > 1 and draw(st.booleans()):
        perm = np.array(draw(st.permutations(range(n))), dtype=np.int64)
        new_parent = np.full(n, -1, dtype=np.int64)
        for v in range(n):
            p = parent[v]
            new_parent[perm[v]] = -1 if p < 0 else perm[p]
        parent = new_parent
    return pf.Tree.from_parent_array(parent)


@st.composite
def labeled_trees(draw, max_nodes=40, max_cars=3):
    tree = draw(parent_trees(max_nodes=max_nodes))
    counts = np.array(
        draw(st.lists(st.integers(0, max_cars), min_size=tree.n,
                      max_size=tree.n)), dtype=np.int64)
    return tree, pf.CarLabels(counts=counts)


def car_order(rng: np.random.Generator, counts: np.ndarray) -> list[int]:
    """One entry per individual car, in a random order."""
    order = np.repeat(np.arange(counts.shape[0]), counts)
    rng.shuffle(order)
    return order.tolist()
