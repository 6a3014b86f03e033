import itertools

import numpy as np
import pytest

from fusedsample import CooGraph, CscGraph, build_csc


@pytest.fixture
def g1_coo() -> CooGraph:
    """The 5-node worked example used throughout the hand traces."""
    return CooGraph(
        5,
        np.array([0, 0, 1, 2, 2, 2, 2, 4, 4]),
        np.array([1, 2, 0, 0, 1, 3, 4, 2, 3]),
    )


@pytest.fixture
def g1(g1_coo) -> CscGraph:
    return build_csc(g1_coo)


@pytest.fixture
def two_cliques() -> CooGraph:
    """Two disconnected 10-node directed cliques (all ordered pairs)."""
    edges = [(u, v) for u, v in itertools.permutations(range(10), 2)]
    edges += [(u + 10, v + 10) for u, v in itertools.permutations(range(10), 2)]
    src = np.array([e[0] for e in edges])
    dst = np.array([e[1] for e in edges])
    return CooGraph(20, dst, src)


def brute_force_in_neighbors(coo: CooGraph, v: int) -> np.ndarray:
    """Independent oracle: scan the edge list for sources of destination v."""
    return np.sort(coo.src[coo.dst == v])


def edge_set(coo: CooGraph) -> set:
    return set(zip(coo.src.tolist(), coo.dst.tolist()))
