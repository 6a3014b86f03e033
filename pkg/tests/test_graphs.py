import numpy as np
import pytest

from fusedsample import (
    CooGraph,
    CscGraph,
    FeatureMatrix,
    LabelSet,
    build_csc,
    csc_to_coo,
    generate_erdos_renyi,
    generate_features,
    generate_labels,
    generate_rmat,
    in_neighbors,
)
from fusedsample.errors import ContractViolationError, MalformedInputError, ParameterError
from fusedsample.graphs import ragged_arange

from conftest import brute_force_in_neighbors


def test_build_csc_worked_example(g1_coo):
    g = build_csc(g1_coo)
    assert g.indptr.tolist() == [0, 2, 3, 7, 7, 9]
    assert g.indices.tolist() == [1, 2, 0, 0, 1, 3, 4, 2, 3]


def test_build_csc_empty_graph():
    g = build_csc(CooGraph(3, [], []))
    assert g.indptr.tolist() == [0, 0, 0, 0]
    assert g.indices.tolist() == []


def test_build_csc_self_loop():
    g = build_csc(CooGraph(1, [0], [0]))
    assert g.indptr.tolist() == [0, 1]
    assert g.indices.tolist() == [0]


def test_csc_to_coo_inverts_worked_example(g1):
    coo = csc_to_coo(g1)
    assert coo.dst.tolist() == [0, 0, 1, 2, 2, 2, 2, 4, 4]
    assert coo.src.tolist() == [1, 2, 0, 0, 1, 3, 4, 2, 3]
    assert csc_to_coo(build_csc(CooGraph(3, [], []))).nnz == 0
    single = csc_to_coo(CscGraph(1, [0, 1], [0]))
    assert single.dst.tolist() == [0] and single.src.tolist() == [0]


def test_conversion_round_trip_is_fixed_point():
    r = np.random.default_rng(0)
    for _ in range(50):
        n = int(r.integers(1, 40))
        m = int(r.integers(0, 4 * n))
        coo = CooGraph(n, r.integers(0, n, m), r.integers(0, n, m))
        g = build_csc(coo)
        g2 = build_csc(csc_to_coo(g))
        assert np.array_equal(g.indptr, g2.indptr)
        assert np.array_equal(g.indices, g2.indices)
        assert int(np.diff(g.indptr).sum()) == coo.nnz


def test_in_neighbors_views(g1):
    assert in_neighbors(g1, 2).tolist() == [0, 1, 3, 4]
    assert in_neighbors(g1, 3).tolist() == []
    assert in_neighbors(g1, 1).tolist() == [0]
    # a view over the immutable storage, not a copy
    assert in_neighbors(g1, 2).base is g1.indices
    with pytest.raises(ContractViolationError):
        in_neighbors(g1, 5)
    with pytest.raises(ContractViolationError):
        in_neighbors(g1, -1)


def test_in_degree_matches_brute_force_scan():
    r = np.random.default_rng(3)
    for _ in range(20):
        n = int(r.integers(1, 30))
        m = int(r.integers(0, 3 * n))
        coo = CooGraph(n, r.integers(0, n, m), r.integers(0, n, m))
        g = build_csc(coo)
        for v in range(n):
            assert len(in_neighbors(g, v)) == len(brute_force_in_neighbors(coo, v))


def test_malformed_inputs_rejected():
    with pytest.raises(MalformedInputError):
        CooGraph(3, [0, 5], [1, 1])
    with pytest.raises(MalformedInputError):
        CooGraph(3, [0], [1, 2])
    with pytest.raises(MalformedInputError):
        CscGraph(2, [0, 1], [5])
    with pytest.raises(MalformedInputError):
        CscGraph(2, [0, 2, 1], [0, 0, 0])
    with pytest.raises(MalformedInputError):
        CscGraph(2, [1, 2, 3], [0, 0, 0])


def test_graph_storage_is_immutable(g1):
    with pytest.raises(ValueError):
        g1.indices[0] = 3


def test_build_csc_dedup_flag():
    coo = CooGraph(3, [1, 1, 1, 2], [0, 0, 2, 1])
    kept = build_csc(coo)
    assert kept.indices.tolist() == [0, 0, 2, 1]
    deduped = build_csc(coo, dedup=True)
    assert deduped.indices.tolist() == [0, 2, 1]
    assert deduped.indptr.tolist() == [0, 0, 2, 3]


def test_erdos_renyi_zero_edges():
    g = generate_erdos_renyi(4, 0, 0)
    assert g.num_nodes == 4 and g.nnz == 0


def test_erdos_renyi_saturated():
    g = generate_erdos_renyi(2, 4, 123)
    pairs = set(zip(g.dst.tolist(), g.src.tolist()))
    assert pairs == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_erdos_renyi_deterministic_and_distinct():
    a = generate_erdos_renyi(100, 500, 7)
    b = generate_erdos_renyi(100, 500, 7)
    assert np.array_equal(a.dst, b.dst) and np.array_equal(a.src, b.src)
    assert len(set(zip(a.dst.tolist(), a.src.tolist()))) == 500
    assert not np.array_equal(a.dst, generate_erdos_renyi(100, 500, 8).dst)


def test_erdos_renyi_infeasible():
    with pytest.raises(ParameterError):
        generate_erdos_renyi(3, 10, 0)


def test_rmat_cardinality_contract():
    g = generate_rmat(3, 2, seed=1)
    assert g.num_nodes == 8 and g.nnz == 16


def test_rmat_deterministic():
    a = generate_rmat(6, 4, seed=42)
    b = generate_rmat(6, 4, seed=42)
    assert np.array_equal(a.dst, b.dst) and np.array_equal(a.src, b.src)


def test_rmat_parameter_errors():
    with pytest.raises(ParameterError):
        generate_rmat(3, 2, probs=(0.5, 0.2, 0.2, 0.2))
    with pytest.raises(ParameterError):
        generate_rmat(40, 2)


def test_rmat_uniform_quadrant_statistics():
    # With equal quadrant probabilities the top-bit quadrant counts are
    # binomial(m, 1/4); demand every count within 5 sigma.
    scale, ef = 10, 16
    g = generate_rmat(scale, ef, probs=(0.25, 0.25, 0.25, 0.25), seed=11)
    half = 1 << (scale - 1)
    m = g.nnz
    quadrant = (g.dst >= half).astype(int) * 2 + (g.src >= half).astype(int)
    counts = np.bincount(quadrant, minlength=4)
    sigma = np.sqrt(m * 0.25 * 0.75)
    assert np.all(np.abs(counts - m / 4) < 5 * sigma), counts


def test_feature_and_label_constructors():
    f = generate_features(5, 3, 0)
    assert f.num_nodes == 5 and f.dim == 3 and f.data.dtype == np.float32
    assert np.array_equal(f.data, generate_features(5, 3, 0).data)
    with pytest.raises(MalformedInputError):
        FeatureMatrix(np.zeros(5, dtype=np.float32))
    labels = generate_labels(50, 10, 1)
    assert len(labels) == 10
    assert np.all(np.diff(labels.nodes) > 0)
    with pytest.raises(MalformedInputError):
        LabelSet([3, 3, 4])
    with pytest.raises(MalformedInputError):
        LabelSet([1, 5], num_nodes=4)
    with pytest.raises(ParameterError):
        generate_labels(5, 9, 0)


def test_ragged_arange():
    assert ragged_arange(np.array([2, 0, 3])).tolist() == [0, 1, 0, 1, 2]
    assert ragged_arange(np.array([], dtype=np.int64)).tolist() == []
