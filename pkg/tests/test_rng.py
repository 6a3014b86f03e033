import numpy as np
import pytest

from fusedsample.errors import ParameterError
from fusedsample.rng import SamplerRng, bounded, bounded_array, mix64, mix64_array


def test_mix64_scalar_matches_vector():
    r = np.random.default_rng(0)
    xs = r.integers(0, 2**63, size=1000, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
    vec = mix64_array(xs)
    for x, v in zip(xs.tolist(), vec.tolist()):
        assert mix64(x) == v


def test_bounded_scalar_matches_vector_and_range():
    r = np.random.default_rng(1)
    xs = r.integers(0, 2**64, size=2000, dtype=np.uint64)
    ms = r.integers(1, 2**31, size=2000, dtype=np.uint64)
    vec = bounded_array(xs, ms)
    assert (vec < ms).all()
    for x, m, v in zip(xs.tolist(), ms.tolist(), vec.tolist()):
        assert bounded(x, m) == v


def test_stream_is_deterministic_and_keyed():
    rng = SamplerRng(42)
    a = [rng.stream(3, 17).next_u64() for _ in range(5)]
    b = [rng.stream(3, 17).next_u64() for _ in range(5)]
    assert a == b
    assert rng.stream(3, 18).next_u64() != a[0]
    assert rng.stream(4, 17).next_u64() != a[0]
    assert SamplerRng(43).stream(3, 17).next_u64() != a[0]


def test_stream_keys_match_scalar_stream():
    rng = SamplerRng(7)
    nodes = np.array([0, 1, 5, 1000, 2**40], dtype=np.int64)
    keys = rng.stream_keys(2, nodes)
    for node, key in zip(nodes.tolist(), keys.tolist()):
        assert rng.stream_key(2, node) == key


def test_draws_match_stream_counters():
    rng = SamplerRng(9)
    nodes = np.array([3, 4, 9], dtype=np.int64)
    for counter in range(4):
        vec = rng.draws(1, nodes, counter)
        for node, v in zip(nodes.tolist(), vec.tolist()):
            s = rng.stream(1, node)
            for _ in range(counter):
                s.next_u64()
            assert s.next_u64() == v


def test_permutation_properties():
    rng = SamplerRng(5)
    p0 = rng.permutation(100, epoch=0)
    assert np.array_equal(np.sort(p0), np.arange(100))
    assert np.array_equal(p0, rng.permutation(100, epoch=0))
    assert not np.array_equal(p0, rng.permutation(100, epoch=1))
    assert not np.array_equal(p0, SamplerRng(6).permutation(100, epoch=0))


def test_bad_choose_policy_rejected():
    with pytest.raises(ParameterError):
        SamplerRng(0, choose="sorted")
