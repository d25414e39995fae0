import numpy as np
from hypothesis import given, strategies as st

from qjcalorimeter.streams import CounterRNG, INIT, JUMP, mix64, trajectory_keys


def test_splitmix64_reference_output():
    # first output of SplitMix64 seeded with 0
    assert int(mix64(np.uint64(0x9E3779B97F4A7C15))) == 0xE220A8397B1DCDAF


def test_keys_independent_of_batching():
    whole = trajectory_keys(2015, 0, 100)
    parts = np.concatenate([trajectory_keys(2015, s, 10) for s in range(0, 100, 10)])
    assert np.array_equal(whole, parts)
    assert len(set(whole.tolist())) == 100


def test_substreams_differ():
    a = [CounterRNG(7, 3, INIT).random() for _ in range(5)]
    b = [CounterRNG(7, 3, JUMP).random() for _ in range(5)]
    assert a != b


def test_uniform_moments():
    r = CounterRNG(1, 0)
    u = np.array([r.random() for _ in range(50_000)])
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 5 * np.sqrt(1 / 12 / u.size)
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 5 / np.sqrt(u.size)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40))
def test_counter_rng_is_reproducible(seed, index):
    x = CounterRNG(seed, index)
    y = CounterRNG(seed, index)
    assert [x.random() for _ in range(3)] == [y.random() for _ in range(3)]
