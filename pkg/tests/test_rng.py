import numpy as np
import pytest
from hypothesis import given, strategies as st

from semisample.errors import InputError
from semisample.rng import DetRng, fnv1a64, stream_key


def test_same_key_same_stream():
    a = DetRng.from_key(7, "frame", 3)
    b = DetRng.from_key(7, "frame", 3)
    assert [a.next_u64() for _ in range(16)] == [b.next_u64() for _ in range(16)]


def test_different_keys_diverge():
    a = DetRng.from_key(7, "frame", 3)
    b = DetRng.from_key(7, "frame", 4)
    assert [a.next_u64() for _ in range(4)] != [b.next_u64() for _ in range(4)]


def test_known_values_frozen():
    # pinned so any change to the stream derivation or generator is loud;
    # the script bindings reproduce these exact values
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"123|frame_0007|2") == 0xB5D3AB1B5E0A09F0
    assert stream_key(123, "frame_0007", 2) == "123|frame_0007|2"
    r = DetRng.from_key(123, "frame_0007", 2)
    assert [r.next_u64() for _ in range(3)] == [
        421431671288358323,
        14649181281855182611,
        7717772226521088345,
    ]
    assert DetRng.from_key(0).random() == pytest.approx(0.18737401942865495, abs=0)


def test_random_range_and_mean():
    r = DetRng.from_key(42)
    xs = [r.random() for _ in range(20000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert abs(np.mean(xs) - 0.5) < 0.01


def test_randbelow_bounds():
    r = DetRng.from_key(1)
    for n in (1, 2, 7, 100):
        for _ in range(200):
            assert 0 <= r.randbelow(n) < n
    with pytest.raises(InputError):
        r.randbelow(0)


@given(st.lists(st.integers(), max_size=30), st.integers(min_value=0, max_value=2**31))
def test_shuffle_is_permutation(items, seed):
    r = DetRng.from_key(seed)
    shuffled = list(items)
    r.shuffle(shuffled)
    assert sorted(shuffled) == sorted(items)


@given(
    st.integers(min_value=0, max_value=50),
    st.integers(min_value=0, max_value=60),
    st.integers(min_value=0, max_value=2**31),
)
def test_sample_indices_distinct_and_bounded(n, k, seed):
    r = DetRng.from_key(seed)
    picks = r.sample_indices(n, k)
    assert len(picks) == min(n, k)
    assert len(set(picks)) == len(picks)
    assert all(0 <= p < n for p in picks)


def test_normal_moments():
    r = DetRng.from_key(9)
    xs = [r.normal(2.0, 0.5) for _ in range(20000)]
    assert abs(np.mean(xs) - 2.0) < 0.02
    assert abs(np.std(xs) - 0.5) < 0.02


def test_poisson_moments_and_zero():
    r = DetRng.from_key(10)
    xs = [r.poisson(2.5) for _ in range(20000)]
    assert abs(np.mean(xs) - 2.5) < 0.1
    assert r.poisson(0) == 0
    with pytest.raises(InputError):
        r.poisson(-1.0)
