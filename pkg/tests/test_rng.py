from collections import Counter

import pytest
from hypothesis import given, strategies as st

from wslatency.rng import RandomStream, derive_seed


def test_same_seed_same_stream():
    a, b = RandomStream(7), RandomStream(7)
    assert [a.randbelow(10) for _ in range(1000)] == [b.randbelow(10) for _ in range(1000)]


def test_different_seeds_differ():
    a, b = RandomStream(7), RandomStream(8)
    assert [a.next_u64() for _ in range(8)] != [b.next_u64() for _ in range(8)]


@given(seed=st.integers(0, 2**64 - 1), consumed=st.integers(0, 700))
def test_restore_from_position(seed, consumed):
    a = RandomStream(seed)
    for _ in range(consumed):
        a.next_u64()
    b = RandomStream.from_state(a.state())
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]


@given(n=st.integers(1, 10**6))
def test_randbelow_range(n):
    rng = RandomStream(n)
    assert all(0 <= rng.randbelow(n) < n for _ in range(20))


def test_randbelow_roughly_uniform():
    rng = RandomStream(3)
    counts = Counter(rng.randbelow(7) for _ in range(70_000))
    chi2 = sum((c - 10_000) ** 2 / 10_000 for c in counts.values())
    assert len(counts) == 7
    assert chi2 < 22.5  # 99.9% quantile, 6 dof


def test_randbelow_rejects_nonpositive():
    with pytest.raises(ValueError):
        RandomStream(0).randbelow(0)


def test_derive_seed_is_stable_and_keyed():
    assert derive_seed(0, 1, 2, 3) == derive_seed(0, 1, 2, 3)
    assert derive_seed(0, 1, 2, 3) != derive_seed(0, 1, 2, 4)
    assert derive_seed(5, "x") == 5 ^ derive_seed(0, "x")
