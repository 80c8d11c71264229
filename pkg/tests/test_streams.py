from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinetic_mc.streams import (
    RandomStream,
    child_seed,
    derive_stream,
    partner_from_uniform,
    philox4x32,
    sample_bernoulli,
    sample_partner,
    sample_unit_sphere,
    uniform_slots,
)

M32 = 0xFFFFFFFF


def _philox_scalar(ctr, key):
    """Straight-line scalar Philox4x32-10 used as an independent oracle."""
    c = list(ctr)
    k0, k1 = key
    for r in range(10):
        if r:
            k0 = (k0 + 0x9E3779B9) & M32
            k1 = (k1 + 0xBB67AE85) & M32
        p0 = 0xD2511F53 * c[0]
        p1 = 0xCD9E8D57 * c[2]
        c = [((p1 >> 32) ^ c[1] ^ k0) & M32, p1 & M32, ((p0 >> 32) ^ c[3] ^ k1) & M32, p0 & M32]
    return c


@pytest.mark.parametrize(
    "ctr, key, expected",
    [
        ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        ((M32,) * 4, (M32, M32), (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
        (
            (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
            (0xA4093822, 0x299F31D0),
            (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
        ),
    ],
)
def test_philox_known_answers(ctr, key, expected):
    assert tuple(int(w) for w in philox4x32(ctr, key)) == expected
    assert tuple(_philox_scalar(ctr, key)) == expected


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, M32), min_size=4, max_size=4), st.lists(st.integers(0, M32), min_size=2, max_size=2))
def test_vectorized_philox_matches_scalar(ctr, key):
    assert [int(w) for w in philox4x32(ctr, key)] == _philox_scalar(ctr, key)


def test_stream_is_pure_function_of_address():
    a = derive_stream(7, 3, 11).uniform(10)
    b = derive_stream(7, 3, 11).uniform(10)
    assert np.array_equal(a, b)
    s = derive_stream(7, 3, 11)
    s.skip(4)
    assert np.array_equal(s.uniform(6), a[4:])


def test_slot_access_matches_sequential_stream():
    ids = np.array([1, 5, 9])
    u = uniform_slots(42, ids, 6, [0, 3, 4, 7])
    for row, pid in enumerate(ids):
        seq = derive_stream(42, int(pid), 6).uniform(8)
        assert np.array_equal(u[row], seq[[0, 3, 4, 7]])


def test_distinct_keys_give_distinct_draws():
    base = derive_stream(1, 1, 1).uniform(4)
    for args in [(2, 1, 1), (1, 2, 1), (1, 1, 2)]:
        assert not np.array_equal(base, derive_stream(*args).uniform(4))


def test_fork_copies_cursor():
    s = RandomStream(5, 1, 1)
    s.uniform(3)
    f = s.fork()
    assert f.key == s.key
    assert s.uniform() == f.uniform()


def test_uniform_range():
    u = derive_stream(3, 0, 0).uniform(100_000)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_invalid_seed_and_ids():
    with pytest.raises(ValueError):
        RandomStream(-1, 0, 0)
    with pytest.raises(ValueError):
        RandomStream(2**64, 0, 0)
    with pytest.raises(ValueError):
        RandomStream(0, -1, 0)


def test_bernoulli_frequency():
    bits = sample_bernoulli(derive_stream(11, 0, 0), 0.3, size=1_000_000)
    assert abs(bits.mean() - 0.3) < 0.002


def test_bernoulli_extremes_and_errors():
    s = derive_stream(1, 0, 0)
    assert sample_bernoulli(s, 0.0, 1000).sum() == 0
    assert sample_bernoulli(s, 1.0, 1000).sum() == 1000
    with pytest.raises(ValueError):
        sample_bernoulli(s, 1.5)


def test_partner_frequencies():
    _, j = sample_partner(derive_stream(13, 0, 0), 5, size=1_000_000)
    freq = np.bincount(j, minlength=6)[1:] / j.size
    assert j.min() >= 1 and j.max() <= 5
    assert np.all(np.abs(freq - 0.2) < 0.0016)


def test_partner_rounding_edge():
    _, j = partner_from_uniform(np.array([0.0, np.nextafter(1.0, 0.0)]), 3)
    assert j.tolist() == [1, 3]
    alpha, j = partner_from_uniform(0.5, 4)
    assert alpha == 2.0 and int(j) == 3


def test_sphere_moments():
    e = sample_unit_sphere(derive_stream(17, 0, 0), size=1_000_000)
    assert np.allclose(np.linalg.norm(e, axis=1), 1.0, atol=1e-12)
    assert np.all(np.abs(e.mean(axis=0)) < 0.0024)
    assert abs(np.mean(e[:, 2] ** 2) - 1.0 / 3.0) < 0.0012


def test_neighbouring_streams_uncorrelated():
    a = uniform_slots(19, np.arange(1, 100_001), 0, [0])[:, 0]
    b = uniform_slots(19, np.arange(1, 100_001), 1, [0])[:, 0]
    c = uniform_slots(19, np.arange(1, 100_001), 0, [1])[:, 0]
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.013
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.013
    assert abs(np.corrcoef(a[:-1], a[1:])[0, 1]) < 0.013


def test_child_seed_deterministic_and_distinct():
    assert child_seed(1, 2, 3) == child_seed(1, 2, 3)
    assert len({child_seed(1, 2, 3), child_seed(1, 3, 2), child_seed(2, 2, 3)}) == 3
    assert 0 <= child_seed(2**64 - 1, 5) < 2**64
