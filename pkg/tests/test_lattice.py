import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from u1scramble.lattice import (
    BitState,
    ChargeSector,
    RngStream,
    as_stream,
    flip_bit,
    sample_sector_state,
    sector_dimension,
)


def test_sector_dimension_small():
    assert sector_dimension(4, 2) == pytest.approx(math.log(6), abs=1e-15)
    assert sector_dimension(7, 0) == 0.0
    assert sector_dimension(7, 7) == 0.0


def test_sector_dimension_large_matches_lgamma():
    n, k = 20000, 2000
    value = sector_dimension(n, k)
    ref = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    assert math.isfinite(value)
    assert value == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("n_up", [-1, 5])
def test_sector_dimension_rejects_out_of_range(n_up):
    with pytest.raises(ValueError):
        sector_dimension(4, n_up)


def test_bitstate_roundtrip_and_access():
    s = BitState.from_bits("0110100111")
    assert str(s) == "0110100111"
    assert s.n_sites == 10 and len(s) == 10
    assert [s[i] for i in range(10)] == [0, 1, 1, 0, 1, 0, 0, 1, 1, 1]
    assert s.charge == 6
    with pytest.raises(IndexError):
        s[10]


def test_bitstate_rejects_bad_bits():
    with pytest.raises(ValueError):
        BitState.from_bits([0, 2, 1])
    with pytest.raises(ValueError):
        BitState.from_bits([])


def test_flip_bit_examples():
    assert str(flip_bit(BitState.from_bits("0000"), 1)) == "0100"
    with pytest.raises(IndexError):
        flip_bit(BitState.from_bits("0000"), 4)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=70), st.data())
def test_flip_bit_involution_and_charge(bits, data):
    s = BitState.from_bits(bits)
    i = data.draw(st.integers(0, len(bits) - 1))
    t = flip_bit(s, i)
    assert flip_bit(t, i) == s
    assert abs(t.charge - s.charge) == 1
    assert all(t[j] == s[j] for j in range(len(bits)) if j != i)


def test_charge_sector_density_conventions():
    up = ChargeSector(10, 3)
    down = ChargeSector(10, 3, "down")
    assert up.density == pytest.approx(0.3)
    assert down.density == pytest.approx(0.7)
    assert ChargeSector.from_density(1000, 0.1, "down").n_down == 100
    with pytest.raises(ValueError):
        ChargeSector(4, 5)


def test_sampling_trivial_sectors():
    assert str(sample_sector_state(ChargeSector(4, 0), 1)) == "0000"
    assert str(sample_sector_state(ChargeSector(3, 3), 1)) == "111"


@given(st.integers(1, 300), st.data(), st.integers(0, 2**32))
@settings(max_examples=50)
def test_sampled_state_has_sector_charge(n, data, seed):
    n_up = data.draw(st.integers(0, n))
    s = sample_sector_state(ChargeSector(n, n_up), RngStream(seed, ("x",)))
    assert s.charge == n_up and s.n_sites == n


def test_sampling_is_uniform_chi_square():
    # frequency test against the 20 states of the (6, 3) sector
    sector = ChargeSector(6, 3)
    states = ["".join(map(str, b)) for b in itertools.product([0, 1], repeat=6) if sum(b) == 3]
    index = {s: a for a, s in enumerate(states)}
    counts = np.zeros(len(states))
    root = RngStream(99, ("uniform",))
    for m in range(20000):
        counts[index[str(sample_sector_state(sector, root.child(m)))]] += 1
    p = stats.chisquare(counts).pvalue
    assert p > 0.001


def test_stream_reproducible_and_distinct():
    a = RngStream(5, ("traj", 3)).generator().random(8)
    b = RngStream(5, ("traj", 3)).generator().random(8)
    c = RngStream(5, ("traj", 4)).generator().random(8)
    d = RngStream(6, ("traj", 3)).generator().random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_distinct_streams_uncorrelated():
    x = RngStream(1, ("a",)).generator().random(20000)
    y = RngStream(1, ("b",)).generator().random(20000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.03


def test_stream_key_validation():
    assert RngStream(1).child("traj", 2).key == ("traj", 2)
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(ValueError):
        RngStream(1, (-3,))
    with pytest.raises(TypeError):
        RngStream(1, (1.5,))
    assert as_stream(7) == RngStream(7)
    with pytest.raises(TypeError):
        as_stream("7")
