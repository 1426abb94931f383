import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perc.config import (Configuration, GuardError, SeedSpec, as_seed, enumerate_all, occupancy_sequence,
                         prefix_configuration, sample, sample_bits)
from perc.lattice import Kind, LatticeSpec
from perc.rng import BERNOULLI_DOMAIN, element_u64, philox4x64, threshold_for

BOND = Kind.SQUARE_BOND
TRI = Kind.TRIANGULAR_SITE


def test_philox_matches_numpy():
    # numpy increments the counter before its first block
    for k0, stream, block in [(0, 0, 1), (7, 3, 2), (2 ** 63 + 5, 2 ** 40, 9)]:
        ref = np.random.Philox(key=np.array([k0, 1], dtype=np.uint64),
                               counter=np.array([block - 1, stream, 0, 0], dtype=np.uint64)).random_raw(4)
        ours = philox4x64(np.uint64(block), np.uint64(stream), np.uint64(0), np.uint64(0),
                          np.uint64(k0), np.uint64(1))
        assert [int(x) for x in ours] == [int(x) for x in ref]


def test_bits_are_random_access():
    spec = LatticeSpec(BOND, 5)
    seed = SeedSpec(42, 17)
    thr, always = threshold_for(0.4)
    bits = sample_bits(spec, 0.4, seed)
    for e in range(spec.element_count):
        u = element_u64(np.uint64(42), np.uint64(BERNOULLI_DOMAIN), np.uint64(17), e)
        assert bits[e] == (u < thr)


def test_sample_extremes():
    spec = LatticeSpec(BOND, 4)
    assert sample(spec, 0.0, 1).occupied_count() == 0
    assert sample(spec, 1.0, 1).occupied_count() == spec.element_count
    with pytest.raises(ValueError):
        sample(spec, 1.5, 1)
    with pytest.raises(ValueError):
        sample(spec, -0.1, 1)


def test_sample_is_deterministic():
    spec = LatticeSpec(TRI, 6)
    a = sample(spec, 0.5, SeedSpec(3, 9))
    b = sample(spec, 0.5, SeedSpec(3, 9))
    c = sample(spec, 0.5, SeedSpec(3, 10))
    assert a == b and a != c


def test_occupied_fraction_binomial():
    # 10^6 configurations of SquareBond n=64 at p=1/2
    spec = LatticeSpec(BOND, 64)
    E = spec.element_count
    reps = 10 ** 6
    from perc.observables import _threshold
    thr, always = _threshold(0.5)
    total = _count_occupied(E, reps, thr)
    frac = total / (E * reps)
    sigma = math.sqrt(0.25 / E) / math.sqrt(reps)
    assert abs(frac - 0.5) < 4 * sigma


def _count_occupied(E, reps, thr):
    import numba as nb
    from perc.rng import fill_bits

    @nb.njit(cache=False, nogil=True)
    def run(E, reps, thr):
        bits = np.empty(E, dtype=np.uint8)
        total = 0
        for i in range(reps):
            fill_bits(bits, np.uint64(11), np.uint64(i), thr, False)
            total += bits.sum()
        return total

    return int(run(E, reps, thr))


def test_stream_lag_correlation():
    spec = LatticeSpec(BOND, 8)
    counts = np.array([sample_bits(spec, 0.5, SeedSpec(5, i)).sum() for i in range(4000)], dtype=float)
    x = counts - counts.mean()
    r = float((x[:-1] * x[1:]).sum() / (x * x).sum())
    assert abs(r) < 4 / math.sqrt(counts.size)


@pytest.mark.parametrize("spec, count", [(LatticeSpec(TRI, 1), 512), (LatticeSpec(BOND, 1), 4096),
                                         (LatticeSpec.torus(BOND, 3), 262144)])
def test_enumerate_all_counts(spec, count):
    seen = 0
    for i, c in enumerate(enumerate_all(spec)):
        if i < 3 or i == count - 1:
            assert c.to_int() == i
        seen += 1
    assert seen == count


def test_enumerate_guard():
    with pytest.raises(GuardError):
        next(enumerate_all(LatticeSpec(BOND, 2)))


@given(st.integers(0, 2 ** 40), st.integers(0, 2 ** 30))
def test_occupancy_sequence_is_permutation(master, stream):
    spec = LatticeSpec(BOND, 1)
    order = occupancy_sequence(spec, SeedSpec(master, stream))
    assert sorted(order.tolist()) == list(range(spec.element_count))
    for m in (0, 5, spec.element_count):
        assert prefix_configuration(spec, order, m).occupied_count() == m


def test_occupancy_first_element_uniform():
    spec = LatticeSpec(BOND, 1)
    N = 10 ** 5
    firsts = np.array([occupancy_sequence(spec, SeedSpec(2024, s))[0] for s in range(N)])
    freq = np.bincount(firsts, minlength=12) / N
    sigma = math.sqrt((1 / 12) * (11 / 12) / N)
    assert np.all(np.abs(freq - 1 / 12) < 4 * sigma)


@given(st.integers(0, 2 ** 12 - 1), st.integers(0, 11))
def test_flip_twice_restores(pattern, e):
    c = Configuration.from_int(LatticeSpec(BOND, 1), pattern)
    assert c.flipped(e).flipped(e) == c
    assert c.flipped(e)[e] != c[e]


def test_seed_parsing():
    assert as_seed(5) == SeedSpec(5, 0)
    assert as_seed((5, 2)) == SeedSpec(5, 2)
    assert SeedSpec(1, 2).child(3) == SeedSpec(1, 5)
    with pytest.raises(ValueError):
        SeedSpec(-1)
