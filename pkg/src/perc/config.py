"""Configurations, reproducible Bernoulli sampling and exhaustive iteration."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .lattice import LatticeSpec, element_count
from .rng import fill_bits, permutation, threshold_for

ENUMERATION_GUARD = 24
_U64 = 1 << 64


class GuardError(ValueError):
    """Raised when a request would exceed an exhaustive-enumeration guard."""


@dataclass(frozen=True)
class SeedSpec:
    """Master seed plus stream index; one stream per Monte Carlo replicate."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v < _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    def stream(self, offset: int) -> int:
        return (self.stream_index + offset) % _U64

    def child(self, offset: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, self.stream(offset))


def as_seed(seed) -> SeedSpec:
    """Accept a :class:`SeedSpec`, a master seed, or a ``(master_seed, stream_index)`` pair."""
    if isinstance(seed, SeedSpec):
        return seed
    if isinstance(seed, tuple):
        return SeedSpec(int(seed[0]), int(seed[1]))
    return SeedSpec(int(seed), 0)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Occupation bits over the elements of ``spec`` (1 = occupied), stored packed."""

    spec: LatticeSpec
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        nbytes = (element_count(self.spec) + 7) // 8
        if self.bits.dtype != np.uint8 or self.bits.shape != (nbytes,):
            raise ValueError("bits must be a packed uint8 array of the lattice's length")

    @classmethod
    def from_occupied(cls, spec: LatticeSpec, occupied) -> "Configuration":
        occ = np.asarray(occupied, dtype=np.uint8)
        if occ.shape != (element_count(spec),):
            raise ValueError("occupancy vector has the wrong length")
        return cls(spec, np.packbits(occ, bitorder="little"))

    @classmethod
    def from_int(cls, spec: LatticeSpec, pattern: int) -> "Configuration":
        """Bit ``i`` of ``pattern`` is the state of element ``i``."""
        count = element_count(spec)
        raw = int(pattern).to_bytes((count + 7) // 8, "little")
        return cls(spec, np.frombuffer(raw, dtype=np.uint8).copy())

    @classmethod
    def empty(cls, spec: LatticeSpec) -> "Configuration":
        return cls.from_occupied(spec, np.zeros(element_count(spec), dtype=np.uint8))

    @classmethod
    def full(cls, spec: LatticeSpec) -> "Configuration":
        return cls.from_occupied(spec, np.ones(element_count(spec), dtype=np.uint8))

    @property
    def occupied(self) -> np.ndarray:
        """Unpacked ``uint8`` occupation vector (a fresh copy)."""
        return np.unpackbits(self.bits, bitorder="little", count=element_count(self.spec))

    def __getitem__(self, element: int) -> bool:
        return bool((self.bits[element >> 3] >> (element & 7)) & 1)

    def __eq__(self, other):
        return (isinstance(other, Configuration) and self.spec == other.spec
                and np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.spec, self.bits.tobytes()))

    def occupied_count(self) -> int:
        return int(np.unpackbits(self.bits).sum())

    def to_int(self) -> int:
        return int.from_bytes(self.bits.tobytes(), "little")

    def flipped(self, element: int) -> "Configuration":
        bits = self.bits.copy()
        bits[element >> 3] ^= np.uint8(1 << (element & 7))
        return Configuration(self.spec, bits)

    def with_state(self, element: int, state: bool) -> "Configuration":
        if self[element] == bool(state):
            return self
        return self.flipped(element)


def sample_bits(spec: LatticeSpec, p: float, seed) -> np.ndarray:
    seed = as_seed(seed)
    threshold, always = threshold_for(p)
    out = np.empty(element_count(spec), dtype=np.uint8)
    fill_bits(out, np.uint64(seed.master_seed), np.uint64(seed.stream_index), threshold, always)
    return out


def sample(spec: LatticeSpec, p: float, seed) -> Configuration:
    """Each element independently occupied with probability ``p``; pure in ``(spec, p, seed)``."""
    return Configuration.from_occupied(spec, sample_bits(spec, p, seed))


def check_guard(spec: LatticeSpec, guard: int = ENUMERATION_GUARD) -> int:
    count = element_count(spec)
    if count > guard:
        raise GuardError(f"{spec.label()} has {count} elements; exhaustive enumeration is capped at {guard}")
    return count


def enumerate_all(spec: LatticeSpec) -> Iterator[Configuration]:
    """All ``2**E`` configurations in increasing order of their bit pattern."""
    count = check_guard(spec)
    for pattern in range(1 << count):
        yield Configuration.from_int(spec, pattern)


def occupancy_sequence(spec: LatticeSpec, seed) -> np.ndarray:
    """Uniformly random order in which to occupy the elements."""
    seed = as_seed(seed)
    return permutation(element_count(spec), np.uint64(seed.master_seed), np.uint64(seed.stream_index))


def prefix_configuration(spec: LatticeSpec, order: np.ndarray, m: int) -> Configuration:
    occ = np.zeros(element_count(spec), dtype=np.uint8)
    occ[order[:m]] = 1
    return Configuration.from_occupied(spec, occ)
