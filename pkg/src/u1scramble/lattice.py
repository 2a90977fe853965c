"""Fixed-charge bit configurations and keyed random streams.

A site holds either 0 (empty / down) or 1 (occupied / up).  States are kept
bit-packed; the Monte Carlo kernels unpack them into ``uint8`` arrays.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels

__all__ = [
    "BitState",
    "ChargeSector",
    "RngStream",
    "sector_dimension",
    "sample_sector_state",
    "flip_bit",
]


def _encode_key_part(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream key indices must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported stream key component {part!r}")


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by ``(seed, key)``.

    The key is hashed together with the master seed (``numpy.random.SeedSequence``)
    into the key of a Philox generator, so any number of streams can be derived
    without a shared mutable generator.  Identical ``(seed, key)`` pairs always
    reproduce the same sequence.
    """

    seed: int
    key: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("master seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "key", tuple(self.key))
        for part in self.key:
            _encode_key_part(part)

    def child(self, *parts) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(parts))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            int(self.seed), spawn_key=tuple(_encode_key_part(p) for p in self.key)
        )

    def bit_generator(self) -> np.random.Philox:
        return np.random.Philox(self.seed_sequence())

    def generator(self) -> np.random.Generator:
        return np.random.Generator(self.bit_generator())


def as_stream(rng) -> RngStream:
    """Accept an ``RngStream`` or a bare integer seed."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise TypeError(f"expected RngStream or int seed, got {type(rng).__name__}")


@dataclass(frozen=True)
class BitState:
    """Computational-basis configuration of ``n_sites`` two-level sites."""

    packed: np.ndarray = field(repr=False)
    n_sites: int

    def __post_init__(self):
        if self.n_sites <= 0:
            raise ValueError("n_sites must be positive")
        packed = np.ascontiguousarray(self.packed, dtype=np.uint8)
        if packed.shape != ((self.n_sites + 7) // 8,):
            raise ValueError("packed buffer does not match n_sites")
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str) -> "BitState":
        if isinstance(bits, str):
            bits = [int(ch) for ch in bits]
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("bits must be a non-empty 1D sequence")
        if np.any(arr > 1):
            raise ValueError("bits must be 0 or 1")
        return cls(np.packbits(arr), arr.size)

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, count=self.n_sites)

    @property
    def charge(self) -> int:
        return int(np.unpackbits(self.packed, count=self.n_sites).sum())

    def __len__(self) -> int:
        return self.n_sites

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.n_sites:
            raise IndexError(f"site {i} out of range for {self.n_sites} sites")
        return int((self.packed[i >> 3] >> (7 - (i & 7))) & 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitState):
            return NotImplemented
        return self.n_sites == other.n_sites and bool(
            np.array_equal(self.packed, other.packed)
        )

    def __hash__(self) -> int:
        return hash((self.n_sites, self.packed.tobytes()))

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


@dataclass(frozen=True)
class ChargeSector:
    """Sector of fixed occupation ``n_up`` on ``n_sites`` sites.

    ``convention`` selects which fraction is reported as the density:
    ``"up"`` gives ``n_up / n_sites`` (all-to-all runs) and ``"down"`` gives
    ``(n_sites - n_up) / n_sites`` (chain runs).
    """

    n_sites: int
    n_up: int
    convention: str = "up"

    def __post_init__(self):
        if self.n_sites <= 0:
            raise ValueError("n_sites must be positive")
        if not 0 <= self.n_up <= self.n_sites:
            raise ValueError(f"n_up={self.n_up} outside [0, {self.n_sites}]")
        if self.convention not in ("up", "down"):
            raise ValueError("convention must be 'up' or 'down'")

    @classmethod
    def from_density(cls, n_sites: int, nbar: float, convention: str = "up") -> "ChargeSector":
        count = int(round(nbar * n_sites))
        n_up = count if convention == "up" else n_sites - count
        return cls(n_sites, n_up, convention)

    @property
    def n_down(self) -> int:
        return self.n_sites - self.n_up

    @property
    def density(self) -> float:
        if self.convention == "up":
            return self.n_up / self.n_sites
        return self.n_down / self.n_sites

    @property
    def up_fraction(self) -> float:
        return self.n_up / self.n_sites


def sector_dimension(n_sites: int, n_up: int) -> float:
    """Natural log of the sector dimension ``C(n_sites, n_up)``."""
    if n_sites < 0 or not 0 <= n_up <= n_sites:
        raise ValueError(f"n_up={n_up} outside [0, {n_sites}]")
    if n_sites <= 1000:
        return math.log(math.comb(n_sites, n_up))
    return math.lgamma(n_sites + 1) - math.lgamma(n_up + 1) - math.lgamma(n_sites - n_up + 1)


def sample_sector_state(sector: ChargeSector, rng) -> BitState:
    """Uniform draw from the sector (Fisher-Yates shuffle of a template)."""
    gen = as_stream(rng).generator()
    bits = np.empty(sector.n_sites, dtype=np.uint8)
    _kernels.sample_sector(gen, sector.n_sites, sector.n_up, bits)
    return BitState(np.packbits(bits), sector.n_sites)


def flip_bit(state: BitState, i: int) -> BitState:
    if not 0 <= i < state.n_sites:
        raise IndexError(f"site {i} out of range for {state.n_sites} sites")
    packed = state.packed.copy()
    packed[i >> 3] ^= np.uint8(1 << (7 - (i & 7)))
    return BitState(packed, state.n_sites)
