"""U(1)-conserving quantum-automaton gates and circuits.

The k-site gate ``U_k`` acts on an ordered site tuple: if the middle site
(position ``(k-1)//2``, zero-based) is occupied and the other ``k-1`` sites
hold equal numbers of zeros and ones, those ``k-1`` sites are all flipped.
Every other pattern is left alone, so the gate is a charge-conserving
involutive permutation of basis states.

Two geometries are supported:

* ``AllToAll(n)``: each step partitions a fresh random permutation of the
  sites into ``n // k`` disjoint k-tuples.
* ``Chain(L)``: each step is one period of ``k`` brickwork layers; layer
  ``l`` places windows of ``k`` contiguous sites starting at ``l + m*k``.

Each tuple / window is active (``U_k``) with probability ``f``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import _kernels
from .lattice import BitState, RngStream, as_stream

__all__ = [
    "GateRule",
    "GateEvent",
    "AllToAll",
    "Chain",
    "CircuitRealization",
    "apply_gate",
    "build_schedule",
    "evolve",
]


@dataclass(frozen=True)
class GateRule:
    k: int

    def __post_init__(self):
        if self.k < 3 or self.k % 2 == 0:
            raise ValueError(f"gate width must be odd and >= 3, got {self.k}")

    @property
    def middle(self) -> int:
        return (self.k - 1) // 2

    def apply(self, pattern: Sequence[int]) -> tuple:
        """Image of a local k-bit pattern under ``U_k``."""
        pattern = tuple(int(b) for b in pattern)
        if len(pattern) != self.k:
            raise ValueError(f"pattern must have {self.k} bits")
        h = self.middle
        outer = pattern[:h] + pattern[h + 1:]
        if pattern[h] == 1 and 2 * sum(outer) == self.k - 1:
            return tuple(b if a == h else 1 - b for a, b in enumerate(pattern))
        return pattern


@dataclass(frozen=True)
class GateEvent:
    step: int
    sites: tuple
    active: bool


@dataclass(frozen=True)
class AllToAll:
    n_sites: int

    code = _kernels.ALL_TO_ALL


@dataclass(frozen=True)
class Chain:
    length: int
    periodic: bool = True

    @property
    def n_sites(self) -> int:
        return self.length

    @property
    def code(self) -> int:
        return _kernels.CHAIN if self.periodic else _kernels.OPEN_CHAIN


Geometry = Union[AllToAll, Chain]


def _check_sites(sites: Sequence[int], n_sites: int) -> tuple:
    sites = tuple(int(x) for x in sites)
    GateRule(len(sites))
    if len(set(sites)) != len(sites):
        raise ValueError(f"gate sites must be distinct, got {sites}")
    for x in sites:
        if not 0 <= x < n_sites:
            raise IndexError(f"site {x} out of range for {n_sites} sites")
    return sites


def apply_gate(state: BitState, sites: Sequence[int]) -> BitState:
    """Apply ``U_k`` (k = len(sites)) to ``state`` on the ordered tuple ``sites``."""
    sites = _check_sites(sites, state.n_sites)
    bits = state.bits
    _kernels.apply_gate(bits, np.asarray(sites, dtype=np.int64), len(sites))
    return BitState(np.packbits(bits), state.n_sites)


@dataclass(frozen=True)
class CircuitRealization:
    """A random circuit fully fixed by ``(geometry, k, f, stream)``.

    Step ``t`` uses a fixed block of the stream's Philox counter range, so
    any step can be regenerated on its own without replaying earlier ones.
    """

    geometry: Geometry
    k: int
    f: float
    stream: RngStream
    n_steps: int

    def __post_init__(self):
        GateRule(self.k)
        if not 0.0 <= self.f <= 1.0:
            raise ValueError("gate probability f must lie in [0, 1]")
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.geometry.n_sites < self.k:
            raise ValueError(
                f"geometry with {self.geometry.n_sites} sites is too small for k={self.k}"
            )

    @property
    def n_sites(self) -> int:
        return self.geometry.n_sites

    @property
    def draws_per_step(self) -> int:
        return _kernels.draws_per_step(self.geometry.code, self.n_sites, self.k)

    @property
    def slots_per_step(self) -> int:
        return _kernels.active_len(self.geometry.code, self.n_sites, self.k)

    def generator_at(self, step: int) -> np.random.Generator:
        bitgen = self.stream.bit_generator()
        if step:
            bitgen.advance(step * (self.draws_per_step // 4))
        return np.random.Generator(bitgen)

    def step_arrays(self, step: int):
        """``(tuples, active)`` arrays for one step, in application order."""
        if not 0 <= step < self.n_steps:
            raise IndexError(f"step {step} outside schedule of {self.n_steps} steps")
        return _kernels.step_arrays(
            self.geometry.code, self.generator_at(step), self.n_sites, self.k,
            self.f, self.draws_per_step, self.slots_per_step,
        )

    def step_events(self, step: int) -> list:
        tuples, active = self.step_arrays(step)
        return [
            GateEvent(step, tuple(int(x) for x in row), bool(a))
            for row, a in zip(tuples, active)
        ]

    @property
    def schedule(self) -> list:
        return [self.step_events(t) for t in range(self.n_steps)]


def build_schedule(geometry: Geometry, k: int, f: float, n_steps: int, rng) -> CircuitRealization:
    """Random circuit realization for ``geometry``; see the module docstring."""
    if isinstance(geometry, AllToAll) and geometry.n_sites < k:
        raise ValueError(f"all-to-all geometry needs N >= k (N={geometry.n_sites}, k={k})")
    if isinstance(geometry, Chain) and geometry.length < k:
        raise ValueError(f"chain needs L >= k (L={geometry.length}, k={k})")
    return CircuitRealization(geometry, k, float(f), as_stream(rng), int(n_steps))


def evolve(state: BitState, circuit: CircuitRealization, t: int, direction: str = "forward") -> BitState:
    """Evolve ``state`` through the first ``t`` steps of ``circuit``.

    ``direction="reverse"`` applies the inverse, i.e. steps ``t-1, ..., 0`` with
    the slots of each step in reverse order.
    """
    if state.n_sites != circuit.n_sites:
        raise ValueError("state and circuit have different numbers of sites")
    if not 0 <= t <= circuit.n_steps:
        raise ValueError(f"t={t} exceeds schedule length {circuit.n_steps}")
    bits = state.bits
    if direction == "forward":
        _kernels.evolve_forward(
            circuit.geometry.code, circuit.generator_at(0), bits, circuit.n_sites,
            circuit.k, circuit.f, t, circuit.draws_per_step, circuit.slots_per_step,
        )
    elif direction == "reverse":
        for step in range(t - 1, -1, -1):
            tuples, active = circuit.step_arrays(step)
            for slot in range(len(active) - 1, -1, -1):
                if active[slot]:
                    _kernels.apply_gate(bits, tuples[slot], circuit.k)
    else:
        raise ValueError("direction must be 'forward' or 'reverse'")
    return BitState(np.packbits(bits), state.n_sites)
