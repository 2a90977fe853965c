"""Operator growth in U(1)-charge-conserving many-body systems.

Subpackages of note: :mod:`~u1scramble.lattice` (states and random streams),
:mod:`~u1scramble.circuit` (automaton circuits), :mod:`~u1scramble.observables`
(Monte Carlo OTOCs), :mod:`~u1scramble.analysis` (fits),
:mod:`~u1scramble.opsize` (exact operator sizes) and :mod:`~u1scramble.syk`
(closed-form SYK results).
"""
from .lattice import BitState, ChargeSector, RngStream, flip_bit, sample_sector_state, sector_dimension
from .circuit import AllToAll, Chain, CircuitRealization, GateEvent, GateRule, apply_gate, build_schedule, evolve
from .observables import CurveEstimate, Profile, autocorr_curve, otoc_curve, otoc_profile, otoc_sample

__version__ = "0.1.0"
