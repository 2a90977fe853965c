"""
Charge-conserving automaton gates
=================================

A k-site gate looks at its middle site.  When the middle is occupied and the
outer sites are half filled, every outer bit flips; otherwise nothing happens.
"""
import itertools

from u1scramble import AllToAll, BitState, ChargeSector, build_schedule, evolve, sample_sector_state
from u1scramble.circuit import GateRule

# %%
# The k=3 rule has exactly one non-trivial pair of patterns.
rule = GateRule(3)
for bits in itertools.product([0, 1], repeat=3):
    out = rule.apply(bits)
    if out != bits:
        print("".join(map(str, bits)), "->", "".join(map(str, out)))

# %%
# Charge is conserved and every gate is its own inverse, so a circuit can be
# run backwards exactly.
sector = ChargeSector(40, 12)
s = sample_sector_state(sector, 1)
circuit = build_schedule(AllToAll(40), 3, 0.5, 25, 2)
s_t = evolve(s, circuit, 25)
print(s, s.charge)
print(s_t, s_t.charge)
print("reversed back:", evolve(s_t, circuit, 25, "reverse") == s)

# %%
# At low hole density almost no gate fires: the all-zero state is frozen.
print(evolve(BitState.from_bits("0" * 40), circuit, 25))
