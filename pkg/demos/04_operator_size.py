"""
Operator size at finite chemical potential
==========================================

Exact evolution of c_0 under a random q=4 SYK Hamiltonian on six sites.
The size distribution stays on odd sizes and spreads more slowly when the
chemical potential is large.
"""
import numpy as np

from u1scramble.opsize import (MuEnsemble, annihilation, block_bound_report, build_syk_hamiltonian,
                               heisenberg_evolve, otoc_exact_and_sumrule, size_distribution, Spectrum)

h = build_syk_hamiltonian(6, 4, 1.0, 11)
spec = Spectrum.of(h)
c0 = annihilation(6, 0)
for mu in (0.0, 4.0):
    ens = MuEnsemble(mu, 6)
    print(f"mu={mu}")
    for t in (0.0, 1.0, 3.0):
        p = size_distribution(heisenberg_evolve(c0, spec, t), ens).probabilities
        print(f"  t={t}: P_s =", np.round(p, 3), " mean size", round(float(np.dot(np.arange(p.size), p)), 3))

# %%
# The OTOC sum is bounded by the mean size.
rep = otoc_exact_and_sumrule(spec, 0, 2.0, MuEnsemble(1.0, 6))
print("sum C =", round(rep["sum_C"], 4), " size =", round(rep["size"], 4))

# %%
# Growing from size 1 to size 3 is suppressed at large |mu|.
for e in block_bound_report(h, 3, 1, [0.0, 2.0, 4.0])["entries"]:
    print(f"mu={e['mu']}: norm {e['norm']:.4f}  bound {e['bound']:.4f}")
