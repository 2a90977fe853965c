"""
Closed-form scrambling rates
============================

Regular and Brownian SYK rates as functions of density.  The Brownian
exponent is twice the regular one.
"""
import numpy as np

from u1scramble import syk

q = 4
for nbar in (0.5, 0.2, 0.05, 0.01):
    mu = syk.mu_from_nbar(nbar)
    reg = syk.lyapunov(syk.SykParams("regular", q, mu=mu))
    br = syk.lyapunov(syk.SykParams("brownian", q, mu=mu))
    print(f"nbar={nbar:<5} regular {reg:.5f}  brownian {br:.5f}")

# %%
x = np.array([1e-3, 2e-3])
for variant in ("regular", "brownian"):
    lam = [syk.lyapunov(syk.SykParams(variant, q, mu=syk.mu_from_nbar(v))) for v in x]
    print(variant, "slope:", round(float(np.log(lam[1] / lam[0]) / np.log(2)), 3))

# %%
p = syk.SykParams("brownian", q, b=0.3)
print("v_B =", round(syk.butterfly(p)[1], 5))
print(syk.quadrature_check(syk.SykParams("regular", q)))
