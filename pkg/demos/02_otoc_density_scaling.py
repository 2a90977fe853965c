"""
OTOC growth and its density dependence
======================================

Flip one bit, run both copies through the same circuit and count where they
differ.  Below saturation the count grows exponentially at a rate that
shrinks with the density.  Runs in about a minute.
"""
from u1scramble import ChargeSector, otoc_curve
from u1scramble.analysis import fit_exponential_rate, fit_powerlaw_exponent
from u1scramble.reproduce import otoc_horizon, otoc_saturation

N = 2000
rates = []
for nbar in (0.04, 0.08, 0.16):
    sector = ChargeSector.from_density(N, nbar)
    curve = otoc_curve(sector, None, 3, 0.5, otoc_horizon(3, nbar, N), 200, 7,
                       include_diagonal=True)
    fit = fit_exponential_rate(curve, mode="growth", saturation=otoc_saturation(nbar))
    rates.append((nbar, fit.value, fit.uncertainty))
    print(f"nbar={nbar:.2f}  lambda={fit.value:.4f} +- {fit.uncertainty:.4f}  window={fit.window}")

# %%
# For k=3 the rate is roughly linear in the density.
print("exponent:", round(fit_powerlaw_exponent(rates).value, 3))
