"""
Operator fronts on a chain
==========================

On a brickwork chain the disturbance spreads ballistically.  Both the
threshold and the collapse fits recover the front speed.
"""
import numpy as np

from u1scramble import ChargeSector, otoc_profile
from u1scramble.analysis import front_velocity
from u1scramble.svg import PlotSpec, emit_plot

L = 400
sector = ChargeSector.from_density(L, 0.2, convention="down")
prof = otoc_profile(sector, 3, 0.5, 400, 200, 3)

# keep a handful of late slices
rows = np.linspace(80, 400, 9).astype(int)
sub = type(prof)(prof.distances, prof.times[rows], prof.values[rows], prof.stderr[rows])
for method in ("threshold", "collapse"):
    fit = front_velocity(sub, method)
    print(f"{method:9s} v = {fit.value:.4f} +- {fit.uncertainty:.4f}")

# %%
sub.to_csv("front_profile.csv")
emit_plot("front_profile.csv", "front_collapse.svg",
          PlotSpec("collapse", velocity=fit.value, x_label="r - v t", y_label="C(r, t)"))
print("wrote front_collapse.svg")
