"""
Fitting the macro model by minimum contrast
===========================================

Simulate a film at known parameters, then search a small lattice for the
parameters whose simulations best match its summary statistics.  All
vertices see the same random streams, so objective differences come from
the parameters rather than from noise.
"""

# %%
import numpy as np

from nanomorph import stats
from nanomorph.fit import LatticeSpec, Weights, minimum_contrast_search, simulate_macro
from nanomorph.marks import GammaMarkParams
from nanomorph.seeding import substream

gp = GammaMarkParams(1.26, 0.93)
lam = 5.15e-3
window = (100, 100, 30)
truth = (1e-3, 24.0, 8.0, 0.9)

mask, _ = simulate_macro(truth, lam, gp, window, substream(0, "target"))
target = stats.summarize(mask, lambda_hat=lam)
print("target volume fraction", round(target.v, 4), "connected", round(target.v_conn, 4))

# %%
lattice = LatticeSpec.around(truth, 0.5, reps=2)
print(len(lattice.vertices()), "lattice vertices")
res = minimum_contrast_search(lattice, target, gp, Weights(), window, seed=0)
print(res.report())

# %%
# The five best vertices.
table = sorted(res.table, key=lambda row: row[-1])[:5]
for row in table:
    print(np.round(row, 5))
