"""
From spheres to a voxel morphology
==================================

The union of spheres is only the smooth part of the film.  Three small
corrections follow: little ZnO clusters next to the surface, thinning of
the outer shells, and polymer holes inside thick ZnO domains.
"""

# %%
import numpy as np

from nanomorph import grid, micro
from nanomorph.config import load_preset
from nanomorph.pipeline import simulate_morphology

cfg = load_preset("57nm").set("window.nx", 150).set("window.ny", 150)
m = simulate_morphology(cfg, seed=5, details=True)
print("macro volume fraction", round(grid.volume_fraction(m.macro), 4))
print("final volume fraction", round(grid.volume_fraction(m.final), 4))

# %%
# Where did the voxels go?  The details dictionary keeps every stage.
d = m.details
print("outer clusters added", int(d["outer_only"].sum()), "voxels")
print("boundary voxels removed", int(d["removed"].sum()))
holes = d["xi_2prime"] & ~m.final
print("interior holes carved", int(holes.sum()))
print("share removed per shell",
      micro.shell_removal_fractions(m.macro, d["removed"]).round(3))

# %%
# Hole model: Matérn II points with hard-core distance 2r.
ip = cfg.interior()
print("hole radius", ip.r, "hard core", ip.r_h)
print("retained intensity", ip.lambda_h, "primary intensity", round(ip.primary_intensity, 6))

# %%
# The estimators run the other way.  Treat the macro grid as the smoothed
# film and the final grid as the observation.
op_hat = micro.estimate_outer(m.final, m.macro)
for lo, hi, lam in op_hat.classes:
    print(f"outer class [{lo:.0f},{hi:.0f}): {lam:.2e}")

# %%
# Percolation through the layer.
print("connected fraction", round(grid.connected_fraction(m.final), 3))
print("monotone connected fraction", round(grid.monotone_connected_fraction(m.final), 3))
