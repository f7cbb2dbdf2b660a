"""
Exciton quenching
=================

Excitons are created uniformly in the polymer, diffuse, and die after a
lifetime tau unless they reach ZnO first.  The steady state follows from a
screened Poisson equation; the quenching efficiency is one minus the mean
density relative to the interface-free value.
"""

# %%
import numpy as np

from nanomorph import physics
from nanomorph.config import load_preset
from nanomorph.pipeline import simulate_morphology

dp = physics.DiffusionParams()
print("diffusion length", round(dp.diffusion_length_nm, 3), "nm =",
      round(dp.diffusion_length_nm / dp.voxel_size, 2), "voxels")

# %%
# A polymer slab between two ZnO planes has a closed form.
for width in (0.5, 1.0, 2.0, 4.0):
    n = int(round(width * 40))
    m = np.zeros((n, 2, 2), bool)
    m[0] = True
    f = physics.solve_exciton_field(
        m, physics.DiffusionParams(voxel_size=dp.diffusion_length_nm / 40, tol=1e-7,
                                   max_iters=100_000))
    exact = np.tanh(width / 2) / (width / 2)
    print(f"slab {width} L_D: eta {physics.quenching_efficiency(f):.4f}, closed form {exact:.4f}")

# %%
# A simulated 57 nm film at full window size; small windows hold too few
# clusters to give a representative volume fraction.
cfg = load_preset("57nm")
film = simulate_morphology(cfg, seed=1).final
field = physics.solve_exciton_field(film, cfg.diffusion())
print("iterations", field.iterations, "residual", f"{field.residual:.2e}")
print("quenching efficiency", round(physics.quenching_efficiency(field), 4))
q = physics.local_quenching_map(field)
print("local quenching, polymer quartiles", np.nanpercentile(q, [25, 50, 75]).round(3))
