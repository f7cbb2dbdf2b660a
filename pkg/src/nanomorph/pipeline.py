"""End-to-end morphology simulation from a run configuration."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import grid as _grid
from . import micro as _micro
from .config import RunConfig, ConfigError
from .marks import MarkedPoints, assign_radii
from .pointproc import simulate_stack
from .seeding import substream


@dataclass
class Morphology:
    final: np.ndarray
    macro: np.ndarray
    marked: MarkedPoints
    voxel_size: float = 0.71
    details: dict = field(default_factory=dict, repr=False)

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"final": out / "final.mvg", "macro": out / "macro.mvg",
                 "spheres": out / "spheres.csv"}
        _grid.write_mvg(paths["final"], _grid.VoxelGrid(self.final, self.voxel_size))
        _grid.write_mvg(paths["macro"], _grid.VoxelGrid(self.macro, self.voxel_size))
        self.marked.to_csv(paths["spheres"])
        return paths


def simulate_morphology(config: RunConfig, seed: Optional[int] = None,
                        details: bool = False) -> Morphology:
    """Point stack, marks, sphere union, then (optionally) micro corrections.

    The macro and micro stages draw from separate substreams of the seed,
    so toggling ``micro.enabled`` leaves the macro grid unchanged.
    """
    if not config.has_macro():
        raise ConfigError("simulation needs macro.lambda_c, a, b, p and lambda_d or lambda_hat")
    if not (config.has("macro.k") and config.has("macro.theta")):
        raise ConfigError("simulation needs macro.k and macro.theta")
    seed = config.seed if seed is None else int(seed)
    dims = config.window
    mp, cp, gp = config.matern(), config.chain(), config.gamma()

    rng = substream(seed, "macro")
    stack = simulate_stack(mp, cp, dims, rng, margin=config.get("window.margin"))
    if len(stack) >= gp.m:
        marked = assign_radii(stack, gp, rng)
    else:
        marked = MarkedPoints(np.zeros((0, 3)), np.zeros(0))
    macro = _grid.rasterize_spheres(marked.spheres(), dims)

    info = {}
    if config.micro_enabled:
        out = _micro.apply_micro(macro, config.outer(), config.boundary(), config.interior(),
                                 substream(seed, "micro"), details=details)
        final, info = out if details else (out, {})
    else:
        final = macro.copy()
    return Morphology(final, macro, marked, config.voxel_size, info)
