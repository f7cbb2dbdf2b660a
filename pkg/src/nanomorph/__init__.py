"""Stochastic multi-scale simulation of two-phase polymer/ZnO voxel morphologies."""
from . import config, fit, grid, marks, micro, physics, pointproc, stats
from .config import RunConfig, load_preset
from .pipeline import Morphology, simulate_morphology
from .seeding import substream

__version__ = "0.1.0"
