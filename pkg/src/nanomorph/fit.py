"""Minimum-contrast fitting of the macro-scale model.

The cluster-member intensity is eliminated through the target point
intensity, leaving a grid search over ``(lambda_c, a, b, p)``.  Every
lattice vertex is simulated with the same per-replication random streams
(common random numbers), so objective differences reflect the parameters
rather than sampling noise.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import grid as _grid
from . import stats as _stats
from .marks import GammaMarkParams, assign_radii
from .pointproc import ChainParams, MaternParams, derive_birth_rate, simulate_stack
from .seeding import substream

__all__ = [
    "Weights", "LatticeSpec", "FitResult", "derive_lambda_d", "derive_birth_rate",
    "simulate_macro", "contrast", "contrast_terms", "minimum_contrast_search",
]


def derive_lambda_d(lambda_hat: float, lambda_c: float, a: float, b: float) -> float:
    """Member intensity matching the total intensity ``lambda_hat``."""
    if not (lambda_hat > 0 and lambda_c > 0 and a > 0 and b > 0):
        raise ValueError("lambda_hat, lambda_c, a and b must be positive")
    if not a > b:
        raise ValueError("need a > b")
    return lambda_hat / (lambda_c * np.pi * a * b)


@dataclass(frozen=True)
class Weights:
    w_scd: float = 0.25
    w_x: float = 1 / 12
    w_y: float = 1 / 12
    w_z: float = 1 / 12
    w_v: float = 0.25
    w_vprime: float = 0.25

    def __post_init__(self):
        vals = self.as_tuple()
        if min(vals) < 0:
            raise ValueError("weights must be non-negative")
        if abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(vals)!r}")

    def as_tuple(self):
        return (self.w_scd, self.w_x, self.w_y, self.w_z, self.w_v, self.w_vprime)


def _axis_values(spec) -> np.ndarray:
    lo, hi, step = (float(v) for v in spec)
    if lo > hi:
        raise ValueError(f"lattice axis min {lo} exceeds max {hi}")
    if step <= 0:
        raise ValueError("lattice step must be positive")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


@dataclass(frozen=True)
class LatticeSpec:
    """``(min, max, step)`` per parameter; vertices with ``a <= b`` are skipped."""

    lambda_c: Tuple[float, float, float]
    a: Tuple[float, float, float]
    b: Tuple[float, float, float]
    p: Tuple[float, float, float]
    reps: int = 3

    def vertices(self) -> List[Tuple[float, float, float, float]]:
        axes = [_axis_values(s) for s in (self.lambda_c, self.a, self.b, self.p)]
        out = [tuple(float(v) for v in t) for t in itertools.product(*axes)]
        return sorted(t for t in out if t[1] > t[2] and 0 < t[3] < 1 and t[0] > 0)

    @classmethod
    def around(cls, theta, rel_step: float, reps: int = 3) -> "LatticeSpec":
        """3-point-per-axis lattice centred on ``theta`` with relative spacing."""
        axes = []
        for v in theta[:3]:
            axes.append((v * (1 - rel_step), v * (1 + rel_step) * (1 + 1e-12), v * rel_step))
        p = theta[3]
        dp = rel_step * (1 - p)
        axes.append((p - dp, p + dp * (1 + 1e-9), dp))
        return cls(*axes, reps=reps)


@dataclass
class FitResult:
    best: Tuple[float, float, float, float]
    lambda_d: float
    lambda_c_birth: float
    objective: float
    table: List[Tuple[float, float, float, float, float]] = field(repr=False, default_factory=list)

    def write_table(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda_c", "a", "b", "p", "objective"])
            for row in self.table:
                w.writerow([repr(float(v)) for v in row])

    def report(self) -> str:
        lc, a, b, p = self.best
        return (f"lambda_c={lc!r}\na={a!r}\nb={b!r}\np={p!r}\n"
                f"lambda_d={self.lambda_d!r}\nlambda_c_birth={self.lambda_c_birth!r}\n"
                f"objective={self.objective!r}\n")


def read_table(path) -> List[Tuple[float, ...]]:
    with open(path, newline="") as fh:
        return [tuple(float(r[k]) for k in ("lambda_c", "a", "b", "p", "objective"))
                for r in csv.DictReader(fh)]


def simulate_macro(theta, lambda_hat: float, gp: GammaMarkParams, window, rng,
                   displacement: str = "discrete", margin: float = 0.0):
    """Sphere-union macro morphology for ``theta = (lambda_c, a, b, p)``.

    Returns ``(mask, marked_points)``; ``marked_points`` is None when the
    pattern has fewer than ``m`` points.
    """
    lambda_c, a, b, p = theta
    mp = MaternParams(lambda_c, derive_lambda_d(lambda_hat, lambda_c, a, b), a, b)
    cp = ChainParams.for_matern(mp, p, displacement=displacement)
    nx, ny, nz = (int(v) for v in window)
    stack = simulate_stack(mp, cp, (nx, ny, nz), rng, margin=margin)
    if len(stack) < gp.m:
        return np.zeros((nx, ny, nz), dtype=bool), None
    marked = assign_radii(stack, gp, rng)
    return _grid.rasterize_spheres(marked.spheres(), (nx, ny, nz)), marked


def contrast_terms(sim: _stats.SummaryTargets, targets: _stats.SummaryTargets) -> np.ndarray:
    """The six discrepancies in weight order (scd, x, y, z, V, V')."""
    ks = _stats.kolmogorov_distance
    return np.array([
        ks(targets.f_scd, sim.f_scd),
        ks(targets.f_x, sim.f_x),
        ks(targets.f_y, sim.f_y),
        ks(targets.f_z, sim.f_z),
        abs(targets.v - sim.v),
        abs(targets.v_conn - sim.v_conn),
    ])


def average_summaries(summaries: Sequence[_stats.SummaryTargets]) -> _stats.SummaryTargets:
    mean = _stats.EDF.mean
    return _stats.SummaryTargets(
        f_scd=mean([s.f_scd for s in summaries]),
        f_x=mean([s.f_x for s in summaries]),
        f_y=mean([s.f_y for s in summaries]),
        f_z=mean([s.f_z for s in summaries]),
        v=float(np.mean([s.v for s in summaries])),
        v_conn=float(np.mean([s.v_conn for s in summaries])),
    )


def contrast(theta, targets: _stats.SummaryTargets, gp: GammaMarkParams, weights: Weights,
             window, reps: int, seed: int, lambda_hat: Optional[float] = None,
             displacement: str = "discrete") -> float:
    """Weighted contrast between ``targets`` and ``reps`` simulations at ``theta``.

    Replication ``i`` always draws from the stream ``(seed, "contrast", i)``,
    independent of ``theta``.  Returns ``inf`` when a replication produces
    no points.
    """
    lambda_hat = targets.lambda_hat if lambda_hat is None else lambda_hat
    if lambda_hat is None:
        raise ValueError("the target point intensity lambda_hat is required")
    lambda_c, a, b, p = theta
    if not a > b > 0:
        raise ValueError("need a > b > 0")
    sims = []
    for rep in range(reps):
        rng = substream(seed, "contrast", rep)
        mask, marked = simulate_macro(theta, lambda_hat, gp, window, rng, displacement)
        if marked is None or not mask.any():
            return np.inf
        sims.append(_stats.summarize(mask))
    terms = contrast_terms(average_summaries(sims), targets)
    return float(np.dot(weights.as_tuple(), terms))


def minimum_contrast_search(lattice: LatticeSpec, targets: _stats.SummaryTargets,
                            gp: GammaMarkParams, weights: Weights, window, seed: int,
                            lambda_hat: Optional[float] = None, n_jobs: int = 1,
                            cache: Optional[Dict[tuple, float]] = None,
                            displacement: str = "discrete") -> FitResult:
    """Evaluate the contrast on every admissible vertex and return the argmin.

    Ties go to the lexicographically smallest ``(lambda_c, a, b, p)``.
    ``cache`` maps already evaluated vertices to objectives and is updated.
    """
    verts = lattice.vertices()
    if not verts:
        raise ValueError("lattice has no admissible vertex (need a > b, 0 < p < 1)")
    lambda_hat = targets.lambda_hat if lambda_hat is None else lambda_hat
    cache = {} if cache is None else cache
    todo = [v for v in verts if v not in cache]

    def run(v):
        return contrast(v, targets, gp, weights, window, lattice.reps, seed, lambda_hat,
                        displacement)

    if n_jobs != 1 and len(todo) > 1:
        from joblib import Parallel, delayed
        values = Parallel(n_jobs=n_jobs)(delayed(run)(v) for v in todo)
    else:
        values = [run(v) for v in todo]
    cache.update(zip(todo, values))
    objectives = np.array([cache[v] for v in verts])
    best_i = int(np.argmin(objectives))  # first minimum = lexicographic tie-break
    best = verts[best_i]
    table = [(*v, float(o)) for v, o in zip(verts, objectives)]
    return FitResult(
        best=best,
        lambda_d=derive_lambda_d(lambda_hat, best[0], best[1], best[2]),
        lambda_c_birth=derive_birth_rate(best[0], best[3]),
        objective=float(objectives[best_i]),
        table=table,
    )
