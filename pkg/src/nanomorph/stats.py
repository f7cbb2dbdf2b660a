"""Structural statistics of point patterns and binary voxel grids."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import grid as _grid

AXES = {"x": 0, "y": 1, "z": 2}


@dataclass
class EDF:
    """Right-continuous step function ``F(t)`` given by jump locations and levels.

    ``values[i]`` is ``F(t)`` for ``breakpoints[i] <= t < breakpoints[i+1]``;
    ``F(t) = 0`` below the first breakpoint.  An EDF without breakpoints is
    the empty EDF (no admissible samples) and evaluates to 0 everywhere.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    n_samples: int = 0

    def __post_init__(self):
        self.breakpoints = np.asarray(self.breakpoints, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.breakpoints.shape != self.values.shape:
            raise ValueError("breakpoints and values differ in length")
        if np.any(np.diff(self.breakpoints) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(self.values) < -1e-12):
            raise ValueError("EDF values must be non-decreasing")
        if self.values.size and (self.values[0] < 0 or self.values[-1] > 1 + 1e-12):
            raise ValueError("EDF values must lie in [0, 1]")

    @property
    def empty(self) -> bool:
        return self.breakpoints.size == 0

    @classmethod
    def from_samples(cls, samples) -> "EDF":
        x = np.asarray(samples, dtype=np.float64).ravel()
        if x.size == 0:
            return cls(np.zeros(0), np.zeros(0), 0)
        uniq, counts = np.unique(x, return_counts=True)
        return cls(uniq, np.cumsum(counts) / x.size, int(x.size))

    @classmethod
    def mean(cls, edfs: Sequence["EDF"]) -> "EDF":
        """Pointwise mean of step functions (empty members count as 0)."""
        edfs = list(edfs)
        if not edfs:
            raise ValueError("no EDFs to average")
        t = np.unique(np.concatenate([e.breakpoints for e in edfs]))
        if t.size == 0:
            return cls(np.zeros(0), np.zeros(0), 0)
        vals = np.mean([e(t) for e in edfs], axis=0)
        return cls(t, vals, sum(e.n_samples for e in edfs))

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.empty:
            return np.zeros_like(t)
        idx = np.searchsorted(self.breakpoints, t, side="right")
        padded = np.concatenate([[0.0], self.values])
        return padded[idx]

    evaluate = __call__

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "F"])
            for t, f in zip(self.breakpoints, self.values):
                w.writerow([repr(float(t)), repr(float(f))])

    @classmethod
    def from_csv(cls, path) -> "EDF":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["t"]) for r in rows], [float(r["F"]) for r in rows])


def kolmogorov_distance(F: EDF, G: EDF) -> float:
    """``sup_t |F(t) - G(t)|`` for two step functions.

    Both are constant between consecutive points of the merged breakpoint
    set, so evaluating there (right values; left limits are the previous
    right values) is exact.
    """
    t = np.union1d(F.breakpoints, G.breakpoints)
    if t.size == 0:
        return 0.0
    return float(np.max(np.abs(F(t) - G(t))))


# ---------------------------------------------------------------------------
# point patterns

def intensity_3d(points, window=None) -> float:
    """Number of points inside ``[0,wx) x [0,wy) x [0,nz)`` per voxel³."""
    pts = np.asarray(getattr(points, "points", points), dtype=np.float64).reshape(-1, 3)
    if window is None:
        window = points.window
    wx, wy, nz = window
    vol = float(wx) * float(wy) * float(nz)
    if vol <= 0:
        raise ValueError("window volume must be positive")
    inside = ((pts[:, 0] >= 0) & (pts[:, 0] < wx) & (pts[:, 1] >= 0) & (pts[:, 1] < wy)
              & (pts[:, 2] >= 0) & (pts[:, 2] < nz))
    return float(inside.sum() / vol)


def pair_correlation_2d(points, window, r_grid, bandwidth: Optional[float] = None):
    """Pair correlation of a planar pattern on the rectangle ``[0,wx) x [0,wy)``.

    Epanechnikov kernel in the pair distance with translation edge
    correction; ``bandwidth`` defaults to ``0.15 / sqrt(lambda_hat)``.
    Returns ``(r, g)``.  ``g`` is NaN where the lag is not admissible
    (``r <= 0`` or ``r >=`` half the shorter window side).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    wx, wy = float(window[0]), float(window[1])
    n = len(pts)
    if n < 2:
        raise ValueError("need at least two points")
    area = wx * wy
    lam = n / area
    h = 0.15 / np.sqrt(lam) if bandwidth is None else float(bandwidth)
    r_grid = np.asarray(r_grid, dtype=np.float64)
    admissible = (r_grid > 0) & (r_grid < min(wx, wy) / 2)
    g = np.full(len(r_grid), np.nan)
    if not admissible.any():
        return r_grid, g
    rmax = r_grid[admissible].max() + h
    pairs = cKDTree(pts).query_pairs(rmax, output_type="ndarray")
    diff = pts[pairs[:, 0]] - pts[pairs[:, 1]]
    d = np.hypot(diff[:, 0], diff[:, 1])
    overlap = (wx - np.abs(diff[:, 0])) * (wy - np.abs(diff[:, 1]))
    order = np.argsort(d)
    d, overlap = d[order], overlap[order]
    lam2 = n * (n - 1) / area ** 2
    for i in np.flatnonzero(admissible):
        r = r_grid[i]
        lo, hi = np.searchsorted(d, [r - h, r + h])
        u = (r - d[lo:hi]) / h
        k = np.where(np.abs(u) < 1, 0.75 * (1 - u * u), 0.0) / h
        # each unordered pair stands for two ordered ones
        g[i] = 2 * np.sum(k / overlap[lo:hi]) / (2 * np.pi * r) / lam2
    return r_grid, g


# ---------------------------------------------------------------------------
# voxel statistics

def chord_lengths(grid, axis) -> np.ndarray:
    """Lengths of maximal foreground runs along ``axis`` not touching the window."""
    mask = _grid.as_mask(grid)
    ax = AXES.get(axis, axis)
    lines = np.moveaxis(mask, ax, -1).reshape(-1, mask.shape[ax])
    n = lines.shape[1]
    padded = np.zeros((lines.shape[0], n + 2), dtype=np.int8)
    padded[:, 1:-1] = lines
    step = np.diff(padded, axis=1)
    _, starts = np.nonzero(step == 1)
    _, ends = np.nonzero(step == -1)
    interior = (starts > 0) & (ends < n)
    return (ends - starts)[interior]


def chord_length_edf(grid, axis) -> EDF:
    return EDF.from_samples(chord_lengths(grid, axis))


def contact_distances(grid) -> np.ndarray:
    mask = _grid.as_mask(grid)
    if mask.all() or not mask.any():
        raise ValueError("spherical contact distances need both phases present")
    return _grid.distance_transform(mask)[~mask]


def spherical_contact_edf(grid) -> EDF:
    """EDF of the distance from each background voxel to the foreground."""
    return EDF.from_samples(contact_distances(grid))


@dataclass
class SummaryTargets:
    f_scd: EDF
    f_x: EDF
    f_y: EDF
    f_z: EDF
    v: float
    v_conn: float
    lambda_hat: Optional[float] = None

    def to_text(self) -> str:
        lines = [f"v={self.v!r}", f"v_conn={self.v_conn!r}"]
        if self.lambda_hat is not None:
            lines.append(f"lambda_hat={self.lambda_hat!r}")
        for name in ("f_scd", "f_x", "f_y", "f_z"):
            e = getattr(self, name)
            lines.append(f"{name}.n_samples={e.n_samples}")
        return "\n".join(lines) + "\n"


def summarize(grid, lambda_hat: Optional[float] = None) -> SummaryTargets:
    """Every summary used by the minimum-contrast objective."""
    mask = _grid.as_mask(grid)
    if mask.any() and not mask.all():
        scd = spherical_contact_edf(mask)
    else:
        scd = EDF.from_samples([])
    return SummaryTargets(
        f_scd=scd,
        f_x=chord_length_edf(mask, "x"),
        f_y=chord_length_edf(mask, "y"),
        f_z=chord_length_edf(mask, "z"),
        v=_grid.volume_fraction(mask),
        v_conn=_grid.connected_fraction(mask),
        lambda_hat=lambda_hat,
    )
