"""Gamma radii by m-nearest-neighbour moving averages, and the mark
correlation function of the resulting marked pattern."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

SQRT3 = float(np.sqrt(3.0))


@dataclass(frozen=True)
class GammaMarkParams:
    k: float
    theta: float
    m: int = 4
    r_floor: float = SQRT3

    def __post_init__(self):
        if not (self.k > 0 and self.theta > 0):
            raise ValueError("gamma shape and scale must be positive")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")

    @property
    def mean(self):
        return self.k * self.theta

    @property
    def variance(self):
        return self.k * self.theta ** 2


@dataclass
class MarkedPoints:
    positions: np.ndarray
    radii: np.ndarray

    def __len__(self):
        return len(self.radii)

    def spheres(self) -> np.ndarray:
        return np.column_stack([self.positions, self.radii])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "r"])
            for (x, y, z), r in zip(self.positions, self.radii):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(z)), repr(float(r))])

    @classmethod
    def from_csv(cls, path) -> "MarkedPoints":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["x", "y", "z", "r"]:
                raise ValueError(f"expected header x,y,z,r, got {header}")
            rows = np.array([[float(v) for v in row] for row in reader if row]).reshape(-1, 4)
        return cls(rows[:, :3], rows[:, 3])


def nearest_indices(positions: np.ndarray, m: int, decimals: int = 9) -> np.ndarray:
    """Indices of the ``m`` nearest points of every point, itself included.

    Distances are compared after rounding to ``decimals`` places so that
    lattice-like ties are recognised; ties go to the lower point index.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    if n < m:
        raise ValueError(f"need at least m={m} points, got {n}")
    tree = cKDTree(positions)
    out = np.empty((n, m), dtype=np.int64)
    todo = np.arange(n)
    kq = min(n, m + 4)
    while len(todo):
        d, idx = tree.query(positions[todo], k=kq)
        d = np.round(np.asarray(d).reshape(len(todo), kq), decimals)
        idx = np.asarray(idx).reshape(len(todo), kq)
        order = np.lexsort((idx, d), axis=-1)
        d = np.take_along_axis(d, order, axis=-1)
        idx = np.take_along_axis(idx, order, axis=-1)
        out[todo] = idx[:, :m]
        # the tie group at the m-th distance may continue past the query size
        if kq == n:
            break
        undecided = d[:, kq - 1] == d[:, m - 1]
        todo = todo[undecided]
        kq = min(n, 2 * kq)
    return out


def assign_radii(points, gp: GammaMarkParams, rng) -> MarkedPoints:
    """Radius = floor + sum of Γ(k/m, θ) draws over the m nearest points."""
    positions = getattr(points, "points", points)
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = len(positions)
    if n < gp.m:
        raise ValueError(f"need at least m={gp.m} points to assign radii, got {n}")
    base = rng.gamma(gp.k / gp.m, gp.theta, n)
    if gp.m == 1:
        reduced = base
    else:
        reduced = base[nearest_indices(positions, gp.m)].sum(axis=1)
    return MarkedPoints(positions, gp.r_floor + reduced)


def _epanechnikov(u):
    return np.where(np.abs(u) < 1, 0.75 * (1 - u * u), 0.0)


def mark_correlation(marked: MarkedPoints, r_grid, bandwidth: float = 1.0, marks=None):
    """Kernel estimate of the mark correlation function ``kappa(r)``.

    Mark products of point pairs are averaged with Epanechnikov weights in
    the pair distance and normalised by the squared mean mark.  Returns
    ``(r, kappa)``; lags without any weighted pair are NaN.
    """
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    pos = np.asarray(marked.positions, dtype=np.float64)
    mk = np.asarray(marked.radii if marks is None else marks, dtype=np.float64)
    if len(pos) < 2:
        raise ValueError("need at least two points")
    r_grid = np.asarray(r_grid, dtype=np.float64)
    tree = cKDTree(pos)
    pairs = tree.query_pairs(r_grid.max() + bandwidth, output_type="ndarray")
    d = np.linalg.norm(pos[pairs[:, 0]] - pos[pairs[:, 1]], axis=1)
    prod = mk[pairs[:, 0]] * mk[pairs[:, 1]]
    order = np.argsort(d)
    d, prod = d[order], prod[order]
    kappa = np.full(len(r_grid), np.nan)
    mean2 = mk.mean() ** 2
    for i, r in enumerate(r_grid):
        lo, hi = np.searchsorted(d, [r - bandwidth, r + bandwidth])
        w = _epanechnikov((r - d[lo:hi]) / bandwidth)
        den = w.sum()
        if den > 0:
            kappa[i] = (w @ prod[lo:hi]) / den / mean2
    return r_grid, kappa


def write_mark_correlation(path, r, kappa):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "kappa"])
        for ri, ki in zip(r, kappa):
            w.writerow([repr(float(ri)), "nan" if np.isnan(ki) else repr(float(ki))])
