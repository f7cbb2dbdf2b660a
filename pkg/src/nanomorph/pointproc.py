"""Macro-scale point patterns: elliptical Matérn cluster slices and the
slice-to-slice birth/death/displacement chain that stacks them into 3D.

All lengths are in voxels; intensities are per voxel² (per slice) for the
2D processes and per voxel³ for the stacked pattern.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

SQRT2_HALF = np.sqrt(2.0) / 2.0

# discrete displacement law: the 8-neighborhood in a slice
NEIGHBOR_OFFSETS = np.array(
    [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    dtype=np.float64,
)


def derive_birth_rate(lambda_c: float, p: float) -> float:
    """Birth intensity keeping the expected cluster count stationary."""
    if not 0 < p <= 1:
        raise ValueError("survival probability must lie in (0, 1]")
    return lambda_c * (1.0 - p)


@dataclass(frozen=True)
class MaternParams:
    """Elliptical Matérn cluster process ``(lambda_c, lambda_d, a, b)``."""

    lambda_c: float
    lambda_d: float
    a: float
    b: float

    def __post_init__(self):
        if not self.lambda_c >= 0:
            raise ValueError("lambda_c must be non-negative")
        if not self.lambda_d > 0:
            raise ValueError("lambda_d must be positive")
        if not self.a > self.b > 0:
            raise ValueError(f"need a > b > 0, got a={self.a}, b={self.b}")

    @property
    def ellipse_area(self) -> float:
        return np.pi * self.a * self.b

    @property
    def intensity(self) -> float:
        """Point intensity per voxel² of one slice (per voxel³ of the stack)."""
        return self.lambda_c * self.lambda_d * self.ellipse_area


@dataclass(frozen=True)
class ChainParams:
    p: float
    lambda_c_birth: float
    r_min: float = SQRT2_HALF
    r_max: float = 1.5
    displacement: str = "discrete"

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.lambda_c_birth < 0:
            raise ValueError("birth rate must be non-negative")
        if self.displacement not in ("discrete", "annulus"):
            raise ValueError(f"unknown displacement law {self.displacement!r}")

    @classmethod
    def for_matern(cls, mp: MaternParams, p: float, **kw) -> "ChainParams":
        return cls(p=p, lambda_c_birth=derive_birth_rate(mp.lambda_c, p), **kw)


@dataclass(frozen=True)
class Rectangle:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def uniform(self, n, rng):
        u = rng.random((n, 2))
        return np.column_stack([self.x0 + u[:, 0] * (self.x1 - self.x0),
                                self.y0 + u[:, 1] * (self.y1 - self.y0)])

    def expand(self, r) -> "Rectangle":
        return Rectangle(self.x0 - r, self.y0 - r, self.x1 + r, self.y1 + r)


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    angle: float = 0.0

    @property
    def area(self) -> float:
        return np.pi * self.a * self.b

    def uniform(self, n, rng):
        local = _unit_disk(n, rng) * (self.a, self.b)
        return _rotate(local, np.full(n, self.angle)) + (self.cx, self.cy)

    def contains(self, pts, tol=1e-9):
        pts = np.atleast_2d(pts) - (self.cx, self.cy)
        local = _rotate(pts, np.full(len(pts), -self.angle))
        return (local[:, 0] / self.a) ** 2 + (local[:, 1] / self.b) ** 2 <= 1 + tol


def _unit_disk(n, rng):
    rad = np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    return np.column_stack([rad * np.cos(phi), rad * np.sin(phi)])


def _rotate(pts, angles):
    c, s = np.cos(angles), np.sin(angles)
    return np.column_stack([c * pts[:, 0] - s * pts[:, 1], s * pts[:, 0] + c * pts[:, 1]])


def sample_poisson_2d(lam: float, region, rng) -> np.ndarray:
    """Homogeneous Poisson points on a :class:`Rectangle` or :class:`Ellipse`."""
    if lam < 0:
        raise ValueError("intensity must be non-negative")
    n = rng.poisson(lam * region.area) if lam > 0 else 0
    return region.uniform(n, rng)


@dataclass
class Cluster:
    id: int
    center: np.ndarray
    angle: float
    members: np.ndarray


@dataclass
class SliceState:
    """Clusters of one slice, stored column-wise.

    ``offsets`` are member positions relative to their cluster center
    (already rotated); ``owner`` maps each member to a row of ``ids``.
    """

    z: int
    region: Rectangle
    ids: np.ndarray
    centers: np.ndarray
    angles: np.ndarray
    offsets: np.ndarray
    owner: np.ndarray
    next_id: int = 0

    @property
    def n_clusters(self) -> int:
        return len(self.ids)

    def member_points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Absolute member coordinates and the id of each member's cluster."""
        return self.centers[self.owner] + self.offsets, self.ids[self.owner]

    @property
    def clusters(self) -> List[Cluster]:
        pts, _ = self.member_points()
        out = []
        for row, cid in enumerate(self.ids):
            out.append(Cluster(int(cid), self.centers[row].copy(), float(self.angles[row]),
                               pts[self.owner == row]))
        return out


def _new_clusters(n, region, mp: MaternParams, rng):
    centers = region.uniform(n, rng)
    angles = np.pi * rng.random(n)
    counts = rng.poisson(mp.lambda_d * mp.ellipse_area, n) if n else np.zeros(0, int)
    owner = np.repeat(np.arange(n), counts)
    local = _unit_disk(len(owner), rng) * (mp.a, mp.b)
    offsets = _rotate(local, angles[owner])
    return centers, angles, offsets, owner


def sample_matern_slice(mp: MaternParams, window: Rectangle, rng, guard: Optional[float] = None,
                        z: int = 0) -> SliceState:
    """One elliptical Matérn cluster slice.

    Cluster centers are drawn on the window enlarged by ``guard`` (default
    ``a``) so that ellipses reaching in from outside are represented.
    """
    guard = mp.a if guard is None else guard
    region = window.expand(guard)
    n = rng.poisson(mp.lambda_c * region.area) if mp.lambda_c > 0 else 0
    centers, angles, offsets, owner = _new_clusters(n, region, mp, rng)
    return SliceState(z, region, np.arange(n), centers, angles, offsets, owner, next_id=n)


def sample_displacements(n, cp: ChainParams, rng) -> np.ndarray:
    if cp.displacement == "discrete":
        return NEIGHBOR_OFFSETS[rng.integers(0, 8, n)]
    # area-uniform on the annulus, radius in (r_min, r_max]
    rad = np.sqrt(cp.r_max ** 2 - rng.random(n) * (cp.r_max ** 2 - cp.r_min ** 2))
    phi = 2 * np.pi * rng.random(n)
    return np.column_stack([rad * np.cos(phi), rad * np.sin(phi)])


def evolve_slice(state: SliceState, mp: MaternParams, cp: ChainParams, rng) -> SliceState:
    """Advance the chain by one slice: deaths, rigid displacement, births."""
    survive = rng.random(state.n_clusters) < cp.p
    keep = np.flatnonzero(survive)
    remap = np.full(state.n_clusters, -1)
    remap[keep] = np.arange(len(keep))
    member_keep = survive[state.owner]

    ids = state.ids[keep]
    centers = state.centers[keep] + sample_displacements(len(keep), cp, rng)
    angles = state.angles[keep]
    offsets = state.offsets[member_keep]
    owner = remap[state.owner[member_keep]]

    n_birth = rng.poisson(cp.lambda_c_birth * state.region.area) if cp.lambda_c_birth > 0 else 0
    b_centers, b_angles, b_offsets, b_owner = _new_clusters(n_birth, state.region, mp, rng)
    return SliceState(
        z=state.z + 1,
        region=state.region,
        ids=np.concatenate([ids, state.next_id + np.arange(n_birth)]),
        centers=np.concatenate([centers, b_centers]),
        angles=np.concatenate([angles, b_angles]),
        offsets=np.concatenate([offsets, b_offsets]),
        owner=np.concatenate([owner, b_owner + len(keep)]).astype(np.int64),
        next_id=state.next_id + n_birth,
    )


@dataclass
class PointStack:
    """3D midpoints ``(x, y, z)`` with ``z`` an integer slice index."""

    points: np.ndarray
    cluster_id: np.ndarray
    window: Tuple[float, float, int]
    cluster_counts: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.points)

    @property
    def volume(self) -> float:
        wx, wy, nz = self.window
        return float(wx * wy * nz)

    def inside(self) -> np.ndarray:
        wx, wy, _ = self.window
        x, y = self.points[:, 0], self.points[:, 1]
        return (x >= 0) & (x < wx) & (y >= 0) & (y < wy)

    def slice(self, z) -> np.ndarray:
        return self.points[self.points[:, 2] == z, :2]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "z", "cluster_id"])
            for (x, y, z), cid in zip(self.points, self.cluster_id):
                w.writerow([repr(float(x)), repr(float(y)), int(z), int(cid)])

    @classmethod
    def from_csv(cls, path, window) -> "PointStack":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        pts = np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows]).reshape(-1, 3)
        cid = np.array([int(r["cluster_id"]) for r in rows], dtype=np.int64)
        return cls(pts, cid, tuple(window))


def simulate_stack(mp: MaternParams, cp: ChainParams, window3d, rng, margin: float = 0.0) -> PointStack:
    """Stack ``nz`` slices of the Matérn Markov chain.

    Points are kept if they fall in the ``[0, wx) x [0, wy)`` window grown
    by ``margin`` on every side; use ``margin=0`` for statistics.
    """
    wx, wy, nz = window3d
    nz = int(nz)
    if nz < 1:
        raise ValueError("nz must be at least 1")
    window = Rectangle(0.0, 0.0, float(wx), float(wy))
    guard = mp.a + min(cp.r_max * nz, 3 * mp.a)
    state = sample_matern_slice(mp, window, rng, guard=guard)
    keep_box = window.expand(margin)
    chunks, ids, counts = [], [], []
    for z in range(nz):
        if z > 0:
            state = evolve_slice(state, mp, cp, rng)
        pts, cid = state.member_points()
        sel = ((pts[:, 0] >= keep_box.x0) & (pts[:, 0] < keep_box.x1)
               & (pts[:, 1] >= keep_box.y0) & (pts[:, 1] < keep_box.y1))
        chunks.append(np.column_stack([pts[sel], np.full(sel.sum(), float(z))]))
        ids.append(cid[sel])
        counts.append(state.n_clusters)
    points = np.concatenate(chunks) if chunks else np.zeros((0, 3))
    return PointStack(points, np.concatenate(ids), (wx, wy, nz), np.array(counts))
