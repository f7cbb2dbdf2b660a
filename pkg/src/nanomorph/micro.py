"""Micro-scale corrections of a sphere-union morphology.

Three steps, applied in this order: outer clusters in the polymer phase,
removal of unsupported boundary shells, and hard-core polymeric holes in
the ZnO interior.  The matching estimators work on a pair of grids
(original binarized, smoothed/sphere representation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from . import grid as _grid

DEFAULT_CLASSES = ((0.0, 2.0), (2.0, 4.0), (4.0, 6.0), (6.0, 8.0), (8.0, 10.0))



class InfeasibleError(ValueError):
    """Parameters that no process can realize (hard-core packing too dense)."""


_CROSS = ndimage.generate_binary_structure(3, 1)
_FULL26 = np.ones((3, 3, 3), dtype=bool)


def equal_volume_radius(volume):
    return np.cbrt(3.0 * np.asarray(volume, dtype=np.float64) / (4.0 * np.pi))


@dataclass(frozen=True)
class OuterParams:
    """Distance-class intensities plus the cluster-volume regression."""

    classes: Tuple[Tuple[float, float, float], ...]
    alpha: float
    beta: float
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(tuple(map(float, c)) for c in self.classes))
        prev_hi = -np.inf
        for lo, hi, lam in self.classes:
            if not lo < hi:
                raise ValueError(f"empty distance class [{lo}, {hi})")
            if lo < prev_hi:
                raise ValueError("distance classes must be ordered and non-overlapping")
            if lam < 0:
                raise ValueError("class intensities must be non-negative")
            prev_hi = hi
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")

    def mean_volume(self, x):
        return self.alpha * np.asarray(x, dtype=np.float64) + self.beta

    @property
    def x_intercept(self) -> float:
        """Distance beyond which clusters get zero volume (``inf`` if none)."""
        if self.alpha < 0 and self.beta > 0:
            return -self.beta / self.alpha
        return np.inf


@dataclass(frozen=True)
class InteriorParams:
    r: float
    lambda_h: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("hole radius must be positive")
        if self.lambda_h < 0:
            raise ValueError("lambda_h must be non-negative")
        if self.lambda_h * self.hardcore_volume >= 1:
            raise InfeasibleError(
                f"lambda_h={self.lambda_h} is infeasible for hard-core distance {self.r_h}: "
                f"lambda_h * V_h = {self.lambda_h * self.hardcore_volume:.4f} >= 1")

    @property
    def r_h(self) -> float:
        return 2.0 * self.r

    @property
    def hardcore_volume(self) -> float:
        return 4.0 / 3.0 * np.pi * self.r_h ** 3

    @property
    def primary_intensity(self) -> float:
        """Poisson intensity whose Matérn II thinning retains ``lambda_h``."""
        x = self.lambda_h * self.hardcore_volume
        return -np.log1p(-x) / self.hardcore_volume


@dataclass(frozen=True)
class BoundaryConfig:
    n_shells: int = 1

    def __post_init__(self):
        if self.n_shells < 0:
            raise ValueError("n_shells must be non-negative")


# ---------------------------------------------------------------------------
# outer misspecifications

@dataclass
class OuterClusters:
    centers: np.ndarray
    volumes: np.ndarray
    radii: np.ndarray
    class_index: np.ndarray = field(default=None)


def sample_outer_clusters(dist: np.ndarray, op: OuterParams, rng) -> OuterClusters:
    """Cluster centers per distance class and their volumes."""
    centers, volumes, cls_idx = [], [], []
    for ci, (lo, hi, lam) in enumerate(op.classes):
        if lam <= 0:
            continue
        cand = np.flatnonzero(((dist >= lo) & (dist < hi) & (dist > 0)).ravel())
        if cand.size == 0:
            continue
        n = rng.poisson(lam * cand.size)
        if n == 0:
            continue
        picks = cand[rng.integers(0, cand.size, n)]
        xyz = np.column_stack(np.unravel_index(picks, dist.shape)).astype(np.float64)
        x_mid = 0.5 * (lo + hi)
        vol = _draw_volumes(n, x_mid, op, rng)
        centers.append(xyz)
        volumes.append(vol)
        cls_idx.append(np.full(n, ci))
    if not centers:
        return OuterClusters(np.zeros((0, 3)), np.zeros(0), np.zeros(0), np.zeros(0, int))
    centers = np.concatenate(centers)
    volumes = np.concatenate(volumes)
    keep = volumes > 0
    return OuterClusters(centers[keep], volumes[keep], equal_volume_radius(volumes[keep]),
                         np.concatenate(cls_idx)[keep])


def _draw_volumes(n, x, op: OuterParams, rng):
    if x > op.x_intercept:
        return np.zeros(n)
    mean = float(op.mean_volume(x))
    sd = np.sqrt(op.sigma2)
    if sd == 0:
        if mean <= 0:
            return np.zeros(n)
        return np.full(n, mean)
    out = mean + sd * rng.standard_normal(n)
    bad = out <= 0
    # rejection: redraw until positive (fails only for absurd parameters)
    for _ in range(10000):
        if not bad.any():
            break
        out[bad] = mean + sd * rng.standard_normal(bad.sum())
        bad = out <= 0
    else:
        raise ValueError("cluster volume regression yields almost no positive sizes")
    return out


def add_outer(xi, dist, op: OuterParams, rng):
    """Add outer clusters around the macro foreground.

    Returns ``(xi_prime, outer_only)`` where ``outer_only`` are the added
    voxels lying outside ``xi``.
    """
    mask = _grid.as_mask(xi)
    dist = np.asarray(dist)
    if dist.shape != mask.shape:
        raise ValueError("distance field and grid differ in shape")
    clusters = sample_outer_clusters(dist, op, rng)
    painted = _grid.rasterize_spheres(np.column_stack([clusters.centers, clusters.radii]),
                                      mask.shape)
    return mask | painted, painted & ~mask


def _linear_fit(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n == 0:
        return 0.0, 0.0, 0.0
    if n == 1 or np.ptp(x) == 0:
        return 0.0, float(y.mean()), float(y.var(ddof=1)) if n > 1 else 0.0
    alpha, beta = np.polyfit(x, y, 1)
    resid = y - (alpha * x + beta)
    sigma2 = float(resid @ resid / (n - 2)) if n > 2 else 0.0
    return float(alpha), float(beta), sigma2


def estimate_outer(original, smoothed, classes=DEFAULT_CLASSES) -> OuterParams:
    """Class intensities and volume regression from ``B`` and ``B'''``.

    Clusters are the 26-connected components of ``B minus B'''``; each is
    placed in the class of the distance from its (voxel-rounded) center of
    gravity to ``B'''``.  The regression runs over individual clusters with
    the class midpoint as regressor.
    """
    b = _grid.as_mask(original)
    b3 = _grid.as_mask(smoothed)
    if b.shape != b3.shape:
        raise ValueError("grids differ in shape")
    dist = _grid.distance_transform(b3)
    labels, n = ndimage.label(b & ~b3, structure=_FULL26)
    if n:
        idx = np.arange(1, n + 1)
        cog = np.array(ndimage.center_of_mass(np.ones_like(labels), labels, idx)).reshape(n, 3)
        vols = ndimage.sum_labels(np.ones_like(labels), labels, idx)
        vox = np.clip(np.rint(cog).astype(np.int64), 0, np.array(b.shape) - 1)
        d_cog = dist[vox[:, 0], vox[:, 1], vox[:, 2]]
    else:
        d_cog = vols = np.zeros(0)
    out_classes, xs, ys = [], [], []
    for lo, hi in classes:
        in_class = (dist >= lo) & (dist < hi) & (dist > 0)
        n_vox = int(in_class.sum())
        sel = (d_cog >= lo) & (d_cog < hi) & (d_cog > 0)
        lam = sel.sum() / n_vox if n_vox else 0.0
        out_classes.append((lo, hi, float(lam)))
        xs.append(np.full(sel.sum(), 0.5 * (lo + hi)))
        ys.append(vols[sel])
    alpha, beta, sigma2 = _linear_fit(np.concatenate(xs), np.concatenate(ys))
    return OuterParams(tuple(out_classes), alpha, beta, sigma2)


# ---------------------------------------------------------------------------
# boundary misspecifications

def remove_boundary(xi, outer_only, cfg: BoundaryConfig, return_removed: bool = False):
    """Strip shell voxels of ``xi`` that do not touch protected voxels.

    Shells are those of ``xi`` itself.  Surviving voxels of shell ``i`` join
    the protected set before shell ``i+1`` is treated.  The result is
    ``(xi minus removed) | outer_only``.
    """
    mask = _grid.as_mask(xi)
    outer = _grid.as_mask(outer_only)
    if mask.shape != outer.shape:
        raise ValueError("grids differ in shape")
    protected = outer & ~mask
    removed = np.zeros_like(mask)
    if cfg.n_shells:
        shell_no = _grid.shell_index(mask)
        for i in range(1, cfg.n_shells + 1):
            eta = shell_no == i
            near = ndimage.binary_dilation(protected, structure=_CROSS)
            removed |= eta & ~near
            protected |= eta & near
    result = (mask & ~removed) | outer
    if return_removed:
        return result, removed
    return result


def shell_removal_fractions(xi, removed, n_max: int = 4) -> np.ndarray:
    """Share of each of the first ``n_max`` shells of ``xi`` that was removed."""
    shell_no = _grid.shell_index(xi)
    out = np.zeros(n_max)
    for i in range(1, n_max + 1):
        eta = shell_no == i
        if eta.any():
            out[i - 1] = (eta & removed).sum() / eta.sum()
    return out


# ---------------------------------------------------------------------------
# interior misspecifications

def matern_hardcore_type2(lambda_h: float, r_h: float, box_lo, box_hi, rng) -> np.ndarray:
    """Matérn II hard-core points in a box, retained intensity ``lambda_h``.

    Primary points are generated on the box grown by ``r_h`` so that
    thinning near the faces sees its outside competitors.
    """
    if lambda_h == 0:
        return np.zeros((0, 3))
    vh = 4.0 / 3.0 * np.pi * r_h ** 3
    if lambda_h * vh >= 1:
        raise InfeasibleError("infeasible hard-core intensity")
    lam_p = -np.log1p(-lambda_h * vh) / vh
    lo = np.asarray(box_lo, dtype=np.float64) - r_h
    hi = np.asarray(box_hi, dtype=np.float64) + r_h
    n = rng.poisson(lam_p * np.prod(hi - lo))
    pts = lo + rng.random((n, 3)) * (hi - lo)
    birth = rng.random(n)
    keep = np.ones(n, dtype=bool)
    if n > 1:
        pairs = cKDTree(pts).query_pairs(r_h, output_type="ndarray")
        if len(pairs):
            d = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1)
            pairs = pairs[d < r_h]
            i, j = pairs[:, 0], pairs[:, 1]
            younger = np.where(birth[i] > birth[j], i, j)
            keep[younger] = False
    pts = pts[keep]
    inside = np.all((pts >= np.asarray(box_lo)) & (pts < np.asarray(box_hi)), axis=1)
    return pts[inside]


def _ball_offsets(r):
    k = int(np.ceil(r)) + 1
    g = np.arange(-k, k + 1)
    return np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)


def _ball_inside(mask, centers, r):
    # voxels whose centers lie within r of each (continuous) center must be foreground
    if len(centers) == 0:
        return np.zeros(0, dtype=bool)
    offs = _ball_offsets(r)
    shape = np.array(mask.shape)
    ok = np.ones(len(centers), dtype=bool)
    base = np.floor(centers).astype(np.int64)
    r2 = r * r * (1 + 1e-9) + 1e-12
    for off in offs:
        vox = base + off
        within = ((vox - centers) ** 2).sum(axis=1) <= r2
        inside = np.all((vox >= 0) & (vox < shape), axis=1)
        hit = np.zeros(len(centers), dtype=bool)
        hit[inside] = mask[vox[inside, 0], vox[inside, 1], vox[inside, 2]]
        ok &= ~within | hit
    return ok


def sample_interior_holes(xi_cap, ip: InteriorParams, rng) -> np.ndarray:
    """Hole centers: Matérn II points whose radius-``r`` ball fits in ``xi_cap``."""
    mask = _grid.as_mask(xi_cap)
    if ip.lambda_h == 0 or not mask.any():
        return np.zeros((0, 3))
    lo = np.array([-0.5, -0.5, -0.5])
    hi = np.array(mask.shape, dtype=np.float64) - 0.5
    pts = matern_hardcore_type2(ip.lambda_h, ip.r_h, lo, hi, rng)
    return pts[_ball_inside(mask, pts, ip.r)]


def add_interior(xi_cap, ip: InteriorParams, rng, carve_from=None):
    """Carve radius-``r`` polymer holes centered at admissible hard-core points.

    ``carve_from`` is the grid to carve (default: ``xi_cap`` itself).
    """
    mask = _grid.as_mask(xi_cap)
    target = mask if carve_from is None else _grid.as_mask(carve_from)
    centers = sample_interior_holes(mask, ip, rng)
    holes = _grid.rasterize_spheres(np.column_stack([centers, np.full(len(centers), ip.r)]),
                                    mask.shape)
    return target & ~holes


def estimate_interior(original, smoothed_core, n_shells: int = 1) -> InteriorParams:
    """Hole radius and hard-core intensity from ``B`` and ``B''``.

    Interior clusters are the 26-connected components of ``B'' minus B``
    after discarding the first ``n_shells`` shells of ``B''`` (the boundary
    zone).  ``r`` is the equal-volume radius of their mean volume and
    ``lambda_h`` their count per voxel of ``B''`` eroded by ``r``.
    """
    b = _grid.as_mask(original)
    b2 = _grid.as_mask(smoothed_core)
    if b.shape != b2.shape:
        raise ValueError("grids differ in shape")
    inner = b2 & ~b
    if n_shells:
        inner &= _grid.shell_index(b2) > n_shells
    labels, n = ndimage.label(inner, structure=_FULL26)
    if n == 0:
        return InteriorParams(r=1.0, lambda_h=0.0)
    vols = np.bincount(labels.ravel())[1:]
    r_hat = float(equal_volume_radius(vols.mean()))
    eroded = _grid.erode(b2, r_hat).sum()
    lam = n / eroded if eroded else 0.0
    return InteriorParams(r=r_hat, lambda_h=float(lam))


def apply_micro(xi, op: OuterParams, cfg: BoundaryConfig, ip: InteriorParams, rng,
                details: bool = False):
    """Full micro pipeline on a macro grid: outer, boundary, interior."""
    mask = _grid.as_mask(xi)
    dist = _grid.distance_transform(mask)
    xi1, outer_only = add_outer(mask, dist, op, rng)
    xi2, removed = remove_boundary(mask, outer_only, cfg, return_removed=True)
    xi3 = add_interior(mask & xi2, ip, rng, carve_from=xi2)
    if details:
        return xi3, {"xi_prime": xi1, "outer_only": outer_only, "xi_2prime": xi2,
                     "removed": removed}
    return xi3
