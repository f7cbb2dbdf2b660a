"""Binary voxel grids: rasterization, exact distance transforms, morphology
and through-thickness connectivity.

Grids are boolean arrays indexed ``[x, y, z]`` (shape ``(nx, ny, nz)``),
foreground (``True``) being the ZnO phase.  Voxel ``(i, j, k)`` has its
center at the continuous coordinate ``(i, j, k)``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np
from numba import njit
from scipy import ndimage

MVG_MAGIC = b"MVG1"
_HEADER = struct.Struct("<4sIIId")

# relative slack for inclusive distance comparisons (sqrt(3)**2 < 3 in floats)
_EPS = 1e-9


class Sphere(NamedTuple):
    cx: float
    cy: float
    cz: float
    r: float


@dataclass
class VoxelGrid:
    """Binary phase field with a physical voxel size (nm)."""

    data: np.ndarray
    voxel_size: float = 0.71

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"expected a non-empty 3D grid, got shape {data.shape}")
        if data.dtype != bool:
            if not np.isin(data, (0, 1)).all():
                raise ValueError("voxel values must be 0 or 1")
            data = data.astype(bool)
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        self.data = data

    @property
    def shape(self):
        return self.data.shape

    @property
    def nx(self):
        return self.data.shape[0]

    @property
    def ny(self):
        return self.data.shape[1]

    @property
    def nz(self):
        return self.data.shape[2]

    def write(self, path):
        write_mvg(path, self)

    @classmethod
    def read(cls, path):
        return read_mvg(path)


GridLike = Union[VoxelGrid, np.ndarray]


def as_mask(grid: GridLike) -> np.ndarray:
    """Return the boolean voxel array behind ``grid``."""
    if isinstance(grid, VoxelGrid):
        return grid.data
    mask = np.asarray(grid)
    if mask.ndim != 3:
        raise ValueError(f"expected a 3D grid, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


# ---------------------------------------------------------------------------
# file format

def write_mvg(path, grid: VoxelGrid):
    mask = as_mask(grid)
    voxel_size = grid.voxel_size if isinstance(grid, VoxelGrid) else 0.71
    nx, ny, nz = mask.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MVG_MAGIC, nx, ny, nz, float(voxel_size)))
        fh.write(mask.astype(np.uint8).ravel(order="F").tobytes())


def read_mvg(path) -> VoxelGrid:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated MVG1 header")
    magic, nx, ny, nz, voxel_size = _HEADER.unpack_from(raw)
    if magic != MVG_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MVG_MAGIC!r}")
    payload = raw[_HEADER.size:]
    if len(payload) != nx * ny * nz:
        raise ValueError(f"payload has {len(payload)} bytes, expected {nx * ny * nz}")
    flat = np.frombuffer(payload, dtype=np.uint8)
    if flat.size and flat.max() > 1:
        raise ValueError("voxel values must be 0 or 1")
    data = flat.reshape((nx, ny, nz), order="F").astype(bool)
    return VoxelGrid(data, voxel_size)


# ---------------------------------------------------------------------------
# rasterization

@njit(cache=True)
def _paint_spheres(out, spheres):
    nx, ny, nz = out.shape
    for s in range(spheres.shape[0]):
        cx, cy, cz, r = spheres[s, 0], spheres[s, 1], spheres[s, 2], spheres[s, 3]
        r2 = r * r * (1.0 + 1e-9) + 1e-12
        reach = r * (1.0 + 1e-9) + 1e-12
        x0 = max(int(np.ceil(cx - reach)), 0)
        x1 = min(int(np.floor(cx + reach)), nx - 1)
        y0 = max(int(np.ceil(cy - reach)), 0)
        y1 = min(int(np.floor(cy + reach)), ny - 1)
        z0 = max(int(np.ceil(cz - reach)), 0)
        z1 = min(int(np.floor(cz + reach)), nz - 1)
        for i in range(x0, x1 + 1):
            dx2 = (i - cx) * (i - cx)
            for j in range(y0, y1 + 1):
                dxy2 = dx2 + (j - cy) * (j - cy)
                if dxy2 > r2:
                    continue
                for k in range(z0, z1 + 1):
                    if dxy2 + (k - cz) * (k - cz) <= r2:
                        out[i, j, k] = True


def sphere_array(spheres) -> np.ndarray:
    arr = np.asarray(spheres, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, 4))
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError("spheres must be rows of (cx, cy, cz, r)")
    return arr


def rasterize_spheres(spheres: Sequence[Sphere], dims, out=None) -> np.ndarray:
    """Union of balls sampled at voxel centers.

    A voxel is foreground iff its center lies within distance ``r``
    (inclusive) of some sphere center.  Spheres may stick out of the window.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"invalid dims {dims}")
    if out is None:
        out = np.zeros(dims, dtype=bool)
    _paint_spheres(out, np.ascontiguousarray(sphere_array(spheres)))
    return out


# ---------------------------------------------------------------------------
# exact Euclidean distance transform (Felzenszwalb & Huttenlocher)

@njit(cache=True)
def _envelope_1d(f, out, v, z):
    # lower envelope of parabolas rooted at finite samples of f
    n = f.shape[0]
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            p = v[k]
            s = ((fq + q * q) - (f[p] + p * p)) / (2.0 * (q - p))
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
        else:
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            out[q] = np.inf
        return
    j = 0
    for q in range(n):
        while z[j + 1] < q:
            j += 1
        p = v[j]
        out[q] = (q - p) * (q - p) + f[p]


@njit(cache=True)
def _sq_edt(mask):
    nx, ny, nz = mask.shape
    d = np.empty((nx, ny, nz), dtype=np.float64)
    # pass along x: 1D distance to nearest foreground sample
    for j in range(ny):
        for k in range(nz):
            last = -1
            for i in range(nx):
                if mask[i, j, k]:
                    last = i
                    d[i, j, k] = 0.0
                elif last >= 0:
                    d[i, j, k] = float(i - last)
                else:
                    d[i, j, k] = np.inf
            last = -1
            for i in range(nx - 1, -1, -1):
                if mask[i, j, k]:
                    last = i
                elif last >= 0:
                    t = float(last - i)
                    if t < d[i, j, k]:
                        d[i, j, k] = t
            for i in range(nx):
                d[i, j, k] = d[i, j, k] * d[i, j, k]
    m = max(ny, nz)
    f = np.empty(m)
    g = np.empty(m)
    v = np.empty(m, dtype=np.int64)
    z = np.empty(m + 1)
    for i in range(nx):
        for k in range(nz):
            for j in range(ny):
                f[j] = d[i, j, k]
            _envelope_1d(f[:ny], g[:ny], v, z)
            for j in range(ny):
                d[i, j, k] = g[j]
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                f[k] = d[i, j, k]
            _envelope_1d(f[:nz], g[:nz], v, z)
            for k in range(nz):
                d[i, j, k] = g[k]
    return d


def squared_distance_transform(grid: GridLike) -> np.ndarray:
    """Squared Euclidean distance (voxel units) to the nearest foreground voxel.

    Values are sums of squared integers, hence exact in float64; ``inf``
    where the grid has no foreground at all.
    """
    mask = np.ascontiguousarray(as_mask(grid))
    return _sq_edt(mask)


def distance_transform(grid: GridLike) -> np.ndarray:
    """Exact Euclidean distance from every voxel to the nearest foreground voxel."""
    return np.sqrt(squared_distance_transform(grid))


# ---------------------------------------------------------------------------
# morphology

def dilate(grid: GridLike, radius: float, border_value: int = 0) -> np.ndarray:
    """Dilation by the digital ball ``{|v| <= radius}``.

    ``border_value`` is the phase assumed outside the window; with 1 the
    exterior acts as foreground and spreads in through the faces.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    mask = as_mask(grid)
    if radius < 1:
        return mask.copy()
    pad = int(np.floor(radius)) if border_value else 0
    if pad:
        work = np.pad(mask, pad, mode="constant", constant_values=True)
    else:
        work = mask
    sq = squared_distance_transform(work)
    out = sq <= radius * radius * (1 + _EPS)
    if pad:
        out = out[pad:-pad, pad:-pad, pad:-pad]
    return out


def erode(grid: GridLike, radius: float, border_value: int = 0) -> np.ndarray:
    """Erosion by the digital ball, dual to :func:`dilate`.

    With the default ``border_value=0`` the exterior counts as background,
    so a full grid loses the voxels within ``radius`` of each face.
    """
    mask = as_mask(grid)
    return ~dilate(~mask, radius, border_value=1 - border_value)


def shells(grid: GridLike, i: int) -> np.ndarray:
    """Foreground voxels at distance ``(i-1, i]`` from the in-window background.

    Shell 1 is the set of foreground voxels with distance <= 1 to background.
    """
    if i < 1:
        raise ValueError("shell index starts at 1")
    mask = as_mask(grid)
    sq = squared_distance_transform(~mask)
    lo, hi = (i - 1) ** 2, i * i
    return mask & (sq > lo) & (sq <= hi)


def shell_index(grid: GridLike) -> np.ndarray:
    """Shell number of every foreground voxel (0 on background)."""
    mask = as_mask(grid)
    sq = squared_distance_transform(~mask)
    idx = np.zeros(mask.shape, dtype=np.int64)
    finite = mask & np.isfinite(sq)
    idx[finite] = np.ceil(np.sqrt(sq[finite]) - 1e-9).astype(np.int64)
    return idx


# ---------------------------------------------------------------------------
# connectivity

_FULL26 = np.ones((3, 3, 3), dtype=bool)
_FULL8 = np.ones((3, 3), dtype=bool)


def volume_fraction(grid: GridLike) -> float:
    return float(as_mask(grid).mean())


def spanning_components(grid: GridLike) -> np.ndarray:
    """Foreground voxels in 26-connected components touching both z faces."""
    mask = as_mask(grid)
    if mask.shape[2] < 2:
        raise ValueError("need at least two z layers")
    labels, n = ndimage.label(mask, structure=_FULL26)
    if n == 0:
        return np.zeros_like(mask)
    bottom = np.unique(labels[:, :, 0])
    top = np.unique(labels[:, :, -1])
    spanning = np.intersect1d(bottom, top)
    spanning = spanning[spanning > 0]
    keep = np.zeros(n + 1, dtype=bool)
    keep[spanning] = True
    return keep[labels]


def connected_fraction(grid: GridLike) -> float:
    """Share of foreground voxels in components spanning z = 0 to z = nz-1."""
    mask = as_mask(grid)
    total = mask.sum()
    if total == 0:
        if mask.shape[2] < 2:
            raise ValueError("need at least two z layers")
        return 0.0
    return float(spanning_components(mask).sum() / total)


def _sweep_monotone(mask: np.ndarray) -> np.ndarray:
    # voxels reachable from layer 0 by 8-connected in-layer moves and
    # 9-voxel steps to the next layer
    nz = mask.shape[2]
    reached = np.zeros_like(mask)
    reached[:, :, 0] = mask[:, :, 0]
    for z in range(1, nz):
        layer = mask[:, :, z]
        if not layer.any():
            continue
        below = reached[:, :, z - 1]
        if not below.any():
            continue
        seeds = layer & ndimage.binary_dilation(below, structure=_FULL8)
        if not seeds.any():
            continue
        labels, n = ndimage.label(layer, structure=_FULL8)
        hit = np.zeros(n + 1, dtype=bool)
        hit[labels[seeds]] = True
        hit[0] = False
        reached[:, :, z] = hit[labels]
    return reached


def monotone_pathways(grid: GridLike) -> np.ndarray:
    """Foreground voxels lying on some z-monotone bottom-to-top path."""
    mask = as_mask(grid)
    if mask.shape[2] < 2:
        raise ValueError("need at least two z layers")
    up = _sweep_monotone(mask)
    down = _sweep_monotone(mask[:, :, ::-1])[:, :, ::-1]
    return up & down


def monotone_connected_fraction(grid: GridLike) -> float:
    mask = as_mask(grid)
    total = mask.sum()
    on_path = monotone_pathways(mask)
    if total == 0:
        return 0.0
    return float(on_path.sum() / total)
