"""Steady-state exciton diffusion in the polymer phase.

The density is solved in the dimensionless form ``u = n / (tau g)``::

    0 = -u + (L_D / h)^2 * lap7(u) + 1     on polymer voxels
    u = 0                                  on ZnO voxels

with periodic wrap on all window faces, ``L_D = sqrt(D tau)`` and ``h`` the
voxel size.  The quenching efficiency is ``1 - mean(u)`` over the polymer.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from . import grid as _grid

MEF_MAGIC = b"MEF1"
_HEADER = struct.Struct("<4sIIId")


class ConvergenceError(RuntimeError):
    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


@dataclass(frozen=True)
class DiffusionParams:
    D: float = 1.8e-7          # m^2/s
    tau: float = 400e-12       # s
    g: float = 1e27            # m^-3 s^-1
    voxel_size: float = 0.71   # nm
    tol: float = 1e-3
    max_iters: int = 20000

    def __post_init__(self):
        for name in ("D", "tau", "g", "voxel_size", "tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    @property
    def diffusion_length_nm(self) -> float:
        return float(np.sqrt(self.D * self.tau) * 1e9)

    @property
    def coupling(self) -> float:
        """``(L_D / h)^2``, the stencil weight of each neighbour."""
        return (self.diffusion_length_nm / self.voxel_size) ** 2


@dataclass
class ExcitonField:
    u: np.ndarray
    polymer: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    params: DiffusionParams = None

    def density(self) -> np.ndarray:
        """Physical exciton density ``n`` in m^-3."""
        p = self.params or DiffusionParams()
        return self.u * p.tau * p.g


@njit(cache=True)
def _sor_sweep(u, polymer, c, omega, color):
    # color < 0: lexicographic order; 0/1: one half of a red-black sweep
    nx, ny, nz = u.shape
    diag = 1.0 + 6.0 * c
    max_du = 0.0
    for i in range(nx):
        im = i - 1 if i > 0 else nx - 1
        ip = i + 1 if i < nx - 1 else 0
        for j in range(ny):
            jm = j - 1 if j > 0 else ny - 1
            jp = j + 1 if j < ny - 1 else 0
            for k in range(nz):
                if color >= 0 and (i + j + k) % 2 != color:
                    continue
                if not polymer[i, j, k]:
                    continue
                km = k - 1 if k > 0 else nz - 1
                kp = k + 1 if k < nz - 1 else 0
                s = (u[im, j, k] + u[ip, j, k] + u[i, jm, k] + u[i, jp, k]
                     + u[i, j, km] + u[i, j, kp])
                old = u[i, j, k]
                new = old + omega * ((c * s + 1.0) / diag - old)
                # projection onto [0, 1]; the exact solution lies inside
                if new < 0.0:
                    new = 0.0
                elif new > 1.0:
                    new = 1.0
                du = abs(new - old)
                if du > max_du:
                    max_du = du
                u[i, j, k] = new
    return max_du


@njit(cache=True)
def _max_residual(u, polymer, c):
    nx, ny, nz = u.shape
    worst = 0.0
    for i in range(nx):
        im = i - 1 if i > 0 else nx - 1
        ip = i + 1 if i < nx - 1 else 0
        for j in range(ny):
            jm = j - 1 if j > 0 else ny - 1
            jp = j + 1 if j < ny - 1 else 0
            for k in range(nz):
                if not polymer[i, j, k]:
                    continue
                km = k - 1 if k > 0 else nz - 1
                kp = k + 1 if k < nz - 1 else 0
                s = (u[im, j, k] + u[ip, j, k] + u[i, jm, k] + u[i, jp, k]
                     + u[i, j, km] + u[i, j, kp])
                r = abs(-u[i, j, k] + c * (s - 6.0 * u[i, j, k]) + 1.0)
                if r > worst:
                    worst = r
    return worst


def residual(u, polymer, coupling) -> float:
    """Max-norm residual of the discrete equation over polymer voxels."""
    return float(_max_residual(np.ascontiguousarray(u), np.ascontiguousarray(polymer), coupling))


def default_omega(coupling: float) -> float:
    """Over-relaxation factor from the Jacobi spectral bound ``6c / (1 + 6c)``."""
    rho = 6.0 * coupling / (1.0 + 6.0 * coupling)
    return 2.0 / (1.0 + np.sqrt(1.0 - rho * rho))


def solve_exciton_field(grid, dp: DiffusionParams = DiffusionParams(), order: str = "redblack",
                        omega=None, check_every: int = 10) -> ExcitonField:
    """Solve for the dimensionless exciton density by projected SOR.

    Iteration stops once the largest update relative to ``max(u)`` is below
    ``dp.tol`` and the max-norm residual (in units of the source term) is
    below ``dp.tol`` as well.  The operator is diagonally dominant with
    margin 1, so the sup-norm error in ``u`` is then below ``dp.tol``.
    """
    mask = _grid.as_mask(grid)
    polymer = np.ascontiguousarray(~mask)
    if not polymer.any():
        raise ValueError("grid has no polymer phase")
    if order not in ("redblack", "lexicographic"):
        raise ValueError(f"unknown sweep order {order!r}")
    c = dp.coupling
    w = default_omega(c) if omega is None else float(omega)
    if not 0 < w < 2:
        raise ValueError("omega must lie in (0, 2)")
    u = polymer.astype(np.float64)
    res = np.inf
    for it in range(1, dp.max_iters + 1):
        if order == "redblack":
            du = max(_sor_sweep(u, polymer, c, w, 0), _sor_sweep(u, polymer, c, w, 1))
        else:
            du = _sor_sweep(u, polymer, c, w, -1)
        umax = u.max()
        rel = du / umax if umax > 0 else du
        if rel < dp.tol and (it % check_every == 0 or rel == 0):
            res = _max_residual(u, polymer, c)
            if res < dp.tol:
                return ExcitonField(u, polymer, it, float(res), dp)
    raise ConvergenceError(
        f"no convergence after {dp.max_iters} iterations (residual {res:.3g})", dp.max_iters)


def quenching_efficiency(field: ExcitonField, grid=None) -> float:
    """``1 - mean(u)`` over polymer voxels."""
    polymer = field.polymer if grid is None else ~_grid.as_mask(grid)
    return float(1.0 - field.u[polymer].mean())


def local_quenching_map(field: ExcitonField) -> np.ndarray:
    """Per-voxel quenching probability ``1 - u``; NaN on ZnO voxels."""
    q = np.full(field.u.shape, np.nan)
    q[field.polymer] = 1.0 - field.u[field.polymer]
    return q


def write_mef(path, field: ExcitonField, voxel_size: float = None):
    u = np.where(field.polymer, field.u, 0.0).astype("<f4")
    nx, ny, nz = u.shape
    if voxel_size is None:
        voxel_size = field.params.voxel_size if field.params else 0.71
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MEF_MAGIC, nx, ny, nz, float(voxel_size)))
        fh.write(u.ravel(order="F").tobytes())


def read_mef(path):
    """Return ``(u, voxel_size)`` from a field file."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError("truncated MEF1 header")
    magic, nx, ny, nz, voxel_size = _HEADER.unpack_from(raw)
    if magic != MEF_MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MEF_MAGIC!r}")
    payload = raw[_HEADER.size:]
    if len(payload) != 4 * nx * ny * nz:
        raise ValueError("field payload size does not match dims")
    u = np.frombuffer(payload, dtype="<f4").reshape((nx, ny, nz), order="F")
    return u.astype(np.float64), voxel_size
