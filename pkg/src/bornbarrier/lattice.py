"""Finite-difference oracle for the static modified propagator.

Solves ``(Δ_h + γ j(x)) G = -δ/h³`` on a uniform ``n³`` grid with the
7-point Laplacian.  The grid nodes are all unknowns; the boundary condition
fixes a ghost layer one spacing outside the grid:

``dirichlet-zero``
    ghost values are zero.
``free``
    ghost values are those of the continuum free-space solution, which
    removes the box bias of the free propagator.  For the first-order field
    the ghost values are the direct Coulomb sum of its lattice source.

Linear systems are solved by conjugate gradients on the positive definite
operator ``-(Δ_h + γ j)``, preconditioned with the exact Dirichlet inverse of
``-Δ_h`` (type-I discrete sine transform).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft
from scipy.interpolate import RectBivariateSpline

from .errors import (
    IndexOutOfRange,
    InvalidGrid,
    NoConvergence,
    NoRegions,
    PerturbationTooStrong,
    SourceOffGrid,
)
from .scene import Region, Scene, validate_scene
from .spectral import region_field

BOUNDARIES = ("dirichlet-zero", "free")


@dataclass(frozen=True)
class GridSpec:
    n: int
    spacing: float
    origin: tuple[float, float, float]
    boundary: str = "free"

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        if self.n < 33 or self.n % 2 == 0:
            raise InvalidGrid(f"n must be odd and >= 33, got {self.n}")
        if not self.spacing > 0:
            raise InvalidGrid("spacing must be > 0")
        if self.boundary not in BOUNDARIES:
            raise InvalidGrid(f"boundary must be one of {BOUNDARIES}")

    @classmethod
    def centered(cls, n: int, length: float, center=(0.0, 0.0, 0.0), boundary: str = "free") -> "GridSpec":
        """Grid of ``n`` nodes per axis spanning ``length`` with a node at ``center``."""
        h = length / (n - 1)
        origin = tuple(c - 0.5 * length for c in center)
        return cls(n, h, origin, boundary)

    @property
    def length(self) -> float:
        return self.spacing * (self.n - 1)

    def axis(self, k: int) -> np.ndarray:
        return self.origin[k] + self.spacing * np.arange(self.n)

    def coordinates(self) -> np.ndarray:
        x, y, z = np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")
        return np.stack([x, y, z], axis=-1)

    def node_index(self, position) -> tuple[int, int, int]:
        pos = np.asarray(position, dtype=float)
        f = (pos - np.asarray(self.origin)) / self.spacing
        idx = np.rint(f)
        if np.any(np.abs(f - idx) > 1e-9) or np.any(idx < 0) or np.any(idx > self.n - 1):
            raise SourceOffGrid(f"position {tuple(pos)} is not a grid node")
        return tuple(int(i) for i in idx)

    def node_position(self, index) -> np.ndarray:
        return np.asarray(self.origin) + self.spacing * np.asarray(index, dtype=float)

    def refined_like(self, n: int) -> "GridSpec":
        """Same physical box with ``n`` nodes per axis."""
        return GridSpec(n, self.length / (n - 1), self.origin, self.boundary)

    def check_contains(self, scene: Scene, margin: float = 0.125):
        """Sources and region cores (center ± 3 semi-axes) must stay ``margin·L`` inside every face."""
        lo = np.asarray(self.origin) + margin * self.length
        hi = np.asarray(self.origin) + (1.0 - margin) * self.length
        pts = [np.asarray(s.position) for s in scene.sources]
        for r in scene.regions:
            c, ax = np.asarray(r.center), np.asarray(r.semi_axes)
            pts += [c - 3 * ax, c + 3 * ax]
        for p in pts:
            if np.any(p < lo - 1e-12) or np.any(p > hi + 1e-12):
                raise InvalidGrid(f"point {tuple(p)} violates the {margin:.0%}-per-face margin of the grid")


@dataclass(frozen=True)
class LatticeField:
    values: np.ndarray
    grid: GridSpec

    def at(self, position) -> float:
        return float(self.values[self.grid.node_index(position)])


@dataclass(frozen=True)
class SolveInfo:
    iterations: int
    residual: float


# ---------------------------------------------------------------------------
# operators


def laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """7-point Laplacian with zero values outside the array."""
    out = -6.0 * u
    out[1:, :, :] += u[:-1, :, :]
    out[:-1, :, :] += u[1:, :, :]
    out[:, 1:, :] += u[:, :-1, :]
    out[:, :-1, :] += u[:, 1:, :]
    out[:, :, 1:] += u[:, :, :-1]
    out[:, :, :-1] += u[:, :, 1:]
    return out / (h * h)


def barrier_on_grid(grid: GridSpec, regions: Sequence[Region]) -> np.ndarray:
    if not regions:
        return np.zeros((grid.n,) * 3)
    return region_field(regions, grid.coordinates())


def apply_operator(field: LatticeField, gamma: float, regions: Sequence[Region]) -> LatticeField:
    """``(Δ_h + γ j) field`` with Dirichlet-zero values outside the grid."""
    jv = barrier_on_grid(field.grid, regions)
    return LatticeField(laplacian(field.values, field.grid.spacing) + gamma * jv * field.values, field.grid)


class _DirichletPoisson:
    """Exact inverse of ``-Δ_h`` with zero ghosts via DST-I."""

    def __init__(self, n: int, h: float):
        k = np.arange(1, n + 1)
        lam1 = (4.0 / (h * h)) * np.sin(0.5 * math.pi * k / (n + 1)) ** 2
        self.inv_eig = 1.0 / (lam1[:, None, None] + lam1[None, :, None] + lam1[None, None, :])

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return scipy.fft.idstn(scipy.fft.dstn(r, type=1) * self.inv_eig, type=1)


def _pcg(apply_A, b, precond, tol, max_iter):
    """Preconditioned CG for SPD ``A``; raises on negative curvature."""
    x = np.zeros_like(b)
    bnorm = math.sqrt(float(np.vdot(b, b)))
    if bnorm == 0.0:
        return x, SolveInfo(0, 0.0)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0.0:
            raise PerturbationTooStrong(
                "operator is not positive definite; the barrier coupling is too strong for a perturbative solve"
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = math.sqrt(float(np.vdot(r, r))) / bnorm
        if res < tol:
            return x, SolveInfo(it, res)
        z = precond(r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NoConvergence(max_iter, res)


def solve_operator(grid: GridSpec, gamma: float, jv: np.ndarray, rhs: np.ndarray,
                   tol: float = 1e-11, max_iter: int = 500, precondition: bool = True):
    """Solve ``-(Δ_h + γ j) u = rhs``."""
    h = grid.spacing
    if gamma != 0.0:
        def apply_A(u):
            return -laplacian(u, h) - gamma * jv * u
    else:
        def apply_A(u):
            return -laplacian(u, h)
    M = _DirichletPoisson(grid.n, h) if precondition else (lambda r: r)
    if not precondition:
        max_iter = max(max_iter, 20 * grid.n)
    return _pcg(apply_A, rhs, M, tol, max_iter)


# ---------------------------------------------------------------------------
# boundary data


def _ghost_faces(grid: GridSpec):
    """Yield (axis, side, positions (n, n, 3)) for the 6 ghost faces."""
    h, n = grid.spacing, grid.n
    ax = [grid.axis(k) for k in range(3)]
    for k in range(3):
        for side, coord in ((0, grid.origin[k] - h), (1, grid.origin[k] + n * h)):
            others = [ax[m] for m in range(3) if m != k]
            A, B = np.meshgrid(others[0], others[1], indexing="ij")
            pts = np.empty((n, n, 3))
            o = [m for m in range(3) if m != k]
            pts[..., k] = coord
            pts[..., o[0]] = A
            pts[..., o[1]] = B
            yield k, side, pts


def _boundary_rhs(grid: GridSpec, ghost_value) -> np.ndarray:
    """Right-hand side contribution ``g/h²`` of prescribed ghost values to ``-Δ_h u``."""
    rhs = np.zeros((grid.n,) * 3)
    h2 = grid.spacing ** 2
    for k, side, pts in _ghost_faces(grid):
        g = ghost_value(pts) / h2
        sl = [slice(None)] * 3
        sl[k] = 0 if side == 0 else grid.n - 1
        rhs[tuple(sl)] += g
    return rhs


def _coulomb(y: np.ndarray):
    def value(pts):
        r = np.linalg.norm(pts - y, axis=-1)
        return 1.0 / (4.0 * math.pi * r)
    return value


def _coulomb_sum(grid: GridSpec, density: np.ndarray, rel_cut: float = 1e-12, face_points: int = 25):
    """Ghost values ``Σ_z h³ ρ(z) / (4π|x - z|)`` over nodes with ``|ρ| > rel_cut·max|ρ|``.

    The sum is evaluated exactly on a ``face_points²`` sub-grid of each face
    and interpolated with bicubic splines; the ghost data are harmonic and
    smooth on the scale of the distance to the source.
    """
    mask = np.abs(density) > rel_cut * np.max(np.abs(density))
    z = grid.coordinates()[mask]
    wq = density[mask] * grid.spacing ** 3 / (4.0 * math.pi)

    zc = z.mean(axis=0)
    zr = z - zc
    z2 = np.einsum("ij,ij->i", zr, zr)

    def direct(flat):
        x = flat - zc
        x2 = np.einsum("ij,ij->i", x, x)
        out = np.zeros(len(flat))
        step = max(1, 8_000_000 // max(len(z), 1))
        for s in range(0, len(flat), step):
            # |x - z|² expanded for BLAS; ghosts are far from the charge so no cancellation
            d2 = x2[s:s + step, None] + z2[None, :] - 2.0 * (x[s:s + step] @ zr.T)
            out[s:s + step] = (1.0 / np.sqrt(d2)) @ wq
        return out

    def value(pts):
        n = pts.shape[0]
        if n <= face_points:
            return direct(pts.reshape(-1, 3)).reshape(pts.shape[:-1])
        sub = np.unique(np.rint(np.linspace(0, n - 1, face_points)).astype(int))
        coarse = direct(pts[np.ix_(sub, sub)].reshape(-1, 3)).reshape(len(sub), len(sub))
        spline = RectBivariateSpline(sub.astype(float), sub.astype(float), coarse, kx=3, ky=3)
        idx = np.arange(n, dtype=float)
        return spline(idx, idx)

    return value


# ---------------------------------------------------------------------------
# solves


def _delta(grid: GridSpec, index) -> np.ndarray:
    rhs = np.zeros((grid.n,) * 3)
    rhs[index] = 1.0 / grid.spacing ** 3
    return rhs


def solve_green(grid: GridSpec, gamma: float, regions: Sequence[Region], source_node,
                tol: float = 1e-11, return_info: bool = False):
    """Lattice propagator from ``source_node``: ``(Δ_h + γ j) G = -δ/h³``.

    With the ``free`` boundary the ghost values are the free continuum field
    ``1/(4π r)``, i.e. the barrier's effect on the boundary data is dropped.
    """
    idx = grid.node_index(source_node)
    rhs = _delta(grid, idx)
    if grid.boundary == "free":
        rhs += _boundary_rhs(grid, _coulomb(grid.node_position(idx)))
    jv = barrier_on_grid(grid, regions)
    values, info = solve_operator(grid, gamma, jv, rhs, tol=tol)
    field = LatticeField(values, grid)
    return (field, info) if return_info else field


def solve_first_order(grid: GridSpec, regions: Sequence[Region], g0: LatticeField,
                      boundary: str | None = None, tol: float = 1e-11) -> LatticeField:
    """First-order field ``G'`` solving ``Δ_h G' = -j G⁰``."""
    boundary = boundary or grid.boundary
    density = barrier_on_grid(grid, regions) * g0.values
    rhs = density.copy()
    if boundary == "free" and np.any(density):
        rhs += _boundary_rhs(grid, _coulomb_sum(grid, density))
    values, _ = solve_operator(grid, 0.0, None, rhs, tol=tol)
    return LatticeField(values, grid)


def _require_regions(scene: Scene):
    validate_scene(scene)
    if not scene.regions:
        raise NoRegions("the correction needs at least one region")


def perturbation_residual(grid: GridSpec, scene: Scene, source_node, probe_node,
                          tol: float = 1e-12) -> tuple[float, float]:
    """``G(γ) - G(0) - γ G'`` at ``probe_node`` for ``γ = scene.gamma`` and ``γ/2``.

    ``G(γ)`` and ``G(0)`` share boundary data, so ``G'`` is solved with zero
    ghosts; the residual is then exactly second order on the lattice.
    """
    _require_regions(scene)
    if not scene.gamma > 0:
        raise ValueError("perturbation_residual needs gamma > 0")
    if grid.node_index(probe_node) == grid.node_index(source_node):
        raise ValueError("probe must differ from the source node")
    g0 = solve_green(grid, 0.0, scene.regions, source_node, tol=tol)
    g1 = solve_first_order(grid, scene.regions, g0, boundary="dirichlet-zero", tol=tol)
    out = []
    for gam in (scene.gamma, 0.5 * scene.gamma):
        g = solve_green(grid, gam, scene.regions, source_node, tol=tol)
        out.append(g.at(probe_node) - g0.at(probe_node) - gam * g1.at(probe_node))
    return out[0], out[1]


def lattice_pair_correction(grid: GridSpec, scene: Scene, j: int, l: int, check_margin: bool = True) -> float:
    """``q_j q_l G'(x_j, x_l)`` from two lattice solves."""
    _require_regions(scene)
    n = len(scene.sources)
    if not (0 <= j < n and 0 <= l < n):
        raise IndexOutOfRange(f"source indices ({j}, {l}) out of range for {n} sources")
    if check_margin:
        grid.check_contains(scene)
    sj, sl = scene.sources[j], scene.sources[l]
    grid.node_index(sl.position)
    g0 = solve_green(grid, 0.0, scene.regions, sj.position)
    g1 = solve_first_order(grid, scene.regions, g0)
    return sj.charge * sl.charge * g1.at(sl.position)


# ---------------------------------------------------------------------------
# field dump

_HEADER = np.dtype([("n", "<i8"), ("spacing", "<f8"), ("origin", "<f8", (3,))])


def dump_field(field: LatticeField, path) -> Path:
    """Write ``path`` (binary) and ``path + '.txt'`` (layout sidecar)."""
    path = Path(path)
    g = field.grid
    header = np.array([(g.n, g.spacing, g.origin)], dtype=_HEADER)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.asarray(field.values, dtype="<f8").ravel(order="F").tobytes())
    Path(str(path) + ".txt").write_text(
        "layout: little-endian\n"
        "header: int64 n; float64 spacing; float64 origin[3]  (40 bytes)\n"
        f"data: {g.n}^3 float64 values, x index fastest, then y, then z\n"
        "node (i,j,k) position: origin + spacing*(i,j,k)\n"
        f"n = {g.n}\nspacing = {g.spacing!r}\norigin = {list(g.origin)!r}\nboundary = {g.boundary}\n"
    )
    return path


def load_field(path, boundary: str = "free") -> LatticeField:
    raw = Path(path).read_bytes()
    header = np.frombuffer(raw[:_HEADER.itemsize], dtype=_HEADER)[0]
    n = int(header["n"])
    values = np.frombuffer(raw[_HEADER.itemsize:], dtype="<f8").reshape((n, n, n), order="F").copy()
    grid = GridSpec(n, float(header["spacing"]), tuple(header["origin"]), boundary)
    return LatticeField(values, grid)
