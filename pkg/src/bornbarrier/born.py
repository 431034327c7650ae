"""Position-space first-order correction, used as an oracle for the
momentum-space Monte Carlo.

For static sources the time integrals turn each free propagator into the
Coulomb kernel ``1/(4π r)`` and the pair term becomes::

    U'_jl = q_j q_l (4π)⁻² ∫ d³z j(z) / (|x_j - z| |z - x_l|)

Each region is integrated on its own tensor grid spanning
``center ± half_extent_factor · semi_axes``; the region sum is taken last, so
the result is exactly additive over regions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import IndexOutOfRange, NoRegions, SourceInsideQuadNode, ValidationError
from .scene import Region, Scene, validate_scene

FOUR_PI_M2 = (4.0 * math.pi) ** -2


@dataclass(frozen=True)
class BornQuadSpec:
    half_extent_factor: float = 6.0
    n_points: int = 96
    rule: str = "gauss-legendre"
    slab: int = 8

    def __post_init__(self):
        if self.half_extent_factor < 6.0:
            raise ValidationError("half_extent_factor must be >= 6")
        if self.n_points < 2:
            raise ValidationError("n_points must be >= 2")
        if self.rule not in ("midpoint", "gauss-legendre"):
            raise ValidationError(f"unknown rule {self.rule!r}")

    def refined(self, factor: int = 2) -> "BornQuadSpec":
        return BornQuadSpec(self.half_extent_factor, self.n_points * factor, self.rule, self.slab)


@lru_cache(maxsize=32)
def _reference_rule(rule: str, n: int):
    """Nodes and weights on [-1, 1]."""
    if rule == "gauss-legendre":
        t, w = np.polynomial.legendre.leggauss(n)
    else:
        t = -1.0 + (2.0 * np.arange(n) + 1.0) / n
        w = np.full(n, 2.0 / n)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def _axis_rules(region: Region, spec: BornQuadSpec, shift: float = 0.0):
    t, w = _reference_rule(spec.rule, spec.n_points)
    out = []
    for k in range(3):
        half = spec.half_extent_factor * region.semi_axes[k]
        # nodes relative to the center; absolute positions are never formed
        out.append(((t + shift) * half, w * half))
    return out


def _region_grid(region: Region, sources: np.ndarray, spec: BornQuadSpec):
    """Axis rules for ``region``, offset if a node would land on a source."""
    for attempt in range(4):
        shift = 0.0 if attempt == 0 else 1e-3 * attempt / spec.n_points
        rules = _axis_rules(region, spec, shift)
        hit = False
        for x in sources:
            d = x - np.asarray(region.center)
            close = True
            for k, (nodes, _) in enumerate(rules):
                tol = 1e-9 * (nodes[-1] - nodes[0]) / spec.n_points
                if np.min(np.abs(nodes - d[k])) > tol:
                    close = False
                    break
            if close:
                hit = True
                break
        if not hit:
            return rules
    raise SourceInsideQuadNode("could not offset the quadrature grid away from a source")


def _region_pair_integrals(region: Region, rel_sources: np.ndarray, pairs, rules, slab: int) -> np.ndarray:
    """``∫ j(z) / (|x_j - z||z - x_l|)`` for each pair over one region's grid.

    ``rel_sources`` are source positions relative to the region center.
    Slabs along the first axis are reduced in index order.
    """
    (tx, wx), (ty, wy), (tz, wz) = rules
    a, b, c = region.semi_axes
    gy = np.exp(-(ty / b) ** 2) * wy
    gz = np.exp(-(tz / c) ** 2) * wz
    wyz = gy[:, None] * gz[None, :]
    used = sorted({i for pr in pairs for i in pr})
    out = np.zeros(len(pairs))
    for start in range(0, len(tx), slab):
        xs = tx[start:start + slab]
        wxs = np.exp(-(xs / a) ** 2) * wx[start:start + slab]
        W = wxs[:, None, None] * wyz[None, :, :]
        inv = {}
        for i in used:
            dx = (xs - rel_sources[i, 0])[:, None, None]
            dy = (ty - rel_sources[i, 1])[None, :, None]
            dz = (tz - rel_sources[i, 2])[None, None, :]
            inv[i] = 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
        for n, (j, l) in enumerate(pairs):
            out[n] += np.sum(W * inv[j] * inv[l])
    return out


def _check(scene: Scene, pairs):
    validate_scene(scene)
    if not scene.regions:
        raise NoRegions("the correction needs at least one region")
    n = len(scene.sources)
    for j, l in pairs:
        if not (0 <= j < n and 0 <= l < n):
            raise IndexOutOfRange(f"source indices ({j}, {l}) out of range for {n} sources")


def _warn_deep_sources(scene: Scene):
    from .spectral import characteristic_value

    for i, s in enumerate(scene.sources):
        for r in scene.regions:
            if characteristic_value(r, s.position) > math.exp(-4.0):
                warnings.warn(
                    f"source {i} lies within 2 semi-axes of a region center; "
                    "quadrature accuracy degrades near the kernel singularity",
                    RuntimeWarning,
                    stacklevel=3,
                )
                return


def born_pair_values(scene: Scene, pairs, spec: BornQuadSpec) -> np.ndarray:
    """Per-region contributions, shape ``(n_regions, n_pairs)``, charges included."""
    _check(scene, pairs)
    _warn_deep_sources(scene)
    x = scene.positions
    q = scene.charges
    coef = np.array([q[j] * q[l] * FOUR_PI_M2 for j, l in pairs])
    rows = []
    for r in scene.regions:
        rel = x - np.asarray(r.center)
        rules = _region_grid(r, x, spec)
        rows.append(coef * _region_pair_integrals(r, rel, pairs, rules, spec.slab))
    return np.array(rows)


def _sym(j, l):
    return (j, l) if j <= l else (l, j)


def born_pair_correction(scene: Scene, j: int, l: int, spec: BornQuadSpec = BornQuadSpec()) -> float:
    # the integrand is symmetric; evaluating the canonical order makes (j,l) and (l,j) identical
    per_region = born_pair_values(scene, [_sym(j, l)], spec)
    total = 0.0
    for v in per_region[:, 0]:
        total += float(v)
    return total


@dataclass(frozen=True)
class BornTotal:
    value: float
    pairs: tuple[tuple[int, int, float], ...]
    self_part: float
    cross_part: float
    per_region: tuple[float, ...]


def born_total(scene: Scene, spec: BornQuadSpec = BornQuadSpec()) -> BornTotal:
    """Ordered double sum ``Σ_{j,l} U'_jl`` (cross pairs counted twice)."""
    n = len(scene.sources)
    if n == 0:
        raise ValidationError("at least one source is required")
    pairs = [(j, l) for j in range(n) for l in range(j, n)]
    per_region = born_pair_values(scene, pairs, spec)
    pair_vals = [0.0] * len(pairs)
    for row in per_region:
        for a in range(len(pairs)):
            pair_vals[a] += float(row[a])
    self_part = sum(v for (j, l), v in zip(pairs, pair_vals) if j == l)
    cross_part = 2.0 * sum(v for (j, l), v in zip(pairs, pair_vals) if j != l)
    mult = [1.0 if j == l else 2.0 for j, l in pairs]
    region_totals = tuple(float(np.dot(row, mult)) for row in per_region)
    return BornTotal(
        self_part + cross_part,
        tuple((j, l, v) for (j, l), v in zip(pairs, pair_vals)),
        self_part,
        cross_part,
        region_totals,
    )


@dataclass(frozen=True)
class BornConvergence:
    n_points: tuple[int, ...]
    values: tuple[float, ...]
    changes: tuple[float, ...]

    @property
    def monotone(self) -> bool:
        c = [abs(x) for x in self.changes]
        return all(c[i + 1] < c[i] for i in range(len(c) - 1))


def born_convergence(scene: Scene, spec: BornQuadSpec = BornQuadSpec(), levels: int = 3) -> BornConvergence:
    """Totals for ``n, 2n, 4n, ...`` points per axis and the successive changes."""
    ns, vals = [], []
    s = spec
    for _ in range(levels):
        ns.append(s.n_points)
        vals.append(born_total(scene, s).value)
        s = s.refined(2)
    changes = tuple(vals[i + 1] - vals[i] for i in range(len(vals) - 1))
    return BornConvergence(tuple(ns), tuple(vals), changes)
