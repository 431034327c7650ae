"""Forces from central differences of the barrier energy ``γ U'``.

The deterministic position-space evaluator is the default.  With a
:class:`~bornbarrier.montecarlo.McConfig` both sides of each difference reuse
the same seed (common random numbers), which cancels most of the noise.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .born import BornQuadSpec, born_total
from .errors import IndexOutOfRange, ValidationError
from .montecarlo import McConfig, total_correction
from .scene import PointSource, Region, Scene, validate_scene


def correction_energy(scene: Scene, cfg=None) -> float:
    """Total ``U'`` from the chosen evaluator (Born quadrature by default)."""
    if cfg is None:
        cfg = BornQuadSpec()
    if isinstance(cfg, McConfig):
        return total_correction(scene, cfg).estimate.value
    return born_total(scene, cfg).value


def default_step(scene: Scene) -> float:
    """``1e-2`` times the smallest length in the scene."""
    lengths = [ax for r in scene.regions for ax in r.semi_axes]
    pts = [np.asarray(s.position) for s in scene.sources] + [np.asarray(r.center) for r in scene.regions]
    for a, b in itertools.combinations(pts, 2):
        d = float(np.linalg.norm(a - b))
        if d > 0:
            lengths.append(d)
    return 1e-2 * min(lengths)


def _moved_region(scene: Scene, i: int, k: int, dx: float) -> Scene:
    regions = list(scene.regions)
    c = list(regions[i].center)
    c[k] += dx
    regions[i] = Region(tuple(c), regions[i].semi_axes)
    return scene.replace(regions=regions)


def _moved_source(scene: Scene, i: int, k: int, dx: float) -> Scene:
    sources = list(scene.sources)
    p = list(sources[i].position)
    p[k] += dx
    sources[i] = PointSource(sources[i].charge, tuple(p))
    return scene.replace(sources=sources)


def _gradient(scene: Scene, mover, index: int, h: float, cfg) -> np.ndarray:
    grad = np.zeros(3)
    for k in range(3):
        up = correction_energy(mover(scene, index, k, h), cfg)
        down = correction_energy(mover(scene, index, k, -h), cfg)
        grad[k] = (up - down) / (2.0 * h)
    return grad


def force(scene: Scene, region_index: int, h: float | None = None, cfg=None) -> np.ndarray:
    """``-γ ∂U'/∂X`` for the center ``X`` of region ``region_index``."""
    validate_scene(scene)
    if not 0 <= region_index < len(scene.regions):
        raise IndexOutOfRange(f"region index {region_index} out of range")
    h = default_step(scene) if h is None else float(h)
    if not h > 0:
        raise ValidationError("finite-difference step must be > 0")
    return -scene.gamma * _gradient(scene, _moved_region, region_index, h, cfg)


def source_force(scene: Scene, source_index: int, h: float | None = None, cfg=None) -> np.ndarray:
    """Barrier-induced force ``-γ ∂U'/∂x_j`` on source ``source_index``."""
    validate_scene(scene)
    if not 0 <= source_index < len(scene.sources):
        raise IndexOutOfRange(f"source index {source_index} out of range")
    h = default_step(scene) if h is None else float(h)
    if not h > 0:
        raise ValidationError("finite-difference step must be > 0")
    return -scene.gamma * _gradient(scene, _moved_source, source_index, h, cfg)


def force_balance(scene: Scene, h: float | None = None, cfg=None):
    """Sum of all region and source forces and the largest single force magnitude.

    The barrier energy depends only on relative positions, so the sum
    vanishes up to differencing error.
    """
    forces = [force(scene, i, h, cfg) for i in range(len(scene.regions))]
    forces += [source_force(scene, j, h, cfg) for j in range(len(scene.sources))]
    total = np.sum(forces, axis=0)
    scale = max(float(np.linalg.norm(f)) for f in forces)
    return total, scale, forces
