"""Fourier transforms of the Gaussian barrier function.

Convention used throughout the package::

    j~(p) = ∫ d³x exp(-i p·x) j(x),     j(x) = (2π)⁻³ ∫ d³p exp(+i p·x) j~(p)

Functions accept a single 3-vector or an ``(..., 3)`` array of points.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import EmptyRegionList, InsufficientExtent, InsufficientResolution
from .scene import Region


def characteristic_value(region: Region, x) -> np.ndarray | float:
    """Barrier value ``exp(-Σ (x_k - X_k)² / a_k²)``, in (0, 1]."""
    x = np.asarray(x, dtype=float)
    d = (x - np.asarray(region.center)) / np.asarray(region.semi_axes)
    val = np.exp(-np.sum(d * d, axis=-1))
    return float(val) if val.ndim == 0 else val


def region_field(regions: Sequence[Region], x) -> np.ndarray:
    """Sum of the barrier values of ``regions`` at ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for r in regions:
        out = out + characteristic_value(r, x)
    return out


def gaussian_envelope(region: Region, p) -> np.ndarray:
    """``exp(-(a²px² + b²py² + c²pz²)/4)``, the modulus of the transform up to the volume factor."""
    p = np.asarray(p, dtype=float)
    ap = p * np.asarray(region.semi_axes)
    return np.exp(-0.25 * np.sum(ap * ap, axis=-1))


def gaussian_transform(region: Region, p) -> np.ndarray | complex:
    p = np.asarray(p, dtype=float)
    phase = np.tensordot(p, np.asarray(region.center), axes=([-1], [0]))
    val = region.volume_factor * gaussian_envelope(region, p) * np.exp(-1j * phase)
    return complex(val) if val.ndim == 0 else val


def multi_region_transform(regions: Sequence[Region], p) -> np.ndarray | complex:
    if len(regions) == 0:
        raise EmptyRegionList("at least one region is required")
    total = gaussian_transform(regions[0], p)
    for r in regions[1:]:
        total = total + gaussian_transform(r, p)
    return total


def numeric_transform(region: Region, p, half_extent: float, n_points: int, rule: str = "trapezoid") -> complex:
    """Brute-force quadrature of ``∫ d³x exp(-ip·x) j(x)`` on a cube around the center.

    The full ``n_points³`` tensor grid is evaluated; nothing exploits the
    separability of the Gaussian, so this stays an independent check of
    :func:`gaussian_transform`.
    """
    if half_extent < 6.0 * region.max_axis:
        raise InsufficientExtent(
            f"half_extent {half_extent} < 6 * max semi-axis ({6.0 * region.max_axis})"
        )
    if n_points < 32:
        raise InsufficientResolution(f"n_points must be >= 32, got {n_points}")
    p = np.asarray(p, dtype=float)
    if rule == "trapezoid":
        t = np.linspace(-half_extent, half_extent, n_points)
        w = np.full(n_points, t[1] - t[0])
        w[0] *= 0.5
        w[-1] *= 0.5
    elif rule == "midpoint":
        h = 2.0 * half_extent / n_points
        t = -half_extent + h * (np.arange(n_points) + 0.5)
        w = np.full(n_points, h)
    else:
        raise ValueError(f"unknown rule {rule!r}")

    cx, cy, cz = region.center
    X, Y, Z = np.meshgrid(t + cx, t + cy, t + cz, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1)
    W = w[:, None, None] * w[None, :, None] * w[None, None, :]
    integrand = characteristic_value(region, pts) * np.exp(-1j * (pts @ p))
    return complex(np.sum(W * integrand))
