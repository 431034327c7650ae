"""Importance-sampled Monte Carlo for the first-order barrier correction to
the static interaction energy of point sources.

For a source pair (j, l) the quantity estimated is::

    U'_jl = q_j q_l (2π)⁻⁶ ∫ d³p d³k  exp(i p·x_j + i k·x_l) j~(p + k) / (p² k²)

With ``s = p + k`` and ``u = (p - k)/2`` (unit Jacobian) the integrand factors
into ``j~(s) exp(i s·(x_j + x_l)/2)`` times ``exp(i u·(x_j - x_l)) / (p² k²)``.

Sampling:

* ``s`` is drawn from the normalized mixture of the Gaussian envelopes
  ``|j~_i(s)|``.  Every region integrates to ``(2π)³``, so the regions enter
  with equal mixing weight.
* given ``s``, ``p`` is drawn from ``½ h(p) + ½ h(s - p)`` where ``h`` is
  isotropic with a half-Cauchy radius of scale ``σ = tail_scale·|s|``, i.e.
  ``h(v) ∝ 1 / (v² (1 + v²/σ²))``.  The two components carry the ``1/p²`` and
  ``1/k²`` poles and the joint ``|u|⁻⁴`` tail, so weights stay bounded by
  roughly ``1/|s|`` and the variance is finite.

The estimator is symmetrized over ``p ↔ k`` (which maps the pair (j, l) to
(l, j) and leaves the proposal invariant), so swapping the two sources gives
bit-identical results for a fixed seed.

Every batch owns a child of ``SeedSequence(seed)``; batches are merged by
index, so results do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CoincidentSources, DegenerateSampler, IndexOutOfRange, NoRegions, ValidationError
from .scene import Scene, scale_scene, validate_scene
from .spectral import gaussian_envelope

TWO_PI_M6 = (2.0 * math.pi) ** -6
POLE_GUARD = 1e-30


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 2_000_000
    n_batches: int = 32
    seed: int = 0
    tail_scale: float = 0.7
    threads: int = 1
    chunk_size: int = 1 << 17

    def __post_init__(self):
        if self.n_batches < 8 or self.n_samples < self.n_batches:
            raise ValidationError(
                f"need n_samples >= n_batches >= 8 (got {self.n_samples}, {self.n_batches})"
            )
        if not self.tail_scale > 0:
            raise ValidationError("tail_scale must be > 0")
        if self.threads < 1 or self.chunk_size < 1:
            raise ValidationError("threads and chunk_size must be >= 1")

    def batch_sizes(self) -> list[int]:
        base, extra = divmod(self.n_samples, self.n_batches)
        return [base + (1 if b < extra else 0) for b in range(self.n_batches)]


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    std_error: float
    n_samples: int
    batch_values: tuple[float, ...] = ()

    @classmethod
    def from_batches(cls, batch_values, batch_sizes) -> "IntegralEstimate":
        bv = np.asarray(batch_values, dtype=float)
        sizes = np.asarray(batch_sizes, dtype=float)
        value = float(np.sum(bv * sizes) / np.sum(sizes))
        se = float(np.std(bv, ddof=1) / math.sqrt(len(bv))) if len(bv) > 1 else 0.0
        return cls(value, se, int(np.sum(sizes)), tuple(float(x) for x in bv))

    @property
    def rel_error(self) -> float:
        return abs(self.std_error / self.value) if self.value else math.inf

    def scaled(self, c: float) -> "IntegralEstimate":
        return IntegralEstimate(self.value * c, self.std_error * abs(c), self.n_samples,
                                tuple(c * x for x in self.batch_values))


@dataclass(frozen=True)
class PairCorrection:
    source_index_j: int
    source_index_l: int
    estimate: IntegralEstimate
    imag: IntegralEstimate | None = None
    rejected: int = 0

    @property
    def is_self(self) -> bool:
        return self.source_index_j == self.source_index_l


@dataclass(frozen=True)
class TotalCorrection:
    """``Σ_{j,l} U'_jl`` over ordered pairs plus its per-pair breakdown."""

    estimate: IntegralEstimate
    pairs: tuple[PairCorrection, ...]
    self_part: IntegralEstimate
    cross_part: IntegralEstimate
    imag: IntegralEstimate
    rejected: int = 0


def free_potential(scene: Scene) -> float:
    """Coulomb energy ``Σ_{j<l} q_j q_l / (4π |x_j - x_l|)`` (no self terms)."""
    x = scene.positions
    q = scene.charges
    total = 0.0
    for j in range(len(q)):
        for l in range(j + 1, len(q)):
            r = float(np.linalg.norm(x[j] - x[l]))
            if r == 0.0:
                raise CoincidentSources(j, l)
            total += q[j] * q[l] / (4.0 * math.pi * r)
    return total


# ---------------------------------------------------------------------------
# sampler


def _unit_vectors(rng: np.random.Generator, m: int) -> np.ndarray:
    v = rng.standard_normal((m, 3))
    n = np.linalg.norm(v, axis=1, keepdims=True)
    n[n == 0.0] = 1.0
    return v / n


def _radial_density(v2: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    # isotropic density in d³v whose radius is half-Cauchy(σ)
    return 1.0 / (2.0 * math.pi**2 * sigma * v2 * (1.0 + v2 / sigma**2))


class _Problem:
    """Geometry shared by every batch: regions and the requested pairs."""

    def __init__(self, scene: Scene, pairs: Sequence[tuple[int, int]]):
        self.regions = scene.regions
        self.axes = np.array([r.semi_axes for r in scene.regions], dtype=float)
        self.centers = np.array([r.center for r in scene.regions], dtype=float)
        self.vol = np.array([r.volume_factor for r in scene.regions], dtype=float)
        # N_i(s) = env_i(s) / ∫env_i = env_i(s) * abc / (8 π^{3/2})
        self.norm = np.prod(self.axes, axis=1) / (8.0 * math.pi**1.5)
        x = scene.positions
        q = scene.charges
        self.pairs = list(pairs)
        self.mid = np.array([0.5 * (x[j] + x[l]) for j, l in pairs]).reshape(-1, 3)
        self.delta = np.array([x[j] - x[l] for j, l in pairs]).reshape(-1, 3)
        self.coef = np.array([q[j] * q[l] * TWO_PI_M6 for j, l in pairs])


def _sample_chunk(prob: _Problem, rng: np.random.Generator, m: int, tau: float):
    """Return real and imaginary weights (n_pairs, m) and the rejection count."""
    nreg = len(prob.regions)
    comp = rng.integers(nreg, size=m) if nreg > 1 else np.zeros(m, dtype=np.intp)
    s = rng.standard_normal((m, 3)) * (math.sqrt(2.0) / prob.axes[comp])
    snorm = np.linalg.norm(s, axis=1)
    sigma = tau * snorm
    radius = sigma * np.tan(0.5 * math.pi * rng.random(m))
    v = radius[:, None] * _unit_vectors(rng, m)
    flip = rng.random(m) < 0.5
    p = np.where(flip[:, None], s - v, v)
    k = s - p
    p2 = np.einsum("ij,ij->i", p, p)
    k2 = np.einsum("ij,ij->i", k, k)
    bad = (p2 < POLE_GUARD) | (k2 < POLE_GUARD) | ~np.isfinite(radius) | (snorm == 0.0)
    ok = ~bad
    p2s = np.where(ok, p2, 1.0)
    k2s = np.where(ok, k2, 1.0)
    sig = np.where(ok, sigma, 1.0)

    env = np.empty((nreg, m))
    for i, r in enumerate(prob.regions):
        env[i] = gaussian_envelope(r, s)
    g = np.einsum("i,im->m", prob.norm, env) / nreg
    q = 0.5 * (_radial_density(p2s, sig) + _radial_density(k2s, sig))
    base = np.where(ok, 1.0 / (p2s * k2s * g * q), 0.0)

    u = 0.5 * (p - k)
    npairs = len(prob.pairs)
    re = np.empty((npairs, m))
    im = np.empty((npairs, m))
    for a in range(npairs):
        # j~(s) exp(i s·mid) = Σ_i V_i env_i(s) exp(i s·(mid - X_i))
        phase = (prob.mid[a] - prob.centers) @ s.T
        amp = prob.vol[:, None] * env
        sre = np.sum(amp * np.cos(phase), axis=0)
        sim = np.sum(amp * np.sin(phase), axis=0)
        cb = np.cos(np.abs(u @ prob.delta[a]))
        w = prob.coef[a] * base * cb
        re[a] = w * sre
        im[a] = w * sim
    return re, im, int(np.count_nonzero(bad))


def _run_batch(prob: _Problem, seedseq: np.random.SeedSequence, size: int, cfg: McConfig):
    rng = np.random.Generator(np.random.PCG64(seedseq))
    npairs = len(prob.pairs)
    sum_re = np.zeros(npairs)
    sum_im = np.zeros(npairs)
    rejected = 0
    done = 0
    while done < size:
        m = min(cfg.chunk_size, size - done)
        re, im, rej = _sample_chunk(prob, rng, m, cfg.tail_scale)
        sum_re += re.sum(axis=1)
        sum_im += im.sum(axis=1)
        rejected += rej
        done += m
    return sum_re / size, sum_im / size, rejected


def _check_pair_args(scene: Scene, pairs):
    validate_scene(scene)
    if not scene.regions:
        raise NoRegions("the correction needs at least one region")
    n = len(scene.sources)
    for j, l in pairs:
        if not (0 <= j < n and 0 <= l < n):
            raise IndexOutOfRange(f"source indices ({j}, {l}) out of range for {n} sources")


def _estimate_pairs(scene: Scene, pairs, cfg: McConfig):
    _check_pair_args(scene, pairs)
    prob = _Problem(scene, pairs)
    sizes = cfg.batch_sizes()
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_batches)
    jobs = list(zip(seeds, sizes))
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(lambda job: _run_batch(prob, job[0], job[1], cfg), jobs))
    else:
        results = [_run_batch(prob, sq, n, cfg) for sq, n in jobs]
    bre = np.array([r[0] for r in results])  # (n_batches, n_pairs)
    bim = np.array([r[1] for r in results])
    rejected = sum(r[2] for r in results)
    if rejected == cfg.n_samples:
        raise DegenerateSampler("every sample was rejected at a propagator pole")
    return bre, bim, sizes, rejected


def pair_correction(scene: Scene, j: int, l: int, cfg: McConfig) -> PairCorrection:
    bre, bim, sizes, rejected = _estimate_pairs(scene, [(j, l)], cfg)
    return PairCorrection(
        j, l,
        IntegralEstimate.from_batches(bre[:, 0], sizes),
        IntegralEstimate.from_batches(bim[:, 0], sizes),
        rejected,
    )


def total_correction(scene: Scene, cfg: McConfig) -> TotalCorrection:
    """All pairs are evaluated on one shared sample set; the error of the
    total is taken from batch totals, so pair correlations are included."""
    n = len(scene.sources)
    if n == 0:
        raise ValidationError("at least one source is required")
    pairs = [(j, l) for j in range(n) for l in range(j, n)]
    bre, bim, sizes, rejected = _estimate_pairs(scene, pairs, cfg)
    mult = np.array([1.0 if j == l else 2.0 for j, l in pairs])
    is_self = np.array([j == l for j, l in pairs])
    records = tuple(
        PairCorrection(j, l, IntegralEstimate.from_batches(bre[:, a], sizes),
                       IntegralEstimate.from_batches(bim[:, a], sizes), rejected)
        for a, (j, l) in enumerate(pairs)
    )
    total = IntegralEstimate.from_batches(bre @ mult, sizes)
    self_part = IntegralEstimate.from_batches(bre[:, is_self] @ mult[is_self], sizes)
    cross_part = IntegralEstimate.from_batches(bre[:, ~is_self] @ mult[~is_self], sizes)
    imag = IntegralEstimate.from_batches(bim @ mult, sizes)
    return TotalCorrection(total, records, self_part, cross_part, imag, rejected)


# ---------------------------------------------------------------------------
# rescaling


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    exponent_error: float
    prefactor: float


def fit_power_law(lambdas, values, errors=None) -> PowerLawFit:
    """Weighted least squares of ``log|value|`` against ``log λ``."""
    x = np.log(np.asarray(lambdas, dtype=float))
    vals = np.abs(np.asarray(values, dtype=float))
    y = np.log(vals)
    if errors is not None and np.all(np.asarray(errors) > 0):
        sig = np.asarray(errors, dtype=float) / vals
    else:
        sig = np.ones_like(y)
    A = np.stack([x, np.ones_like(x)], axis=1) / sig[:, None]
    coef, *_ = np.linalg.lstsq(A, y / sig, rcond=None)
    cov = np.linalg.pinv(A.T @ A)
    if errors is None or not np.all(np.asarray(errors) > 0):
        dof = max(len(x) - 2, 1)
        resid = y - (coef[0] * x + coef[1])
        cov = cov * float(resid @ resid) / dof
    return PowerLawFit(float(coef[0]), float(math.sqrt(max(cov[0, 0], 0.0))), float(math.exp(coef[1])))


@dataclass(frozen=True)
class SweepResult:
    lambdas: tuple[float, ...]
    estimates: tuple[IntegralEstimate, ...]
    fit: PowerLawFit

    def rows(self):
        return list(zip(self.lambdas, self.estimates))


def scaling_sweep(scene: Scene, lambdas: Sequence[float], cfg) -> SweepResult:
    """Total correction on ``scale_scene(scene, λ)`` for each λ, plus a power-law fit.

    ``cfg`` selects the evaluator: :class:`McConfig` for Monte Carlo, a
    ``BornQuadSpec`` for the deterministic position-space quadrature.
    """
    from .born import BornQuadSpec, born_total

    lambdas = [float(lam) for lam in lambdas]
    ests = []
    for lam in lambdas:
        scaled = scale_scene(scene, lam)
        if isinstance(cfg, BornQuadSpec):
            bt = born_total(scaled, cfg)
            ests.append(IntegralEstimate(bt.value, 0.0, 0))
        else:
            ests.append(total_correction(scaled, cfg).estimate)
    errs = [e.std_error for e in ests]
    fit = fit_power_law(lambdas, [e.value for e in ests], errs if all(x > 0 for x in errs) else None)
    return SweepResult(tuple(lambdas), tuple(ests), fit)
