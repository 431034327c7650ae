"""Problem instances: Gaussian barrier regions, static point sources and the
coupling that multiplies the barrier term.

All types are frozen dataclasses holding plain tuples, so a scene can be
shared between worker threads without copying.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadConfig,
    CoincidentSources,
    NegativeGamma,
    NonPositiveAxis,
    NonPositiveLambda,
)

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

Vec3 = tuple[float, float, float]


def _vec3(v, name="vector") -> Vec3:
    arr = tuple(float(x) for x in v)
    if len(arr) != 3:
        raise ValueError(f"{name} must have 3 components, got {len(arr)}")
    return arr  # type: ignore[return-value]


@dataclass(frozen=True)
class Region:
    """Axis-aligned Gaussian barrier ``exp(-dx²/a² - dy²/b² - dz²/c²)``."""

    center: Vec3
    semi_axes: Vec3

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "semi_axes", _vec3(self.semi_axes, "semi_axes"))

    @property
    def volume_factor(self) -> float:
        """``pi**1.5 * a*b*c``, the integral of the barrier over space."""
        a, b, c = self.semi_axes
        return math.pi**1.5 * a * b * c

    @property
    def max_axis(self) -> float:
        return max(self.semi_axes)


@dataclass(frozen=True)
class PointSource:
    charge: float
    position: Vec3

    def __post_init__(self):
        object.__setattr__(self, "charge", float(self.charge))
        object.__setattr__(self, "position", _vec3(self.position, "position"))


@dataclass(frozen=True)
class Scene:
    gamma: float
    regions: tuple[Region, ...] = field(default_factory=tuple)
    sources: tuple[PointSource, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sources], dtype=float).reshape(-1, 3)

    @property
    def charges(self) -> np.ndarray:
        return np.array([s.charge for s in self.sources], dtype=float)

    def replace(self, **changes) -> "Scene":
        kw = dict(gamma=self.gamma, regions=self.regions, sources=self.sources)
        kw.update(changes)
        return Scene(**kw)


def validate_scene(scene: Scene) -> Scene:
    """Return ``scene`` unchanged if every invariant holds, else raise."""
    if not scene.gamma >= 0.0:
        raise NegativeGamma(scene.gamma)
    for i, r in enumerate(scene.regions):
        if not all(ax > 0.0 and math.isfinite(ax) for ax in r.semi_axes):
            raise NonPositiveAxis(i, r.semi_axes)
    for i, si in enumerate(scene.sources):
        for j in range(i + 1, len(scene.sources)):
            if si.position == scene.sources[j].position:
                raise CoincidentSources(i, j)
    return scene


def _scale_vec(v: Vec3, lam: float) -> Vec3:
    return (v[0] * lam, v[1] * lam, v[2] * lam)


def scale_scene(scene: Scene, lam: float) -> Scene:
    """Multiply every length (centers, semi-axes, positions) by ``lam``."""
    lam = float(lam)
    if not lam > 0.0:
        raise NonPositiveLambda(lam)
    regions = [Region(_scale_vec(r.center, lam), _scale_vec(r.semi_axes, lam)) for r in scene.regions]
    sources = [PointSource(s.charge, _scale_vec(s.position, lam)) for s in scene.sources]
    return scene.replace(regions=regions, sources=sources)


def translate_scene(scene: Scene, t: Sequence[float]) -> Scene:
    """Shift all region centers and source positions jointly by ``t``."""
    t = _vec3(t, "translation")

    def shift(v):
        return (v[0] + t[0], v[1] + t[1], v[2] + t[2])

    regions = [Region(shift(r.center), r.semi_axes) for r in scene.regions]
    sources = [PointSource(s.charge, shift(s.position)) for s in scene.sources]
    return scene.replace(regions=regions, sources=sources)


# ---------------------------------------------------------------------------
# Config files
#
#   [gamma]
#   value = 0.01
#
#   [[region]]
#   center = [0.0, 0.0, 0.0]
#   semi_axes = [1.0, 1.0, 1.0]
#
#   [[source]]
#   charge = 1.0
#   position = [2.0, 0.0, 0.0]
#
# A bare top-level ``gamma = 0.01`` is accepted as well.
# ---------------------------------------------------------------------------


def _block_lines(text: str, header: str) -> list[int]:
    pat = re.compile(r"^\s*\[\[\s*" + header + r"\s*\]\]")
    return [i + 1 for i, line in enumerate(text.splitlines()) if pat.match(line)]


def _field_line(text: str, block_line: int | None, key: str) -> int | None:
    """Line of ``key = ...`` inside the block starting at ``block_line``."""
    if block_line is None:
        return None
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    lines = text.splitlines()
    for i in range(block_line, len(lines)):
        if lines[i].lstrip().startswith("["):
            break
        if pat.match(lines[i]):
            return i + 1
    return block_line


def _gamma_line(text: str) -> int | None:
    for i, line in enumerate(text.splitlines()):
        if re.match(r"^\s*(\[\s*gamma\s*\]|gamma\s*=)", line):
            return i + 1
    return None


def parse_scene(text: str, path=None) -> Scene:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise BadConfig(f"syntax error: {exc}", path=path, line=line) from None

    unknown = set(data) - {"gamma", "region", "source"}
    if unknown:
        raise BadConfig(f"unknown block(s): {sorted(unknown)}", path=path, field=sorted(unknown)[0])

    g = data.get("gamma")
    gline = _gamma_line(text)
    if g is None:
        raise BadConfig("missing gamma", path=path, field="gamma")
    if isinstance(g, dict):
        if "value" not in g:
            raise BadConfig("[gamma] block needs 'value'", path=path, line=gline, field="gamma")
        g = g["value"]
    if isinstance(g, bool) or not isinstance(g, (int, float)):
        raise BadConfig("gamma must be a number", path=path, line=gline, field="gamma")

    def vector(block, key, kind, idx, line):
        if key not in block:
            raise BadConfig(f"{kind} {idx}: missing '{key}'", path=path, line=line, field=key)
        v = block[key]
        line = _field_line(text, line, key)
        if not isinstance(v, list) or len(v) != 3 or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
        ):
            raise BadConfig(f"{kind} {idx}: '{key}' must be a list of 3 numbers", path=path, line=line, field=key)
        return v

    regions = []
    rlines = _block_lines(text, "region")
    for i, block in enumerate(data.get("region", [])):
        line = rlines[i] if i < len(rlines) else None
        extra = set(block) - {"center", "semi_axes"}
        if extra:
            raise BadConfig(f"region {i}: unknown field(s) {sorted(extra)}", path=path, line=line, field=sorted(extra)[0])
        regions.append(Region(vector(block, "center", "region", i, line), vector(block, "semi_axes", "region", i, line)))

    sources = []
    slines = _block_lines(text, "source")
    for i, block in enumerate(data.get("source", [])):
        line = slines[i] if i < len(slines) else None
        extra = set(block) - {"charge", "position"}
        if extra:
            raise BadConfig(f"source {i}: unknown field(s) {sorted(extra)}", path=path, line=line, field=sorted(extra)[0])
        q = block.get("charge")
        if isinstance(q, bool) or not isinstance(q, (int, float)):
            raise BadConfig(f"source {i}: 'charge' must be a number", path=path,
                            line=_field_line(text, line, "charge"), field="charge")
        sources.append(PointSource(q, vector(block, "position", "source", i, line)))

    return Scene(g, regions, sources)


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise BadConfig(f"cannot read scene file: {exc.strerror}", path=path) from None
    return parse_scene(text, path=path)


def _fmt_vec(v: Iterable[float]) -> str:
    return "[" + ", ".join(repr(float(x)) for x in v) + "]"


def dump_scene(scene: Scene) -> str:
    """Canonical text form; floats use ``repr`` so round trips are exact."""
    out = ["[gamma]", f"value = {float(scene.gamma)!r}", ""]
    for r in scene.regions:
        out += ["[[region]]", f"center = {_fmt_vec(r.center)}", f"semi_axes = {_fmt_vec(r.semi_axes)}", ""]
    for s in scene.sources:
        out += ["[[source]]", f"charge = {float(s.charge)!r}", f"position = {_fmt_vec(s.position)}", ""]
    return "\n".join(out)


def scene_digest(scene: Scene) -> str:
    return hashlib.sha256(dump_scene(scene).encode()).hexdigest()
