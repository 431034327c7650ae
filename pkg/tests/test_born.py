import math
import warnings

import numpy as np
import pytest

from bornbarrier.born import BornQuadSpec, born_convergence, born_pair_correction, born_pair_values, born_total
from bornbarrier.errors import IndexOutOfRange, NoRegions, SourceInsideQuadNode, ValidationError
from bornbarrier.scene import PointSource, Region, Scene, scale_scene, translate_scene

PREF = math.pi**1.5 / (4 * math.pi) ** 2


def small_region_scene(eps, x=(1, 0, 0), y=(0, 1, 0)):
    return Scene(1.0, [Region((0, 0, 0), (eps, eps, eps))], [PointSource(1, x), PointSource(1, y)])


def taylor_ratio(eps, x, y):
    """1 + (ε²/2) x·y/(|x|²|y|²): second-order expansion of the Gaussian average of 1/(|x-z||y-z|)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    return 1 + 0.5 * eps**2 * (x @ y) / ((x @ x) * (y @ y))


@pytest.mark.parametrize("eps", [0.05, 0.1])
@pytest.mark.parametrize("x,y", [((1, 0, 0), (0, 1, 0)), ((1, 0, 0), (0.6, 0.8, 0)), ((0, 2, 0), (0, 2, 0))])
def test_point_barrier_second_order(eps, x, y):
    s = small_region_scene(eps, x, y)
    j, l = (0, 1) if x != y else (0, 0)
    if x == y:
        s = Scene(1.0, s.regions, [PointSource(1, x)])
    d1, d2 = np.linalg.norm(x), np.linalg.norm(y)
    lead = PREF * eps**3 / (d1 * d2)
    val = born_pair_correction(s, j, l, BornQuadSpec(n_points=48))
    # remaining error is O(ε⁴)
    assert val / lead == pytest.approx(taylor_ratio(eps, x, y), abs=3 * eps**4)


def test_self_term_point_limit():
    eps, d = 0.02, 1.5
    s = Scene(1.0, [Region((0, 0, 0), (eps, eps, eps))], [PointSource(1, (0, 0, d))])
    assert born_pair_correction(s, 0, 0, BornQuadSpec(n_points=32)) == pytest.approx(
        PREF * eps**3 / d**2, rel=1e-3)


def test_doubling_lengths_doubles(unit_scene):
    spec = BornQuadSpec(n_points=48)
    a = born_total(unit_scene, spec).value
    b = born_total(scale_scene(unit_scene, 2.0), spec).value
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_total_expansion(unit_scene):
    spec = BornQuadSpec(n_points=48)
    bt = born_total(unit_scene, spec)
    u01 = born_pair_correction(unit_scene, 0, 1, spec)
    u00 = born_pair_correction(unit_scene, 0, 0, spec)
    u11 = born_pair_correction(unit_scene, 1, 1, spec)
    assert bt.value == pytest.approx(2 * u01 + u00 + u11, rel=1e-14)


def test_linearity_in_regions_exact(desk_scene):
    spec = BornQuadSpec(n_points=40)
    both = born_total(desk_scene, spec)
    a = born_total(desk_scene.replace(regions=desk_scene.regions[:1]), spec)
    b = born_total(desk_scene.replace(regions=desk_scene.regions[1:]), spec)
    for (j, l, v), (_, _, va), (_, _, vb) in zip(both.pairs, a.pairs, b.pairs):
        assert v == va + vb
    assert both.per_region == (a.per_region[0], b.per_region[0])


def test_far_regions_additive():
    r1 = Region((-20, 0, 0), (0.5, 0.5, 0.5))
    r2 = Region((20, 0, 0), (0.7, 0.4, 0.5))
    src = [PointSource(1, (-18, 0, 0)), PointSource(1, (18, 1, 0))]
    spec = BornQuadSpec(n_points=40)
    both = born_total(Scene(0.1, [r1, r2], src), spec).value
    sep = born_total(Scene(0.1, [r1], src), spec).value + born_total(Scene(0.1, [r2], src), spec).value
    assert both == pytest.approx(sep, rel=1e-14)


def test_pair_symmetry_exact(desk_scene):
    spec = BornQuadSpec(n_points=40)
    assert born_pair_correction(desk_scene, 0, 2, spec) == born_pair_correction(desk_scene, 2, 0, spec)


def test_translation_invariance(desk_scene):
    spec = BornQuadSpec(n_points=40)
    a = born_total(desk_scene, spec).value
    b = born_total(translate_scene(desk_scene, (12.3, -4.5, 0.7)), spec).value
    assert abs(a - b) / abs(a) < 1e-10


def test_positivity():
    rng = np.random.default_rng(5)
    for _ in range(5):
        regions = [Region(rng.normal(size=3), rng.uniform(0.2, 1.0, 3))]
        sources = [PointSource(rng.uniform(0.1, 2), rng.normal(size=3) * 4) for _ in range(2)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            vals = born_pair_values(Scene(0.1, regions, sources), [(0, 0), (0, 1), (1, 1)], BornQuadSpec(n_points=32))
        assert np.all(vals > 0)


def test_convergence_shrinks(unit_scene):
    # sources inside the integration box leave an integrable 1/r kink, so the
    # rule converges algebraically (about n^-2) rather than spectrally
    conv = born_convergence(unit_scene, BornQuadSpec(n_points=16), levels=4)
    assert conv.n_points == (16, 32, 64, 128)
    assert conv.monotone
    c = [abs(x) for x in conv.changes]
    assert c[2] < 0.5 * c[1]
    assert abs(conv.changes[-1]) < 1e-4 * abs(conv.values[-1])


def test_midpoint_matches_gauss(unit_scene):
    a = born_total(unit_scene, BornQuadSpec(n_points=96)).value
    b = born_total(unit_scene, BornQuadSpec(n_points=96, rule="midpoint")).value
    assert a == pytest.approx(b, rel=5e-5)


def test_source_on_node_is_offset():
    # midpoint rule with an odd node count has a node exactly at the center
    s = Scene(1.0, [Region((0, 0, 0), (1, 1, 1))], [PointSource(1, (0, 0, 0)), PointSource(1, (5, 0, 0))])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        val = born_pair_correction(s, 0, 1, BornQuadSpec(n_points=33, rule="midpoint"))
    assert np.isfinite(val) and val > 0


def test_unresolvable_node_collision(monkeypatch):
    from bornbarrier import born

    monkeypatch.setattr(born, "_axis_rules", lambda region, spec, shift=0.0: [
        (np.array([-1.0, 0.0, 1.0]), np.ones(3))] * 3)
    s = Scene(1.0, [Region((0, 0, 0), (1, 1, 1))], [PointSource(1, (0, 0, 0))])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with pytest.raises(SourceInsideQuadNode):
            born_pair_correction(s, 0, 0)


def test_deep_source_warns():
    s = Scene(1.0, [Region((0, 0, 0), (1, 1, 1))], [PointSource(1, (0.5, 0, 0))])
    with pytest.warns(RuntimeWarning):
        born_pair_correction(s, 0, 0, BornQuadSpec(n_points=16))


def test_errors(unit_scene):
    with pytest.raises(NoRegions):
        born_pair_correction(unit_scene.replace(regions=[]), 0, 1)
    with pytest.raises(IndexOutOfRange):
        born_pair_correction(unit_scene, 0, 5)
    with pytest.raises(ValidationError):
        BornQuadSpec(half_extent_factor=5)
