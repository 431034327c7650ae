import numpy as np
import pytest

from bornbarrier.born import BornQuadSpec
from bornbarrier.errors import IndexOutOfRange, ValidationError
from bornbarrier.forces import correction_energy, default_step, force, force_balance, source_force
from bornbarrier.montecarlo import McConfig
from bornbarrier.scene import PointSource, Region, Scene

SPEC = BornQuadSpec(n_points=40)


@pytest.fixture
def mirror_scene():
    # invariant under x -> -x; the region sits on the plane x = 0
    return Scene(0.1, [Region((0, 0.3, 0), (0.8, 0.6, 0.7))],
                 [PointSource(1, (2.5, 0, 0)), PointSource(1, (-2.5, 0, 0)), PointSource(-0.5, (0, 3, 0.5))])


def test_symmetric_plane_component_vanishes(mirror_scene):
    f = force(mirror_scene, 0, 1e-3, SPEC)
    assert abs(f[0]) < 1e-12 * np.linalg.norm(f)
    assert np.linalg.norm(f[1:]) > 0


def test_balance_born(desk_scene):
    total, scale, forces = force_balance(desk_scene, 1e-3, SPEC)
    assert len(forces) == 5
    assert np.max(np.abs(total)) < 1e-6 * scale


def test_balance_mc_common_random_numbers(unit_scene):
    cfg = McConfig(n_samples=64_000, n_batches=8, seed=4)
    total, scale, _ = force_balance(unit_scene, 1e-3, cfg)
    # the same seed on both sides of every difference keeps the sum small
    assert np.max(np.abs(total)) < 0.2 * scale


def test_central_difference_order(unit_scene):
    fs = [force(unit_scene, 0, h, SPEC) for h in (0.2, 0.1, 0.05)]
    d1 = np.linalg.norm(fs[0] - fs[1])
    d2 = np.linalg.norm(fs[1] - fs[2])
    assert d1 / d2 == pytest.approx(4.0, rel=0.1)


def test_force_is_gamma_scaled(unit_scene):
    a = force(unit_scene, 0, 1e-2, SPEC)
    b = force(unit_scene.replace(gamma=0.3), 0, 1e-2, SPEC)
    assert np.allclose(b, 3 * a, rtol=1e-12)


def test_source_pushed_away_from_barrier():
    # γU' grows as a source approaches the region, so -γ dU'/dx points away from it
    s = Scene(0.1, [Region((0, 0, 0), (1, 1, 1))], [PointSource(1, (3, 0, 0))])
    f = source_force(s, 0, 1e-3, SPEC)
    assert f[0] > 0
    assert np.allclose(f[1:], 0.0, atol=1e-12 * f[0])


def test_default_step(unit_scene):
    assert default_step(unit_scene) == pytest.approx(1e-2)
    assert correction_energy(unit_scene, SPEC) > 0


def test_errors(unit_scene):
    with pytest.raises(IndexOutOfRange):
        force(unit_scene, 1)
    with pytest.raises(IndexOutOfRange):
        source_force(unit_scene, 2)
    with pytest.raises(ValidationError):
        force(unit_scene, 0, h=0.0)
