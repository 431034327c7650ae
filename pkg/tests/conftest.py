import numpy as np
import pytest

from bornbarrier.scene import PointSource, Region, Scene


@pytest.fixture
def unit_scene():
    """Unit spherical barrier at the origin, two like charges several radii away."""
    return Scene(
        0.1,
        [Region((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))],
        [PointSource(1.0, (3.0, 0.0, 0.0)), PointSource(1.0, (0.0, 3.5, 0.0))],
    )


@pytest.fixture
def desk_scene():
    """Two anisotropic regions and three sources of mixed sign."""
    return Scene(
        0.05,
        [
            Region((0.0, 0.0, 0.0), (0.5, 0.4, 0.45)),
            Region((0.6, 1.2, -0.3), (0.35, 0.3, 0.4)),
        ],
        [
            PointSource(1.0, (1.8, -0.5, 0.2)),
            PointSource(-0.7, (-1.6, 0.9, 0.0)),
            PointSource(0.5, (0.4, -1.7, 1.0)),
        ],
    )


@pytest.fixture
def lattice_scene():
    """Scene whose sources sit on nodes of every centered grid with spacing dividing 0.25."""
    return Scene(
        0.1,
        [Region((0.0, 0.0, 0.0), (0.4, 0.3, 0.35))],
        [PointSource(1.0, (1.5, 0.0, 0.0)), PointSource(1.0, (0.0, -1.5, 0.5))],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)
