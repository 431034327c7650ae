"""First-order barrier corrections to the propagator and static source
energy of a massless scalar field, with position-space and lattice oracles."""

__version__ = "0.1.0"

from .scene import PointSource, Region, Scene, scale_scene, translate_scene, validate_scene  # noqa: E402
from .spectral import characteristic_value, gaussian_transform, multi_region_transform, numeric_transform  # noqa: E402
from .montecarlo import IntegralEstimate, McConfig, PairCorrection, free_potential, pair_correction, scaling_sweep, total_correction  # noqa: E402
from .born import BornQuadSpec, born_pair_correction, born_total  # noqa: E402
from .lattice import GridSpec, LatticeField, apply_operator, lattice_pair_correction, perturbation_residual, solve_green  # noqa: E402
from .forces import force, source_force  # noqa: E402
