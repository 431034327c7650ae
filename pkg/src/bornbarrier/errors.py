"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (CLI exit code 2);
numerical failures derive from :class:`NumericalError` (CLI exit code 3).
"""


class BornBarrierError(Exception):
    """Base class for all package errors."""


class ValidationError(BornBarrierError, ValueError):
    pass


class NumericalError(BornBarrierError, ArithmeticError):
    pass


class NonPositiveAxis(ValidationError):
    def __init__(self, region_index, semi_axes):
        self.region_index = region_index
        super().__init__(f"region {region_index}: semi-axes must be > 0, got {tuple(semi_axes)}")


class CoincidentSources(ValidationError):
    def __init__(self, i, j):
        self.indices = (i, j)
        super().__init__(f"sources {i} and {j} share the same position")


class NegativeGamma(ValidationError):
    def __init__(self, gamma):
        super().__init__(f"gamma must be >= 0, got {gamma}")


class NonPositiveLambda(ValidationError):
    def __init__(self, lam):
        super().__init__(f"scale factor must be > 0, got {lam}")


class EmptyRegionList(ValidationError):
    pass


class NoRegions(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class InsufficientExtent(ValidationError):
    pass


class InsufficientResolution(ValidationError):
    pass


class SourceOffGrid(ValidationError):
    pass


class InvalidGrid(ValidationError):
    pass


class BadConfig(ValidationError):
    """Malformed scene file or CLI configuration.

    ``line`` and ``field`` are filled in whenever the parser can locate the
    problem.
    """

    def __init__(self, message, *, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class DegenerateSampler(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"no convergence after {iterations} iterations (relative residual {residual:.3e})")


class PerturbationTooStrong(NumericalError):
    """Lattice operator lost definiteness (barrier deep enough to bind)."""


class SourceInsideQuadNode(NumericalError):
    pass
