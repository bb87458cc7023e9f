"""Exception hierarchy shared by the solver, trajectory and vortex modules."""


class BohmsimError(Exception):
    """Base class for all package errors."""


class NormDriftError(BohmsimError):
    """The discrete norm left the allowed band during evolution."""


class BoundaryLeakError(BohmsimError):
    """Amplitude reached the outermost interior ring of the grid."""


class DomainTooSmallError(BoundaryLeakError):
    """The initial packet already reaches the box boundary (a leak at t = 0)."""


class OutOfDomainError(BohmsimError):
    """A query point or time lies outside the interpolant's range."""


class NodeProximityError(BohmsimError):
    """|psi| is below the node guard, so the guidance velocity is unreliable."""


class DegenerateFieldError(BohmsimError):
    """The field is real up to a global phase: nodal lines, no isolated nodes."""


class AmbiguousMatchError(BohmsimError):
    """Two candidate vortex assignments tie within tolerance."""


class ZeroInitialSeparation(BohmsimError):
    """A trajectory pair starts at zero phase-space distance."""


class ConfigError(BohmsimError):
    """Invalid run configuration."""


class SchemaError(ConfigError):
    """An input file does not match the requested plot kind."""
