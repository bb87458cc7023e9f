"""Bohmian trajectories, quantum vortices and chaos in a 2D anharmonic oscillator."""
from .errors import (
    AmbiguousMatchError,
    BohmsimError,
    BoundaryLeakError,
    ConfigError,
    DegenerateFieldError,
    DomainTooSmallError,
    NodeProximityError,
    NormDriftError,
    OutOfDomainError,
    SchemaError,
    ZeroInitialSeparation,
)
from .model import GridSpec, PhysParams, default_grid, initial_state, paper_params
from .tdse import SnapshotSeries, SnapshotStream, WaveField, evolve

__version__ = "0.1.0"

__all__ = [
    "AmbiguousMatchError",
    "BohmsimError",
    "BoundaryLeakError",
    "ConfigError",
    "DegenerateFieldError",
    "DomainTooSmallError",
    "GridSpec",
    "NodeProximityError",
    "NormDriftError",
    "OutOfDomainError",
    "PhysParams",
    "SchemaError",
    "SnapshotSeries",
    "SnapshotStream",
    "WaveField",
    "ZeroInitialSeparation",
    "default_grid",
    "evolve",
    "initial_state",
    "paper_params",
    "__version__",
]
