"""Variational Monte Carlo for the mixed-field toric code with
approximately symmetric neural network wavefunctions."""

from ._accel import backend
from .errors import (
    BoundaryPeakError,
    CapacityError,
    InvalidArgument,
    NumericalAbort,
    NumericalDomainError,
    SRSolveError,
    ToricNQSError,
    UndefinedEntropyError,
    UndefinedRatioError,
)
from .hamiltonian import FieldParameters, connected_configurations, local_energies, local_energy
from .lattice import build_lattice, central_square_region, string_support

__version__ = "0.1.0"

__all__ = [
    "BoundaryPeakError",
    "CapacityError",
    "FieldParameters",
    "InvalidArgument",
    "NumericalAbort",
    "NumericalDomainError",
    "SRSolveError",
    "ToricNQSError",
    "UndefinedEntropyError",
    "UndefinedRatioError",
    "backend",
    "build_lattice",
    "central_square_region",
    "connected_configurations",
    "local_energies",
    "local_energy",
    "string_support",
]
