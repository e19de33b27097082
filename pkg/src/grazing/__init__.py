"""Numerics for the stationary kinetic Fokker-Planck equation near the grazing set."""

from .errors import (
    ConvergenceError,
    DivergenceError,
    DomainError,
    FamilyIndexError,
    GrazingError,
    NumericalError,
    PoleError,
    RegionError,
    SolverError,
    ValidationError,
)

__version__ = "0.1.0"
