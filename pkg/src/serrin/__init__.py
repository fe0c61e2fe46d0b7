"""Numerical construction and verification of Serrin ring domains and periodic bands."""

__version__ = "0.1.0"

from .errors import (DomainError, FormatError, HorizonError, InconsistencyError, SerrinError,  # noqa: E402,F401
                     SolverError, SymmetryViolation, VerificationFailure)
