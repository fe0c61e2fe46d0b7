"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SerrinError(Exception):
    exit_code = 3


class DomainError(SerrinError, ValueError):
    """Input outside the admissible parameter range."""

    exit_code = 2


class UnsupportedLattice(DomainError):
    pass


class PoleError(SerrinError, ZeroDivisionError):
    def __init__(self, msg, nearest=None):
        super().__init__(msg)
        self.nearest = nearest


class AccuracyError(SerrinError):
    def __init__(self, msg, estimate=None, bound=None):
        super().__init__(msg)
        self.estimate = estimate
        self.bound = bound


class HorizonError(SerrinError):
    """Integration stopped (blow-up) before the requested range was covered."""

    def __init__(self, msg, last_x=None):
        super().__init__(msg)
        self.last_x = last_x


class SolverError(SerrinError):
    pass


class InconsistencyError(SerrinError):
    """Two independent routes to the same quantity disagree."""


class SymmetryViolation(SerrinError):
    exit_code = 1


class FormatError(SerrinError):
    exit_code = 2


class VerificationFailure(SerrinError):
    exit_code = 1
