"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class FracshapeError(Exception):
    exit_code = 1


class ParseError(FracshapeError, ValueError):
    exit_code = 2


class SingularityError(FracshapeError, ArithmeticError):
    """Evaluation hit a pole (or 1 + L = 0) at a grid frequency."""

    exit_code = 3

    def __init__(self, message, omega=None):
        super().__init__(message)
        self.omega = omega


class ReproductionError(FracshapeError):
    exit_code = 4

    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("reproduction checks failed: " + ", ".join(self.failed))


class UnsupportedFactorError(FracshapeError, TypeError):
    exit_code = 5


class DomainError(FracshapeError, ValueError):
    pass


class NoRootsError(FracshapeError, ValueError):
    pass


class NotCommensurateError(FracshapeError, ValueError):
    pass


class ConditioningError(FracshapeError, ArithmeticError):
    pass
