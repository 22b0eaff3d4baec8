"""
Errors - Exception and warning types for the oligopoly toolkit
exit_code: 1 = validation problem, 2 = numerical failure
"""


class CournotModelError(Exception):
    """Base class for every error raised by the toolkit"""
    exit_code = 2


class InvalidSpecError(CournotModelError, ValueError):
    """A distribution or parameter record is malformed"""
    exit_code = 1


class ConfigError(CournotModelError):
    """Run configuration could not be parsed or validated"""
    exit_code = 1

    def __init__(self, message, line=None, column=None, key_path=None):
        self.line = line
        self.column = column
        self.key_path = key_path
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if key_path:
            where.append(f"key '{key_path}'")
        if where:
            message = f"{message} ({'; '.join(where)})"
        super().__init__(message)


class AssumptionViolationError(CournotModelError):
    """Primitives or inputs outside the region where the equilibrium is valid"""
    exit_code = 1

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NegativeQuantityError(CournotModelError):
    """A simulated market produced a negative quantity or price"""
    exit_code = 1


class NonConvergenceError(CournotModelError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularSystemError(CournotModelError):
    pass


class ZeroDenominatorError(CournotModelError):
    pass


class BandOccupancyError(CournotModelError):
    """Boundary band holds too few observations"""
    exit_code = 1


class NonPositiveVarianceError(CournotModelError):
    pass


class NoImprovementError(CournotModelError):
    """Every optimiser start failed"""


class BlockSizeError(CournotModelError):
    exit_code = 1


class GridTooCoarseWarning(UserWarning):
    pass


class FlatObjectiveWarning(UserWarning):
    pass


class SmallDenominatorWarning(UserWarning):
    pass
