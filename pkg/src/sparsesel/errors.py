"""Exception hierarchy shared by every stage of the pipeline.

Each class carries the CLI exit code it maps to.
"""


class SelectionError(Exception):
    exit_code = 1


class ConfigError(SelectionError):
    exit_code = 2


class SingularityError(ConfigError):
    """A sensor coincides with a grid point (d_m = 0)."""

    def __init__(self, sensor, point, message=None):
        self.sensor = sensor
        self.point = point
        super().__init__(message or f"sensor {sensor} coincides with grid point {point}")


class InfeasibleError(SelectionError):
    exit_code = 3

    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class NumericalError(SelectionError):
    exit_code = 4

    def __init__(self, message, iterate=None):
        self.iterate = iterate
        super().__init__(message)


class ConvergenceError(NumericalError):
    """Power iterations ran out of budget; `iterate` holds (lambda_min, v_min) so far."""


class StallError(NumericalError):
    """Zero constraint subgradient at an infeasible iterate."""


class GeometryError(NumericalError):
    """Selected sensors cannot localize the target (singular Gauss-Newton normal matrix)."""


class RoundingError(SelectionError):
    exit_code = 5

    def __init__(self, message, best_margin=None, best_candidate=None):
        self.best_margin = best_margin
        self.best_candidate = best_candidate
        super().__init__(message)


class OracleRefusal(ConfigError):
    pass
