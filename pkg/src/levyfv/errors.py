"""Exception hierarchy shared by all modules."""


class LevyFVError(Exception):
    """Base class for every error raised by the package."""


class InvalidMeasure(LevyFVError, ValueError):
    """A measure parameter is out of range or the measure has an atom at 0."""


class DivergentMoment(LevyFVError, ArithmeticError):
    """A moment integral of the measure does not converge."""


class QuadratureFailure(LevyFVError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class BandwidthTooSmall(LevyFVError, ValueError):
    """Too much jump mass falls outside the kernel bandwidth."""


class ShapeMismatch(LevyFVError, ValueError):
    """Grid function and kernel are defined on different lattices."""


class CFLViolation(LevyFVError, ValueError):
    """The time step exceeds the admissible CFL bound."""


class NoConvergence(LevyFVError, RuntimeError):
    """The implicit fixed-point iteration hit its iteration cap."""


class OutOfRange(LevyFVError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class ConfigError(LevyFVError, ValueError):
    """Malformed experiment configuration."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"field {key!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
