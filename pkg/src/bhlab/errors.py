"""Exception hierarchy.

Every failure mode raised by the library derives from :class:`BHLabError`,
so callers (the CLI in particular) can map families of errors to exit codes.
"""


class BHLabError(Exception):
    """Base class for all library errors."""


# grid / spectral
class OrderOutOfRange(BHLabError, ValueError):
    pass


class NonFiniteInput(BHLabError, ValueError):
    pass


class PointOutsideGrid(BHLabError, ValueError):
    pass


# hilbert
class SupportTooWide(BHLabError, ValueError):
    pass


class RadiusTooSmall(BHLabError, ValueError):
    pass


# profile
class NoConvergence(BHLabError, RuntimeError):
    pass


class NonPositiveNu(BHLabError, ValueError):
    pass


class XTooSmall(BHLabError, ValueError):
    pass


# self-similar frame
class DegenerateModulation(BHLabError, RuntimeError):
    pass


class PositiveSlope(DegenerateModulation):
    pass


class SmallFifthDerivative(BHLabError, ZeroDivisionError):
    pass


class TauDotGeOne(BHLabError, ValueError):
    pass


class LeftDomain(BHLabError, RuntimeError):
    pass


class FramesMisaligned(BHLabError, ValueError):
    pass


# initial data
class GridTooSmall(BHLabError, ValueError):
    pass


# evolution
class CflViolation(BHLabError, ValueError):
    pass


class NonFiniteState(BHLabError, FloatingPointError):
    """Raised when the solver state stops being finite.

    ``dump`` holds whatever diagnostic arrays the integrator could save
    (time, step index, the last finite state).
    """

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


# shooting
class TargetBeyondBlowup(BHLabError, RuntimeError):
    pass


class JacobianDisagreement(BHLabError, RuntimeError):
    pass


class SingularJacobian(BHLabError, ArithmeticError):
    pass


class MaxItersExceeded(BHLabError, RuntimeError):
    pass


class TrustRegionExceeded(BHLabError, RuntimeError):
    pass


# diagnostics
class InsufficientDecade(BHLabError, ValueError):
    pass


class WindowTooNarrow(BHLabError, ValueError):
    pass


class NonPositiveValues(BHLabError, ValueError):
    pass


# configuration
class ConfigError(BHLabError, ValueError):
    pass
