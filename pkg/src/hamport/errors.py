"""Exception hierarchy shared by all hamport modules."""


class HamportError(Exception):
    """Base class for every error raised by this package."""


class InputError(HamportError, ValueError):
    """Malformed arguments: wrong shapes, non-finite values, bad ranges."""


class ResolutionError(InputError):
    """Grid too coarse for the requested finite-difference stencil."""


class ModelError(HamportError):
    """A plant or controller model is inconsistent or evaluated to non-finite values."""


class InterconnectionError(HamportError):
    """Plant and controller port dimensions do not match."""


class ConditionSetupError(HamportError):
    """A condition check could not be set up (e.g. infeasible boundary projection)."""


class UnsupportedOrderError(HamportError):
    """Operation is only defined for a different differential order N."""


class AssemblyError(HamportError):
    """Spatial discretization could not be assembled."""


class NumericError(HamportError):
    """Linear-algebra routine failed to converge."""


class StepFailure(HamportError):
    """Newton iteration of an implicit step did not converge."""


class SignalSpecError(InputError):
    """Invalid disturbance signal parameters."""


class AlignmentError(InputError):
    """Times are not multiples of the step size."""


class ConfigError(HamportError):
    """Malformed scenario configuration."""
