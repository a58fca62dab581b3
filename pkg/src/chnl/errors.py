"""Exception hierarchy shared by all chnl modules."""

from __future__ import annotations


class ChnlError(Exception):
    """Base class for every error raised by the package."""


class NonZeroMean(ChnlError, ValueError):
    """An operation that needs mean-zero data received a field with nonzero mean."""


class DomainViolation(ChnlError, ValueError):
    """A singular potential was evaluated outside its open domain."""


class ResolventFailure(ChnlError, RuntimeError):
    """The scalar resolvent solve did not converge."""


class NonPositiveCoefficient(ChnlError, ValueError):
    """The gradient-energy coefficient is not strictly positive."""


class MeanOutOfRange(ChnlError, ValueError):
    """Initial mean lies outside (-1, 1)."""


class AmplitudeTooLarge(ChnlError, ValueError):
    """Initial field leaves the admissible band for a singular potential."""


class StepFailure(ChnlError, RuntimeError):
    """No acceptable time step could be taken above the minimal step size.

    ``partial`` holds whatever the caller had accumulated before the failure
    (``run`` stores its partial :class:`~chnl.stepper.RunResult` there).
    """

    def __init__(self, message, *, last_residual=float("nan"), guard_trips=0, partial=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.guard_trips = guard_trips
        self.partial = partial


class Instability(ChnlError, RuntimeError):
    """The explicit oracle blew up."""


class NonlinearSpec(ChnlError, ValueError):
    """A linear-regime utility was handed a nonlinear model."""


class MeanMismatch(ChnlError, ValueError):
    """Two initial data that must share a mean do not."""


class ParseError(ChnlError, ValueError):
    def __init__(self, line, key, reason):
        super().__init__(f"line {line}: key {key!r}: {reason}")
        self.line = line
        self.key = key
        self.reason = reason


class ValidationError(ChnlError, ValueError):
    def __init__(self, key, constraint):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint


class FormatError(ChnlError, ValueError):
    """Malformed snapshot or checkpoint file."""
