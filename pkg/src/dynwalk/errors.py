"""Exception hierarchy shared by every dynwalk module."""


class DynWalkError(Exception):
    """Base class for all errors raised by dynwalk."""


class ConstructionError(DynWalkError, ValueError):
    """A value object was built from inconsistent parameters."""


class AssumptionViolation(DynWalkError, ValueError):
    """A model assumption (e.g. no atom at zero) does not hold for the input."""


class CapabilityError(DynWalkError, ValueError):
    """The conductance law or dimension is incompatible with the requested process."""


class DomainError(DynWalkError, ValueError):
    """An argument lies outside the domain of a formula."""


class ClockRegressionError(DynWalkError, RuntimeError):
    """An environment was queried at a time earlier than its last known time."""


class ModeViolationError(DynWalkError, RuntimeError):
    """An operation was called on an environment in the wrong mode."""


class CycleOverflowError(DynWalkError, RuntimeError):
    """A regeneration cycle exceeded its configured size or duration cap."""


class InsufficientSampleError(DynWalkError, ValueError):
    """Too few samples for the requested estimator."""


class MisuseError(DynWalkError, ValueError):
    """An estimator was fed data generated under the wrong parameters."""


class FitError(DynWalkError, ValueError):
    """A regression could not be fitted (e.g. degenerate samples)."""


class StepOverflowError(DynWalkError, RuntimeError):
    """A simulation exceeded its step cap."""
