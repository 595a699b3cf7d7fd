"""Exception types shared across the package."""


class DdscError(Exception):
    """Base class for all package-specific errors."""


class DefinitenessError(DdscError):
    """A matrix required to be (semi)definite is not."""


class StabilityError(DdscError):
    """An operation required a Hurwitz matrix or a finite norm and got neither."""


class DivergenceError(DdscError):
    """Simulated trajectory left the trust region of the integrator."""


class DegenerateDataError(DdscError):
    """Recorded data cannot support the requested set-membership fit."""


class EllipsoidUnboundedError(DdscError):
    """The membership set has unbounded volume; the noise bound is too small."""


class AssemblyError(DdscError):
    """An LMI problem is malformed (non-affine, mismatched, or empty)."""


class UnsupportedChannelError(DdscError):
    """The performance channel shape is outside what the formulation covers."""


class ScenarioError(DdscError):
    """A scenario file is malformed; the message points at the offending line."""
