"""Exception types shared across the package."""


class TailboundsError(ValueError):
    """Base class for all validation and applicability errors."""


class ShapeError(TailboundsError):
    """Dimension or shape mismatch between operands."""


class RoleError(TailboundsError):
    """A primal-space object was required but a dual one was given, or vice versa."""


class ApplicabilityError(TailboundsError):
    """The requested result is only stated for a different exponent or space."""


class CenteringError(TailboundsError):
    """An operation requiring a centered measure received an uncentered one."""


class CouplingError(TailboundsError):
    """Two measures that must share atom indexing and weights do not."""


class NotPositiveDefiniteError(TailboundsError):
    """An operator that must be positive definite is singular or near-singular."""
