"""Exception types shared across the toolkit."""


class McDiffError(Exception):
    """Base class for all toolkit errors."""


class DegenerateGeometry(McDiffError):
    """A geometric construction collapsed (e.g. coincident points)."""


class SphereIntersectsPlane(McDiffError):
    """A sphere crosses the reflecting plane it should be mirrored across."""


class PlanesNotParallel(McDiffError):
    """Two planes expected to be parallel are not."""


class SphereOutsideSlab(McDiffError):
    """The receiver is not strictly between the two reflecting planes."""


class NonPositiveTime(McDiffError):
    """A rate was requested at t <= 0."""


class ConfigInvalid(McDiffError):
    """Simulation configuration violates an invariant."""


class ReceiverUnknown(McDiffError):
    """Receiver index out of range for a histogram."""


class LengthMismatch(McDiffError):
    """Series of unequal length passed to a pointwise comparison."""


class SpecInvalid(McDiffError):
    """Topology specification is malformed or inconsistent."""
