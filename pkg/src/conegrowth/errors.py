"""Exception types shared across the package."""


class ConeGrowthError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(ConeGrowthError, ValueError):
    """Element coordinates do not fit the group kind."""


class UnsupportedKind(ConeGrowthError):
    """Operation is not defined for this group kind."""


class UnsupportedVariant(ConeGrowthError):
    """Operation is not defined for this model variant."""


class MemoryBudgetExceeded(ConeGrowthError, MemoryError):
    pass


class NotInBall(ConeGrowthError, KeyError):
    pass


class TargetOutsideBall(ConeGrowthError):
    """Word norm of a target could not be established within the search cap."""


class TruncationUncertain(ConeGrowthError):
    """A truncated passage time may differ from the infinite-graph value."""


class FloodUnbounded(ConeGrowthError):
    """A passage-time flood did not close within the radius budget."""


class EmptyCloud(ConeGrowthError, ValueError):
    pass


class InsufficientSamples(ConeGrowthError):
    pass


class ConfigError(ConeGrowthError, ValueError):
    pass
