"""Exception types shared across the package."""


class RwreError(Exception):
    """Base class for all library errors."""


class ConfigError(RwreError):
    """Malformed or inconsistent law/run configuration."""


class NotCriticalError(RwreError):
    """Operation requires E[sum of marks] = 1 and the law is not critical."""


class UnboundedDensityError(RwreError):
    """Size-biasing a parametric law with unbounded offspring and no declared bound."""


class SizeLimitError(RwreError):
    """Vertex count exceeded the configured cap."""


class NotFrontierError(RwreError):
    """Expansion requested for a vertex that is not an unexpanded frontier leaf."""


class UnexpandedError(RwreError):
    """Operation needs the children of a vertex that has not been expanded."""


class DepthUnavailableError(RwreError):
    """Tree not materialized down to the requested level."""


class ExtinctError(RwreError):
    """The walk has no legal move (childless root under the reflection rule)."""


class NonFiniteError(RwreError):
    """A moment evaluated to infinity where a finite value is required."""


class InconclusiveError(RwreError):
    """Monte Carlo uncertainty straddles a decision boundary."""


class WrongDriftSignError(RwreError):
    """Operation requires a negative drift at criticality."""


class HorizonExceededError(RwreError):
    """Requested time exceeds the coupled horizon."""


class TooFewSamplesError(RwreError):
    """Statistic requested on an undersized sample."""


class TreeMismatchError(RwreError):
    """Trajectory and frame/tree arguments refer to different trees."""
