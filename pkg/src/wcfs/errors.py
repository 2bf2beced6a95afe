"""Exception hierarchy shared by the simulator and analysis code."""


class WcfsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDistribution(WcfsError, ValueError):
    pass


class InfiniteMoment(WcfsError, ValueError):
    pass


class InfiniteRemSup(WcfsError, ValueError):
    pass


class UnstableConfig(WcfsError, ValueError):
    """Load is at or above 1, so no stationary regime exists."""


class PolicyViolation(WcfsError, RuntimeError):
    """A policy returned an allocation that breaks its declared invariants."""


class UnknownClassAttribute(WcfsError, KeyError):
    pass


class InvalidRequirement(WcfsError, ValueError):
    pass


class BudgetExceeded(WcfsError, ValueError):
    pass


class NonWcfs(WcfsError, TypeError):
    """Raised when WCFS constants are requested for a policy outside the class."""


class OvershootError(WcfsError, RuntimeError):
    pass


class ConfigError(WcfsError, ValueError):
    pass
