"""Exception hierarchy shared by all treeclust modules."""


class TreeClustError(Exception):
    """Base class for every error raised by treeclust."""


class DimensionMismatch(TreeClustError, ValueError):
    pass


class RankDeficient(TreeClustError):
    """Unpenalized normal equations are singular."""


class Separation(TreeClustError):
    """Logistic coefficients diverge (complete or quasi-complete separation)."""


class DomainError(TreeClustError, ValueError):
    pass


class ConvergenceSuspect(TreeClustError):
    """A nested fit has a likelihood clearly above its supermodel."""


class EmptyUnit(TreeClustError, ValueError):
    pass


class ThresholdOutOfRange(TreeClustError, ValueError):
    pass


class DuplicateThreshold(ThresholdOutOfRange):
    pass


class FullModelUnfit(TreeClustError):
    """The full fixed-effects model could not be fitted, even with a ridge."""


class TooManyFailures(TreeClustError):
    pass


class InvalidM0(TreeClustError, ValueError):
    pass


class ZeroVariance(TreeClustError, ValueError):
    pass


class LengthMismatch(TreeClustError, ValueError):
    pass


class InputError(TreeClustError, ValueError):
    """Malformed user input (CSV rows, config values)."""
