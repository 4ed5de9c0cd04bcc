"""Exception types raised across the package."""


class FlatLabError(Exception):
    """Base class for all package errors."""


# surfaces
class MismatchedHolonomy(FlatLabError):
    pass


class UnpairedEdge(FlatLabError):
    pass


class BadConeAngle(FlatLabError):
    pass


class DegenerateTriangulation(FlatLabError):
    pass


class SearchRadiusExceeded(FlatLabError):
    pass


# interval exchanges and Roth-type checks
class SingularityHit(FlatLabError):
    pass


class NoReturn(FlatLabError):
    pass


class ZeroLength(FlatLabError):
    pass


class TimeHorizonExceeded(FlatLabError):
    pass


# cocycles
class CocycleOverflow(FlatLabError, OverflowError):
    pass


class GapTooSmall(FlatLabError):
    pass


class FiltrationNotConverged(FlatLabError):
    pass


# random walks / experiments
class InvalidMeasure(FlatLabError, ValueError):
    pass


class DomainError(FlatLabError, ValueError):
    pass


# billiards
class CornerHit(FlatLabError):
    pass


class StepBudgetExceeded(FlatLabError):
    pass


class ConfigError(FlatLabError, ValueError):
    pass
