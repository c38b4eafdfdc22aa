"""Exception types raised across the package."""


class GapBoundsError(Exception):
    """Base class for all package errors."""


class DomainError(GapBoundsError, ValueError):
    """A parameter lies outside the domain where a construction is defined."""


class ConfigError(GapBoundsError):
    """Malformed or inconsistent run configuration."""


class ExpressionError(ConfigError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} at position {position}"
            if text is not None:
                message += f"\n  {text}\n  {' ' * position}^"
        super().__init__(message)


class WeightVanished(GapBoundsError):
    """A diagonal weight h_i' was non-positive at an evaluation point."""


class AsymmetricResult(GapBoundsError):
    pass


class SingularWeight(GapBoundsError):
    pass


class UnsupportedWeight(GapBoundsError):
    """Bound computations accept diagonal weights only."""


class GridTooLarge(GapBoundsError):
    pass


class OverflowGuard(GapBoundsError):
    pass


class SingularMass(GapBoundsError):
    pass


class NoConvergence(GapBoundsError):
    """An iterative solver stopped before reaching its tolerance.

    ``partial`` carries whatever the solver had when it gave up.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
