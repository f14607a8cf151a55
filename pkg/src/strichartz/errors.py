class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ResolutionError(ValueError):
    """A sampling grid is too coarse for the oscillation it has to resolve."""


class SearchAborted(RuntimeError):
    """An ascent produced a non-finite objective value."""
