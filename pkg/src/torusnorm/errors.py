"""Exception types shared across the package."""


class TorusNormError(Exception):
    """Base class for all package errors."""


class SpecError(TorusNormError):
    """A metric / potential / loop specification is malformed or invalid."""


class DegenerateMetricError(TorusNormError):
    """A metric evaluation produced a non-positive value on a nonzero vector."""


class NullClassError(TorusNormError):
    """An operation requiring a nonzero homology class received (0, 0)."""


class ConvergenceError(TorusNormError):
    """The optimizer failed to converge at every start.

    Carries the partial result (if any) in ``partial`` for diagnostics.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
