"""Exception hierarchy shared by all cornermass modules."""


class CornerMassError(Exception):
    """Base class for all package errors."""


class DomainError(CornerMassError):
    """A radius (or coordinate) fell outside the domain of a profile or patch."""


class BracketError(CornerMassError):
    """Root bracketing failed: no sign change across the given interval."""


class IntegrationDivergedError(CornerMassError):
    """ODE state became non-finite; carries the last radius with a finite state."""

    def __init__(self, message, last_good_radius=None):
        super().__init__(message)
        self.last_good_radius = last_good_radius


class UnconvergedError(CornerMassError):
    """Iterative solver hit its sweep cap; carries the final residual."""

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class PicardStagnationError(CornerMassError):
    """Outer Picard iteration hit its cap; carries the change history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class HypothesisError(CornerMassError):
    """A mathematical hypothesis of the requested quantity fails on this data."""


class ConfigError(CornerMassError):
    """Malformed run configuration; carries a line/field diagnostic."""

    def __init__(self, message, line=None, field=None):
        super().__init__(message)
        self.line = line
        self.field = field
