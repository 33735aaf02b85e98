"""Exception types shared across the library."""


class ValidationError(ValueError):
    """An input object violates one of its documented invariants."""


class ConfigurationError(ValueError):
    """A scheme/problem configuration cannot produce a usable discretization."""


class RefinementError(ConfigurationError):
    """Quadrature nodes cannot resolve the integrand; carries a suggestion."""

    def __init__(self, message, suggested_nodes_per_decade=None):
        super().__init__(message)
        self.suggested_nodes_per_decade = suggested_nodes_per_decade


class MonotonicityError(ConfigurationError):
    """A discretization produced a negative off-diagonal weight."""


class NonconvergenceError(RuntimeError):
    """Policy iteration hit the iteration cap; carries the residual history."""

    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


class DataError(ValueError):
    """Computed data violates a structural requirement (e.g. s(xi) <= 0)."""


class FieldFormatError(ValueError):
    """A field file cannot be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
