"""Exception hierarchy shared by all modules."""


class LeoError(Exception):
    """Base class for every error raised by this package."""


class FormatError(LeoError, ValueError):
    """A network or domain file does not match the expected schema.

    ``field`` names the offending JSON path (e.g. ``layers[1].bias``).
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class UnsupportedActivationError(FormatError):
    pass


class DimensionError(LeoError, ValueError):
    pass


class OrderingError(LeoError):
    """Bounds for an earlier layer are missing when building a MILP."""


class ContractViolation(LeoError):
    """A transform was called with its precondition unmet."""


class StaleReportError(LeoError):
    """The stability report was computed for a different (net, domain)."""


class EnumerationCapError(LeoError):
    """Too many hidden units for activation-pattern enumeration."""


class FixtureSpecError(LeoError, ValueError):
    pass


class SolverError(LeoError, RuntimeError):
    """Internal LP/MILP failure (iteration limit, unbounded stability model)."""
