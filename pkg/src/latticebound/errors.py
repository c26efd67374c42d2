"""Exception types shared across the package."""


class DomainError(ValueError):
    """Raised when an energy argument lies inside the closed continuous band."""


class ToleranceError(RuntimeError):
    """Raised when adaptive quadrature cannot certify the requested tolerance."""


class CalibrationMissing(LookupError):
    """Raised when computed edge constants are requested before calibration."""


class BudgetExceeded(RuntimeError):
    """Raised when a root scan exceeds its function-evaluation budget."""


class ParseError(ValueError):
    """Raised on malformed config text.  Carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(ValueError):
    """Raised when a config value is out of range.  Carries the field name."""

    def __init__(self, message, field=None):
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
