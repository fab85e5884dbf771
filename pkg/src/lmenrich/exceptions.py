"""Exception hierarchy shared across the package."""


class EnrichError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EnrichError, ValueError):
    """Invalid scheme, parameter, or configuration value."""


class DegenerateGeometryError(EnrichError, ValueError):
    """Geometry too degenerate to define a curve, tangent or normal."""


class DomainError(EnrichError, ValueError):
    """Curve parameter outside the domain of an open curve."""


class DegenerateAnnotationError(EnrichError, ValueError):
    """Annotation cannot provide a normalization distance."""


class ParseError(EnrichError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(EnrichError, ValueError):
    """File content failed schema validation."""


class TrainingError(EnrichError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            detail = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({detail})"
        super().__init__(message)
