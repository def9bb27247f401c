"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Data violates a documented invariant (label range, bounds, row sums...)."""


class FormatError(ValidationError):
    """A file could not be parsed according to its text format."""
