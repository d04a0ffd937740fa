class InvalidInputError(ValueError):
    """Raised when an operation receives arguments outside its domain."""


class ParseError(InvalidInputError):
    """A session record could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(ParseError):
    """A parsed session record violates a structural invariant."""


class FormatError(ValueError):
    """A serialized artifact cannot be decoded."""
