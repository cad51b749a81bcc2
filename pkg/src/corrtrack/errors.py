"""Exception hierarchy.

Every validation failure derives from :class:`ValidationError` so the CLI can
map it to exit code 2.
"""


class ValidationError(ValueError):
    """Base class for rejected input, configuration or file content."""


class InvalidInputError(ValidationError):
    pass


class InvalidConfigError(ValidationError):
    pass


class ParseError(ValidationError):
    """Malformed text row. Carries the offending 1-based line number."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)


class FormatError(ValidationError):
    """Binary file with a bad header or truncated payload."""


class AlignmentError(ValidationError):
    """Embedding records do not line up with the detection rows."""


class DegenerateUpdateWarning(RuntimeWarning):
    """An EMA template update cancelled to the zero vector and was skipped."""
