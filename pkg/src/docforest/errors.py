"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class DocForestError(Exception):
    exit_code = 3


class ParseError(DocForestError):
    """A corpus record is malformed (bad JSON, missing or mistyped field)."""

    exit_code = 2


class ValidationError(DocForestError):
    """A record parsed but violates a document invariant."""

    exit_code = 2


class ConfigurationError(DocForestError):
    exit_code = 3


class ConsistencyError(DocForestError):
    """Internal invariant broken (rule overlap, incomplete assignment, ...)."""

    exit_code = 3
