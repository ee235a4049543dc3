"""Shared exception types."""


class InputError(ValueError):
    """Malformed or inconsistent input: file contents, schema, or config."""
