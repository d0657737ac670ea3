"""Exception types shared by the pipeline and the CLI."""
from typing import Optional


class GraphFormatError(ValueError):
    """An input file or in-memory graph violates the attributed graph format."""


class ConfigError(ValueError):
    """A model or run configuration value is invalid."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
