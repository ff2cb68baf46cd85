class ConfigError(ValueError):
    """Invalid configuration value or document."""


class DataError(ValueError):
    """Malformed or inconsistent input data (logs, verdict files)."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class FrameOrderError(DataError):
    """A frame arrived out of order for a sequential consumer."""


class NotPredictable(Exception):
    """The track has too little history to extrapolate."""
