"""Exception types shared across the engine."""


class MemoryEngineError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(MemoryEngineError):
    """A mutation would violate the Scene/Event/AMU layering rules."""


class NotFoundError(MemoryEngineError):
    """An operation referenced a node id that does not exist."""


class PreconditionError(MemoryEngineError):
    """An operation's precondition was violated (stale turn, empty input, ...)."""


class ConfigError(MemoryEngineError):
    """Invalid configuration: bad dimension, threshold out of range, unknown key."""


class PluginError(MemoryEngineError):
    """An injected plugin (embedder, generator, extractor, transcriber) failed."""


class EngineBusyError(MemoryEngineError):
    """Re-entrant or concurrent mutation attempted on a single-writer engine."""


class StreamFormatError(MemoryEngineError):
    """Malformed stream file; carries the offending 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
