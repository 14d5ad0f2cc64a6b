"""
errors.py
Exception hierarchy for ReproMC.
"""


class ReproMCError(Exception):
    """Base class for every error raised by ReproMC."""


class ConfigError(ReproMCError):
    """Invalid settings, plan, experiment config or CLI value."""


class AccumulatorError(ReproMCError):
    """Misuse of a moment accumulator (empty finalize, mismatched merge)."""


class OracleError(ReproMCError):
    """Exact oracle received input it cannot represent exactly."""


class RngError(ReproMCError):
    """Stream index or uniform outside its valid range."""


class EngineError(ReproMCError):
    """A Monte-Carlo block failed inside the worker pool."""


class ReportIOError(ReproMCError):
    """Reading or writing a report, record or input file failed."""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
