"""
Exception hierarchy for the attention pipeline.

Input-shaped problems (bad files, bad config, bad scenario scripts) are
separated from domain/runtime problems so the CLI can pick exit codes.
"""

from typing import Optional


class AttnPipeError(Exception):
    """Base class for every error raised by the pipeline."""


class WindowRangeError(AttnPipeError, ValueError):
    """Timestamp lies before the window origin."""


class NumericError(AttnPipeError, ValueError):
    """Non-finite value where a finite real was required."""


class ContractViolationError(AttnPipeError):
    """A caller broke a documented precondition (time regression, bad score)."""


class DegenerateEyeError(AttnPipeError, ValueError):
    """Eye corners coincide, so EAR is undefined."""


class NoObservationError(AttnPipeError):
    """Neither eye produced a usable observation for the frame."""


class SessionFormatError(AttnPipeError):
    """Malformed session log line."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class ConfigError(AttnPipeError):
    """Configuration document could not be loaded or failed validation."""


class ModelError(AttnPipeError):
    """Emotion model is missing, malformed, or fed a wrong-sized vector."""


class ScenarioError(AttnPipeError):
    """Scenario script failed validation."""

    def __init__(self, reason: str, span_index: Optional[int] = None):
        self.span_index = span_index
        self.reason = reason
        where = f"span {span_index}: " if span_index is not None else ""
        super().__init__(f"{where}{reason}")


class ReportFormatError(AttnPipeError):
    """Report document is not valid JSON or lacks required fields."""


class EvaluationError(AttnPipeError):
    """Predicted and observed series cannot be paired."""


class MetricError(AttnPipeError, ValueError):
    """A metric is undefined for the given series."""


class EmptySeriesError(MetricError):
    pass


class UndefinedR2Error(MetricError):
    pass


class MapeDomainError(MetricError):
    pass


# Errors the CLI reports as input/usage problems (exit 2).
INPUT_ERRORS = (SessionFormatError, ConfigError, ScenarioError, ReportFormatError)
