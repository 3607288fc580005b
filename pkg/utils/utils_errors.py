"""
utils_errors.py - exception types shared across the project.

Callers log the message with loguru before raising, so these classes carry
no formatting logic of their own.
"""

from typing import Any, Optional


class GlocalFuseError(Exception):
    """Base class for every error raised deliberately by this project."""


class ConfigurationError(GlocalFuseError, ValueError):
    """Invalid configuration value or a model that cannot be built for the given sizes."""


class ContractViolation(GlocalFuseError, ValueError):
    """An operation was called with inputs that break its precondition (usually shapes)."""


class DepthDomainError(ContractViolation):
    """Depth values must be strictly positive."""


class IngestionError(GlocalFuseError, ValueError):
    """A sequence directory, image, or side file could not be read as expected."""


class EvaluationError(GlocalFuseError, ValueError):
    """A frame cannot be scored (no valid ground truth, degenerate prediction)."""


class TrainingStepError(GlocalFuseError, RuntimeError):
    """A training step produced a non-finite loss."""

    def __init__(self, message: str, diagnostics: Optional[dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics: dict[str, Any] = diagnostics or {}
