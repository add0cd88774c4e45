"""Exception hierarchy.

Configuration problems and numerical failures are kept apart so the CLI can
map them onto distinct exit codes (2 and 3).
"""

from __future__ import annotations

from typing import Any


class PasaError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PasaError, ValueError):
    """Invalid user configuration: sizes, levels, flags, schema."""


class SchemaError(ConfigError):
    """Inputs disagree on shape or declared structure."""


class IngestionError(ConfigError):
    """A CSV file could not be turned into a design matrix."""


class NumericalError(PasaError, ArithmeticError):
    """A numerical routine failed.

    ``context`` collects where it happened (block id, batch index, ...) so the
    message survives being re-raised from a worker thread.
    """

    def __init__(self, message: str, **context: Any) -> None:
        self.context = dict(context)
        super().__init__(message)

    def with_context(self, **context: Any) -> "NumericalError":
        self.context.update(context)
        return self

    def __str__(self) -> str:
        base = super().__str__()
        if not self.context:
            return base
        where = ", ".join(f"{k}={v}" for k, v in self.context.items()
                          if not _is_bulky(v))
        return f"{base} [{where}]" if where else base


def _is_bulky(value: Any) -> bool:
    return hasattr(value, "shape") or isinstance(value, (list, tuple, dict))


class RankDeficiencyError(NumericalError):
    """Information matrix is singular; ``pivot`` is the offending column."""


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is not positive definite."""


class NonConvergenceError(NumericalError):
    """An iteration hit its cap; ``last_iterate`` holds where it stopped."""


class SeparationError(NonConvergenceError):
    """Logistic coefficients diverged, typically under complete separation."""


class InvalidMeanError(NumericalError, ValueError):
    """A mean lies outside the family's mean domain."""


class DegenerateVarianceError(NumericalError):
    """Pearson dispersion hit a zero variance or has no degrees of freedom."""


class UndefinedAUCError(NumericalError, ValueError):
    """AUC requested for labels of a single class."""
