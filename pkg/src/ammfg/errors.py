"""Exception hierarchy shared across the package.

Validation problems (bad parameters, inadmissible paths, grid mismatches)
raise ValueError subclasses; numerical breakdowns raise a RuntimeError
subclass so callers can map them to distinct exit codes.
"""
from __future__ import annotations


class DomainError(ValueError):
    """Parameter or state outside the model's domain (reserves, fees, noise)."""


class ReserveDepletionError(DomainError):
    """A pool reserve hit zero or went negative."""


class AdmissibilityError(ValueError):
    """Control bounds or path admissibility violated."""


class UsageError(ValueError):
    """Mismatched grids or otherwise inconsistent arguments."""


class ConfigError(ValueError):
    """Run configuration invalid. Message lists every violation found."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations))


class NumericalError(RuntimeError):
    """Non-finite values appeared where the scheme requires finite ones."""
