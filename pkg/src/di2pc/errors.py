"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage/domain problems exit 2,
verification failures exit 3, dimension-cap violations exit 4.
"""

from __future__ import annotations


class Di2pcError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(Di2pcError):
    """Operand dimensions are inconsistent with each other or with metadata."""


class DomainError(Di2pcError):
    """An input violates a mathematical precondition (range, positivity, ...)."""


class ArityError(DomainError):
    """A measurement or POVM has the wrong number of elements."""


class NonphysicalViolationError(DomainError):
    """A CHSH value above the Tsirelson bound 2*sqrt(2) (plus tolerance)."""


class DimensionCapError(Di2pcError):
    """A tensor product would exceed the configured dimension cap."""


class CapExceededError(Di2pcError):
    """A bounded search (e.g. min_rounds) exhausted its iteration cap."""


class StrategyError(DomainError):
    """An attack strategy violates its invariants (memory size, completeness)."""
