"""Exception types raised across the package."""

from __future__ import annotations

import numpy as np


class InvalidDataError(ValueError):
    """Input data is malformed (shape mismatch, non-finite entries, ...)."""


class RankError(np.linalg.LinAlgError):
    """A matrix that must be inverted is singular or too ill-conditioned."""


class NotPositiveDefiniteError(RankError):
    """A matrix that must be positive definite is not."""


class DegenerateVarianceError(ValueError):
    """A standard error is zero where a strictly positive one is required."""


class CollectionSizeError(ValueError):
    """A model collection would exceed the configured size cap."""


class DomainError(ValueError):
    """An argument lies outside its admissible domain."""


class BoundViolationError(ValueError):
    """An evaluated value exceeded its declared a-priori bound."""
