"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class AlaviError(Exception):
    """Base class for all package errors."""


class UsageError(AlaviError):
    """Caller violated a precondition (bad shapes, bad arguments, bad paths)."""


class ParameterError(AlaviError):
    """A solver parameter is outside its admissible range."""


class CapabilityError(AlaviError):
    """The requested operation is not supported for this problem structure."""


class ConvergenceError(AlaviError):
    """An inner iterative solve exhausted its budget.

    Carries the final residual so callers can decide whether to accept.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


class DivergenceError(AlaviError):
    """Non-finite values appeared during a run.

    ``last_state`` holds the last finite ``(k, u, p)``.
    """

    def __init__(self, message: str, k: int, u: np.ndarray, p: np.ndarray):
        super().__init__(message)
        self.k = k
        self.u = u
        self.p = p


class EstimationError(AlaviError):
    """A statistical estimate cannot be formed (degenerate sampling domain)."""


class GenerationError(AlaviError):
    """Instance generation failed (e.g. the embedded convex solve did not meet tolerance)."""


class InsufficientDataError(AlaviError):
    """A certificate needs trace data (snapshots, length) that is not present."""


class IntegrityError(AlaviError):
    """A trace and an instance do not belong together (hash mismatch)."""
