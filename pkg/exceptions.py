from typing import Optional

import numpy as np


class FirnError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(FirnError, ValueError):
    """Invalid run configuration or violated precondition."""


class MeshError(ConfigurationError):
    """Mesh parameters that do not partition [0, 1]."""


class SolverError(FirnError, RuntimeError):
    """Failure inside a numerical solve."""


class SingularSystemError(SolverError):
    def __init__(self, message: str, pivot_index: Optional[int] = None):
        super().__init__(message)
        self.pivot_index = pivot_index


class NonFiniteSolutionError(SolverError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class OptimizationError(SolverError):
    """Objective failure during minimization; carries the iterate being evaluated."""

    def __init__(self, message: str, iterate: Optional[np.ndarray] = None):
        super().__init__(message)
        self.iterate = None if iterate is None else np.array(iterate, dtype=float)
