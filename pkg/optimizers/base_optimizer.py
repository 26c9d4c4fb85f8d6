import logging
from abc import ABC, abstractmethod
from typing import Tuple

import numpy as np

from domain_models import OptimizerConfig, OptimizerReport
from exceptions import NonFiniteSolutionError, OptimizationError, SolverError

logger = logging.getLogger(__name__)


class MinimizationProblem(ABC):
    """Smooth objective of a vector argument."""

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        pass

    @abstractmethod
    def value_and_gradient(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        pass


class BaseOptimizer(ABC):
    """Base class for descent optimizers; counts evaluations and tags failures with the iterate."""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.function_evaluations = 0
        self.gradient_evaluations = 0

    @property
    @abstractmethod
    def description(self) -> str:
        pass

    @abstractmethod
    def minimize(self, problem: MinimizationProblem, x0: np.ndarray) -> OptimizerReport:
        pass

    def _value(self, problem: MinimizationProblem, x: np.ndarray) -> float:
        self.function_evaluations += 1
        try:
            return float(problem.value(x))
        except SolverError as e:
            raise OptimizationError(f"Objective evaluation failed: {e}", iterate=x) from e

    def _trial_value(self, problem: MinimizationProblem, x: np.ndarray) -> float:
        """Objective at a line-search trial point; a blown-up solve counts as +inf."""
        try:
            return self._value(problem, x)
        except OptimizationError as e:
            if not isinstance(e.__cause__, NonFiniteSolutionError):
                raise
            logger.warning(f"Trial point rejected: {e}")
            return float("inf")

    def _value_and_gradient(
        self, problem: MinimizationProblem, x: np.ndarray
    ) -> Tuple[float, np.ndarray]:
        self.function_evaluations += 1
        self.gradient_evaluations += 1
        try:
            value, gradient = problem.value_and_gradient(x)
        except SolverError as e:
            raise OptimizationError(f"Gradient evaluation failed: {e}", iterate=x) from e
        return float(value), np.asarray(gradient, dtype=float)

    def _initial_step(
        self, value: float, previous_value: float, slope: float
    ) -> float:
        """Step that would reproduce the last decrease on a quadratic model; 1 when unusable."""
        if slope >= 0.0:
            return 1.0
        alpha = 1.01 * 2.0 * (value - previous_value) / slope
        if not np.isfinite(alpha) or alpha <= 0.0:
            return 1.0
        return float(alpha)
