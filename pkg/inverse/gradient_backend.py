import logging
from abc import ABC, abstractmethod
from typing import Callable

import numpy as np

from constants import FD_RELATIVE_STEP
from domain_models import GradientBackendKind

logger = logging.getLogger(__name__)


def relative_step_rule(x: np.ndarray) -> np.ndarray:
    """eps_j = 1e-6 * (1 + |x_j|)."""
    return FD_RELATIVE_STEP * (1.0 + np.abs(np.asarray(x, dtype=float)))


def central_difference_gradient(
    func: Callable[[np.ndarray], float],
    x: np.ndarray,
    eps_rule: Callable[[np.ndarray], np.ndarray] = relative_step_rule,
) -> np.ndarray:
    """Component-wise (f(x + eps e_j) - f(x - eps e_j)) / (2 eps); 2n evaluations."""
    x = np.asarray(x, dtype=float)
    steps = np.broadcast_to(eps_rule(x), x.shape)
    gradient = np.zeros_like(x)
    for j in range(x.size):
        shifted = x.copy()
        shifted[j] = x[j] + steps[j]
        forward = func(shifted)
        shifted[j] = x[j] - steps[j]
        backward = func(shifted)
        gradient[j] = (forward - backward) / (2.0 * steps[j])
    return gradient


class GradientBackend(ABC):
    """Strategy computing the objective gradient after the forward runs of one evaluation."""

    kind: GradientBackendKind

    @abstractmethod
    def gradient(self, objective, d: np.ndarray, runs) -> np.ndarray:
        pass


class BlockGradientBackend(GradientBackend):
    """Gradient from the block sensitivity solves, reusing each gas's factorization."""

    kind = GradientBackendKind.BLOCK

    def gradient(self, objective, d: np.ndarray, runs) -> np.ndarray:
        gradient = np.zeros(d.size)
        for run in runs:
            block = objective.sensitivity_block(run)
            gradient += 2.0 * run.residual[1:] @ block.V_end
        return gradient


class FiniteDifferenceGradientBackend(GradientBackend):
    kind = GradientBackendKind.FINITE_DIFFERENCE

    def __init__(self, eps_rule: Callable[[np.ndarray], np.ndarray] = relative_step_rule):
        self.eps_rule = eps_rule

    def gradient(self, objective, d: np.ndarray, runs) -> np.ndarray:
        return central_difference_gradient(objective.value, d, self.eps_rule)


def get_gradient_backend(kind: GradientBackendKind) -> GradientBackend:
    if kind is GradientBackendKind.FINITE_DIFFERENCE:
        return FiniteDifferenceGradientBackend()
    return BlockGradientBackend()
