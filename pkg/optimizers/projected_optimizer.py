import logging
import time
from typing import Callable

import numpy as np

from constants import RESTART_FACTOR
from domain_models import ConstraintKind, OptimizerConfig, OptimizerMethod, OptimizerReport
from exceptions import ConfigurationError
from optimizers.base_optimizer import BaseOptimizer, MinimizationProblem
from optimizers.ncg_optimizer import BETA_RULES

logger = logging.getLogger(__name__)

STAGNATION_TOLERANCE = 1e-14


def project_nonneg(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def pool_adjacent_violators(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto nonincreasing sequences v_1 >= ... >= v_n.

    Adjacent blocks whose means violate the ordering are merged into their
    pooled mean until no violation remains.
    """
    y = np.asarray(y, dtype=float)
    sums, counts = [], []
    for value in y:
        sums.append(value)
        counts.append(1)
        while len(sums) > 1 and sums[-2] / counts[-2] < sums[-1] / counts[-1]:
            merged_sum = sums.pop() + sums.pop()
            merged_count = counts.pop() + counts.pop()
            sums.append(merged_sum)
            counts.append(merged_count)

    means = np.array(sums) / np.array(counts)
    return np.repeat(means, counts)


def project_nonneg_decreasing(x: np.ndarray) -> np.ndarray:
    """Projection onto nonnegative nonincreasing sequences; clamping the isotonic fit is exact."""
    return np.maximum(pool_adjacent_violators(x), 0.0)


def projection_for(constraints: ConstraintKind) -> Callable[[np.ndarray], np.ndarray]:
    if constraints is ConstraintKind.NONNEG:
        return project_nonneg
    if constraints is ConstraintKind.NONNEG_DECREASING:
        return project_nonneg_decreasing
    raise ConfigurationError(f"No projection for constraints '{constraints.value}'")


class ProjectedOptimizer(BaseOptimizer):
    """Projected gradient or projected NCG with an Armijo search along the projection arc.

    Trial points are P(x + alpha d). The step is accepted when
    V(P(x + alpha d)) <= V(x) + c1 g.(P(x + alpha d) - x); it is doubled while that
    keeps improving and halved otherwise.
    """

    def __init__(self, config: OptimizerConfig):
        super().__init__(config)
        self.project = projection_for(config.constraints)
        self.steepest = config.method is OptimizerMethod.STEEPEST

    @property
    def description(self) -> str:
        base = "projected gradient" if self.steepest else f"projected ncg-{self.config.beta_rule.value}"
        return f"{base} ({self.config.constraints.value})"

    def _stationarity(self, x: np.ndarray, gradient: np.ndarray) -> float:
        return float(np.linalg.norm(self.project(x - gradient) - x))

    def _arc_search(self, problem, x, value, gradient, direction, alpha):
        """Return (alpha, trial point, trial value) with Armijo decrease, or None."""
        c1 = self.config.wolfe_c1

        def armijo_holds(candidate, candidate_value):
            return candidate_value <= value + c1 * float(gradient @ (candidate - x))

        best = None
        for _ in range(self.config.max_line_search_steps):
            candidate = self.project(x + alpha * direction)
            candidate_value = self._trial_value(problem, candidate)
            if armijo_holds(candidate, candidate_value) and candidate_value < value:
                best = (alpha, candidate, candidate_value)
                break
            alpha *= 0.5
        if best is None:
            return None

        # Expand while the larger step still improves
        for _ in range(self.config.max_line_search_steps):
            alpha = 2.0 * best[0]
            candidate = self.project(x + alpha * direction)
            candidate_value = self._trial_value(problem, candidate)
            if not (armijo_holds(candidate, candidate_value) and candidate_value < best[2]):
                break
            best = (alpha, candidate, candidate_value)
        return best

    def minimize(self, problem: MinimizationProblem, x0: np.ndarray) -> OptimizerReport:
        config = self.config
        start_time = time.perf_counter()
        x = self.project(np.array(x0, dtype=float))

        value, gradient = self._value_and_gradient(problem, x)
        stationarity = self._stationarity(x, gradient)
        threshold = config.tol_grad * max(1.0, stationarity)
        restart_every = config.restart_every or RESTART_FACTOR * x.size

        objective_history = [value]
        grad_norm_history = [stationarity]
        direction = -gradient
        previous_value = value + float(np.linalg.norm(gradient)) / 2.0
        since_restart = 0
        iterations = 0
        reason = "max_iters"

        if stationarity <= threshold:
            reason = "gradient_tolerance"

        while reason == "max_iters" and iterations < config.max_iters:
            slope = float(gradient @ direction)
            if slope >= 0.0:
                direction, slope, since_restart = -gradient, -float(gradient @ gradient), 0

            alpha0 = self._initial_step(value, previous_value, slope)
            accepted = self._arc_search(problem, x, value, gradient, direction, alpha0)
            if accepted is None:
                if since_restart > 0:
                    direction, since_restart = -gradient, 0
                    continue
                reason = "line_search_failed"
                break

            _, x_new, _ = accepted
            step_norm = float(np.linalg.norm(x_new - x))
            new_value, new_gradient = self._value_and_gradient(problem, x_new)

            beta = 0.0 if self.steepest else BETA_RULES[config.beta_rule](new_gradient, gradient, direction)
            x = x_new
            previous_value, value, gradient = value, new_value, new_gradient
            stationarity = self._stationarity(x, gradient)
            iterations += 1
            objective_history.append(value)
            grad_norm_history.append(stationarity)

            if stationarity <= threshold:
                reason = "gradient_tolerance"
                break
            if step_norm <= STAGNATION_TOLERANCE * (1.0 + float(np.linalg.norm(x))):
                reason = "stagnation"
                break

            since_restart += 1
            if since_restart >= restart_every:
                beta, since_restart = 0.0, 0
            direction = -gradient + beta * direction

        wall_time = time.perf_counter() - start_time
        logger.info(
            f"{self.description}: {iterations} iterations, V={value:.6e}, "
            f"projected |g|={stationarity:.3e}, {reason}"
        )
        return OptimizerReport(
            method=self.description,
            d_final=x.tolist(),
            iterations=iterations,
            wall_time=wall_time,
            objective_history=objective_history,
            grad_norm_history=grad_norm_history,
            termination_reason=reason,
            function_evaluations=self.function_evaluations,
            gradient_evaluations=self.gradient_evaluations,
        )
