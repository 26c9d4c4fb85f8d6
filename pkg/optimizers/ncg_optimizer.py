import logging
import time
from typing import Callable, Dict

import numpy as np

from constants import RESTART_FACTOR
from domain_models import BetaRule, OptimizerConfig, OptimizerMethod, OptimizerReport
from optimizers.base_optimizer import BaseOptimizer, MinimizationProblem
from optimizers.line_search import line_search_strong_wolfe

logger = logging.getLogger(__name__)


def _safe_ratio(numerator: float, denominator: float) -> float:
    if not np.isfinite(denominator) or abs(denominator) < np.finfo(float).tiny:
        return 0.0
    ratio = numerator / denominator
    return float(ratio) if np.isfinite(ratio) else 0.0


def beta_hestenes_stiefel(gradient, previous_gradient, direction) -> float:
    y = gradient - previous_gradient
    return _safe_ratio(gradient @ y, direction @ y)


def beta_fletcher_reeves(gradient, previous_gradient, direction) -> float:
    return _safe_ratio(gradient @ gradient, previous_gradient @ previous_gradient)


def beta_polak_ribiere(gradient, previous_gradient, direction) -> float:
    y = gradient - previous_gradient
    return _safe_ratio(gradient @ y, previous_gradient @ previous_gradient)


def beta_hager_zhang(gradient, previous_gradient, direction) -> float:
    y = gradient - previous_gradient
    curvature = direction @ y
    if not np.isfinite(curvature) or abs(curvature) < np.finfo(float).tiny:
        return 0.0
    corrected = y - 2.0 * direction * (y @ y) / curvature
    return _safe_ratio(corrected @ gradient, curvature)


BETA_RULES: Dict[BetaRule, Callable[[np.ndarray, np.ndarray, np.ndarray], float]] = {
    BetaRule.HS: beta_hestenes_stiefel,
    BetaRule.FR: beta_fletcher_reeves,
    BetaRule.PR: beta_polak_ribiere,
    BetaRule.HZ: beta_hager_zhang,
}


class NonlinearCGOptimizer(BaseOptimizer):
    """Steepest descent or nonlinear conjugate gradients with a strong-Wolfe line search.

    Directions restart from the negative gradient when they stop being descent
    directions and every `restart_every` iterations (5n by default).
    """

    def __init__(self, config: OptimizerConfig):
        super().__init__(config)
        self.steepest = config.method is OptimizerMethod.STEEPEST

    @property
    def description(self) -> str:
        if self.steepest:
            return "steepest descent"
        return f"ncg-{self.config.beta_rule.value}"

    def _beta(self, gradient, previous_gradient, direction) -> float:
        if self.steepest:
            return 0.0
        return BETA_RULES[self.config.beta_rule](gradient, previous_gradient, direction)

    def minimize(self, problem: MinimizationProblem, x0: np.ndarray) -> OptimizerReport:
        config = self.config
        start_time = time.perf_counter()
        x = np.array(x0, dtype=float)

        value, gradient = self._value_and_gradient(problem, x)
        gradient_norm = float(np.linalg.norm(gradient))
        threshold = config.tol_grad * max(1.0, gradient_norm)
        restart_every = config.restart_every or RESTART_FACTOR * x.size

        objective_history = [value]
        grad_norm_history = [gradient_norm]
        direction = -gradient
        # First step length comes out as roughly 1 / |g0|
        previous_value = value + gradient_norm / 2.0
        since_restart = 0
        iterations = 0
        reason = "max_iters"

        if gradient_norm <= threshold:
            reason = "gradient_tolerance"

        while reason == "max_iters" and iterations < config.max_iters:
            slope = float(gradient @ direction)
            if slope >= 0.0:
                logger.debug(f"Iteration {iterations}: not a descent direction, restarting")
                direction, slope, since_restart = -gradient, -gradient_norm**2, 0

            trial_cache = {}

            def phi(alpha: float) -> float:
                return self._trial_value(problem, x + alpha * direction)

            def derphi(alpha: float) -> float:
                trial_value, trial_gradient = self._value_and_gradient(problem, x + alpha * direction)
                trial_cache[alpha] = (trial_value, trial_gradient)
                return float(trial_gradient @ direction)

            search = line_search_strong_wolfe(
                phi,
                derphi,
                value,
                slope,
                alpha0=self._initial_step(value, previous_value, slope),
                c1=config.wolfe_c1,
                c2=config.wolfe_c2,
                max_steps=config.max_line_search_steps,
            )
            sufficient = search.alpha > 0.0 and search.phi <= value + config.wolfe_c1 * search.alpha * slope
            if not sufficient:
                if since_restart > 0:
                    logger.debug(f"Iteration {iterations}: line search failed, restarting")
                    direction, since_restart = -gradient, 0
                    continue
                reason = "line_search_failed"
                break

            x = x + search.alpha * direction
            if search.alpha in trial_cache:
                new_value, new_gradient = trial_cache[search.alpha]
            else:
                new_value, new_gradient = self._value_and_gradient(problem, x)

            beta = self._beta(new_gradient, gradient, direction)
            previous_value, value, gradient = value, new_value, new_gradient
            gradient_norm = float(np.linalg.norm(gradient))
            iterations += 1
            objective_history.append(value)
            grad_norm_history.append(gradient_norm)

            if gradient_norm <= threshold:
                reason = "gradient_tolerance"
                break

            since_restart += 1
            if since_restart >= restart_every:
                beta, since_restart = 0.0, 0
            direction = -gradient + beta * direction

        wall_time = time.perf_counter() - start_time
        logger.info(
            f"{self.description}: {iterations} iterations, V={value:.6e}, "
            f"|g|={gradient_norm:.3e}, {reason}"
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
