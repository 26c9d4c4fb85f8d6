import logging
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel

from constants import WOLFE_C1, WOLFE_C2
from exceptions import OptimizationError

logger = logging.getLogger(__name__)

ZOOM_MAX_ITERATIONS = 10
CUBIC_SAFEGUARD = 0.2
QUADRATIC_SAFEGUARD = 0.1


class LineSearchResult(BaseModel):
    alpha: float
    phi: float
    derphi: Optional[float] = None
    converged: bool
    evaluations: int


class _TrialRecorder:
    """Wraps phi and phi' to count calls and remember the lowest value seen."""

    def __init__(self, phi: Callable[[float], float], derphi: Callable[[float], float]):
        self._phi = phi
        self._derphi = derphi
        self.evaluations = 0
        self.best_alpha = 0.0
        self.best_phi = np.inf

    def value(self, alpha: float) -> float:
        self.evaluations += 1
        result = float(self._phi(alpha))
        if result < self.best_phi:
            self.best_alpha, self.best_phi = alpha, result
        return result

    def slope(self, alpha: float) -> float:
        return float(self._derphi(alpha))


def _cubic_minimizer(a, fa, fpa, b, fb, c, fc) -> Optional[float]:
    """Minimizer of the cubic through (a, fa), (b, fb), (c, fc) with slope fpa at a."""
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            db, dc = b - a, c - a
            denominator = (db * dc) ** 2 * (db - dc)
            rhs = np.array([fb - fa - fpa * db, fc - fa - fpa * dc])
            coefficients = np.array([[dc**2, -(db**2)], [-(dc**3), db**3]]) @ rhs
            cubic, quadratic = coefficients / denominator
            radical = quadratic * quadratic - 3.0 * cubic * fpa
            minimizer = a + (-quadratic + np.sqrt(radical)) / (3.0 * cubic)
        except ArithmeticError:
            return None
    return float(minimizer) if np.isfinite(minimizer) else None


def _quadratic_minimizer(a, fa, fpa, b, fb) -> Optional[float]:
    """Minimizer of the parabola through (a, fa), (b, fb) with slope fpa at a."""
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            db = b - a
            curvature = (fb - fa - fpa * db) / (db * db)
            minimizer = a - fpa / (2.0 * curvature)
        except ArithmeticError:
            return None
    return float(minimizer) if np.isfinite(minimizer) else None


def _zoom(
    recorder: _TrialRecorder,
    alpha_lo: float,
    alpha_hi: float,
    phi_lo: float,
    phi_hi: float,
    derphi_lo: float,
    phi0: float,
    derphi0: float,
    c1: float,
    c2: float,
) -> LineSearchResult:
    """Shrink a bracket known to contain a strong-Wolfe point.

    Trial points come from a cubic model, then a quadratic one, then bisection,
    whichever first lands safely inside the bracket.
    """
    phi_previous, alpha_previous = phi0, 0.0

    for iteration in range(ZOOM_MAX_ITERATIONS + 1):
        width = alpha_hi - alpha_lo
        low, high = (alpha_hi, alpha_lo) if width < 0 else (alpha_lo, alpha_hi)

        trial = None
        if iteration > 0:
            margin = CUBIC_SAFEGUARD * width
            trial = _cubic_minimizer(
                alpha_lo, phi_lo, derphi_lo, alpha_hi, phi_hi, alpha_previous, phi_previous
            )
            if trial is not None and (trial > high - margin or trial < low + margin):
                trial = None
        if trial is None:
            margin = QUADRATIC_SAFEGUARD * width
            trial = _quadratic_minimizer(alpha_lo, phi_lo, derphi_lo, alpha_hi, phi_hi)
            if trial is None or trial > high - margin or trial < low + margin:
                trial = alpha_lo + 0.5 * width

        phi_trial = recorder.value(trial)
        if phi_trial > phi0 + c1 * trial * derphi0 or phi_trial >= phi_lo:
            phi_previous, alpha_previous = phi_hi, alpha_hi
            alpha_hi, phi_hi = trial, phi_trial
            continue

        derphi_trial = recorder.slope(trial)
        if abs(derphi_trial) <= -c2 * derphi0:
            return LineSearchResult(
                alpha=trial,
                phi=phi_trial,
                derphi=derphi_trial,
                converged=True,
                evaluations=recorder.evaluations,
            )

        if derphi_trial * (alpha_hi - alpha_lo) >= 0:
            phi_previous, alpha_previous = phi_hi, alpha_hi
            alpha_hi, phi_hi = alpha_lo, phi_lo
        else:
            phi_previous, alpha_previous = phi_lo, alpha_lo
        alpha_lo, phi_lo, derphi_lo = trial, phi_trial, derphi_trial

    return _best_effort(recorder, "zoom did not converge")


def _best_effort(recorder: _TrialRecorder, reason: str) -> LineSearchResult:
    logger.warning(f"Strong Wolfe search failed ({reason}); best step {recorder.best_alpha:.3e}")
    return LineSearchResult(
        alpha=recorder.best_alpha,
        phi=recorder.best_phi,
        derphi=None,
        converged=False,
        evaluations=recorder.evaluations,
    )


def line_search_strong_wolfe(
    phi: Callable[[float], float],
    derphi: Callable[[float], float],
    phi0: float,
    derphi0: float,
    alpha0: float = 1.0,
    c1: float = WOLFE_C1,
    c2: float = WOLFE_C2,
    max_steps: int = 30,
) -> LineSearchResult:
    """Find alpha with phi(alpha) <= phi0 + c1 alpha phi'(0) and |phi'(alpha)| <= c2 |phi'(0)|.

    The trial step doubles until the conditions hold or a bracket is found, which
    is then zoomed. When the budget runs out the lowest phi seen is returned with
    converged=False; the caller decides whether it is an acceptable decrease.
    """
    if not np.isfinite(derphi0) or derphi0 >= 0.0:
        raise OptimizationError(f"Not a descent direction: phi'(0) = {derphi0}")
    if alpha0 <= 0.0 or not np.isfinite(alpha0):
        alpha0 = 1.0

    recorder = _TrialRecorder(phi, derphi)
    alpha_prev, phi_prev, derphi_prev = 0.0, phi0, derphi0
    alpha = alpha0

    for step in range(max_steps):
        phi_alpha = recorder.value(alpha)
        if not np.isfinite(phi_alpha) or phi_alpha > phi0 + c1 * alpha * derphi0 or (
            step > 0 and phi_alpha >= phi_prev
        ):
            return _zoom(
                recorder, alpha_prev, alpha, phi_prev, phi_alpha, derphi_prev, phi0, derphi0, c1, c2
            )

        derphi_alpha = recorder.slope(alpha)
        if abs(derphi_alpha) <= -c2 * derphi0:
            return LineSearchResult(
                alpha=alpha,
                phi=phi_alpha,
                derphi=derphi_alpha,
                converged=True,
                evaluations=recorder.evaluations,
            )
        if derphi_alpha >= 0.0:
            return _zoom(
                recorder, alpha, alpha_prev, phi_alpha, phi_prev, derphi_alpha, phi0, derphi0, c1, c2
            )

        alpha_prev, phi_prev, derphi_prev = alpha, phi_alpha, derphi_alpha
        alpha *= 2.0

    return _best_effort(recorder, "bracketing budget exhausted")
