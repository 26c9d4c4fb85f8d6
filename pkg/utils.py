from fractions import Fraction
from typing import Union
import logging

import numpy as np

from constants import DISCREPANCY_FLOOR, OSCILLATION_RELATIVE_TOLERANCE
from exceptions import ConfigurationError


logger = logging.getLogger(__name__)


def parse_fraction(value: Union[str, float, int, Fraction]) -> Fraction:
    """Parse a mesh or time step given as `1/128`, `0.0625` or a number into an exact fraction."""
    if isinstance(value, Fraction):
        return value
    try:
        if isinstance(value, str):
            text = value.strip()
            if not text:
                raise ValueError("empty value")
            if "/" in text:
                numerator, denominator = text.split("/", 1)
                return Fraction(int(numerator.strip()), int(denominator.strip()))
            return Fraction(text).limit_denominator(10**9)
        # Floats such as 1/3 carry representation error; recover the intended ratio
        return Fraction(float(value)).limit_denominator(10**9)

    except (ValueError, ZeroDivisionError) as e:
        logger.warning(f"Could not parse step size: {value!r}, error: {e}")
        raise ConfigurationError(f"Invalid step size {value!r}: expected a fraction like 1/16") from e


def format_fraction(value: Fraction) -> str:
    """Render a step size for file names, e.g. Fraction(1, 16) -> '1-16'."""
    value = Fraction(value)
    if value.numerator == 1:
        return f"1-{value.denominator}"
    return f"{value.numerator}-{value.denominator}"


def relative_l2_error(approx: np.ndarray, reference: np.ndarray) -> float:
    """Discrete l2 error of approx relative to reference; absolute error when the reference is zero."""
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    error = float(np.linalg.norm(approx - reference))
    scale = float(np.linalg.norm(reference))
    return error / scale if scale > 0.0 else error


def count_sign_changes(profile: np.ndarray, rel_tol: float = OSCILLATION_RELATIVE_TOLERANCE) -> int:
    """Count sign changes between consecutive differences of a profile.

    Differences below rel_tol * max|profile| are ignored so that round-off in the
    decayed tail of a profile is not mistaken for oscillation.
    """
    profile = np.asarray(profile, dtype=float)
    if profile.size < 3:
        return 0
    scale = float(np.max(np.abs(profile)))
    if scale == 0.0:
        return 0
    differences = np.diff(profile)
    significant = differences[np.abs(differences) > rel_tol * scale]
    if significant.size < 2:
        return 0
    signs = np.sign(significant)
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def max_relative_discrepancy(
    candidate: np.ndarray, reference: np.ndarray, floor: float = DISCREPANCY_FLOOR
) -> float:
    """Largest |candidate_j - reference_j| / |reference_j| over all components.

    Components smaller than floor * max|reference| are scaled by that floor, so
    entries that are zero in the reference do not divide by zero.
    """
    candidate = np.asarray(candidate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if reference.size == 0:
        return 0.0
    difference = np.abs(candidate - reference)
    largest = float(np.max(np.abs(reference)))
    if largest == 0.0:
        return float(np.max(difference))
    scale = np.maximum(np.abs(reference), floor * largest)
    return float(np.max(difference / scale))
