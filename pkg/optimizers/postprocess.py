import logging
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from domain_models import PostprocessMode
from exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def postprocess_profile(
    d: np.ndarray,
    mode: PostprocessMode = PostprocessMode.NONE,
    degree: Optional[int] = None,
    nodes: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Clean up a recovered profile: identity, clamp at zero, or least-squares polynomial."""
    d = np.asarray(d, dtype=float)
    if mode is PostprocessMode.NONE:
        return d.copy()

    if mode is PostprocessMode.CLAMP_NONNEG:
        negatives = int(np.count_nonzero(d < 0.0))
        if negatives:
            logger.info(f"Clamping {negatives} negative diffusion values to zero")
        return np.maximum(d, 0.0)

    if degree is None or degree < 0:
        raise ConfigurationError("Polynomial post-processing needs a nonnegative degree")
    if degree >= d.size:
        raise ConfigurationError(
            f"Polynomial degree {degree} must be below the number of nodes ({d.size})"
        )
    z = np.linspace(0.0, 1.0, d.size) if nodes is None else np.asarray(nodes, dtype=float)
    return Polynomial.fit(z, d, degree)(z)
