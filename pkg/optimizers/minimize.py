import logging
from typing import Optional

import numpy as np

from domain_models import (
    C1Mode,
    ConstraintKind,
    InverseData,
    OptimizerConfig,
    OptimizerReport,
    SensitivityScheme,
)
from exceptions import ConfigurationError
from inverse.gradient_backend import get_gradient_backend
from inverse.objective import FirnObjective
from optimizers.ncg_optimizer import NonlinearCGOptimizer
from optimizers.projected_optimizer import ProjectedOptimizer
from utils import relative_l2_error

logger = logging.getLogger(__name__)


def build_objective(
    data: InverseData,
    config: OptimizerConfig,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
) -> FirnObjective:
    return FirnObjective(
        data, backend=get_gradient_backend(config.grad_backend), c1_mode=c1_mode, scheme=scheme
    )


def _initial_guess(data: InverseData, d0: Optional[np.ndarray]) -> np.ndarray:
    if d0 is None:
        return np.zeros(data.mesh.size)
    d0 = np.asarray(d0, dtype=float)
    if d0.shape != (data.mesh.size,):
        raise ConfigurationError(f"Initial guess has shape {d0.shape}, expected ({data.mesh.size},)")
    return d0


def _with_reference_error(report: OptimizerReport, data: InverseData) -> OptimizerReport:
    if data.d_true is None:
        return report
    error = relative_l2_error(np.array(report.d_final), data.d_true)
    logger.info(f"{report.method}: l2 relative error vs d_true = {error:.3e}")
    return report.model_copy(update={"l2_relative_error": error})


def ncg_minimize(
    data: InverseData,
    config: OptimizerConfig,
    d0: Optional[np.ndarray] = None,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
) -> OptimizerReport:
    """Unconstrained steepest descent or NCG from d0 (zero by default)."""
    objective = build_objective(data, config, c1_mode, scheme)
    report = NonlinearCGOptimizer(config).minimize(objective, _initial_guess(data, d0))
    return _with_reference_error(report, data)


def projected_minimize(
    data: InverseData,
    config: OptimizerConfig,
    d0: Optional[np.ndarray] = None,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
) -> OptimizerReport:
    """Projected gradient or projected NCG onto d >= 0, optionally nonincreasing."""
    if config.constraints is ConstraintKind.NONE:
        raise ConfigurationError("Projected minimization needs nonneg or dec constraints")
    objective = build_objective(data, config, c1_mode, scheme)
    report = ProjectedOptimizer(config).minimize(objective, _initial_guess(data, d0))
    return _with_reference_error(report, data)


def minimize_profile(
    data: InverseData,
    config: OptimizerConfig,
    d0: Optional[np.ndarray] = None,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
) -> OptimizerReport:
    if config.constraints is ConstraintKind.NONE:
        return ncg_minimize(data, config, d0, c1_mode, scheme)
    return projected_minimize(data, config, d0, c1_mode, scheme)
