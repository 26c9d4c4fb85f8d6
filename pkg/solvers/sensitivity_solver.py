"""End-time sensitivities of the forward solution to the diffusion profile.

Two forcing rules drive the sensitivity march. IMPLICIT, the default, pairs the
operator derivative with the new time level, 2 L_{i+1}, which is the exact
derivative of the implicit Euler step and matches finite differences of the
discrete misfit. TRAPEZOIDAL uses the two-level sum L_i + L_{i+1} of the
continuous sensitivity equation and differs by O(dt).
"""

import logging
import time
from typing import Optional, Tuple

import numpy as np

from discretization.assembly import (
    assemble_direction_operator,
    boundary_constant_c2,
    galerkin_mass,
    profile_values,
    structured_J_block,
)
from domain_models import (
    FirnParams,
    ForwardTrace,
    Mesh,
    SensitivityBlock,
    SensitivityScheme,
    TimeGrid,
)
from exceptions import ConfigurationError, NonFiniteSolutionError
from solvers.banded_system import BandedSystem, assemble_system

logger = logging.getLogger(__name__)


def _check_trace(mesh: Mesh, grid: TimeGrid, trace: ForwardTrace):
    if trace.mesh.size != mesh.size or not np.array_equal(trace.mesh.nodes, mesh.nodes):
        raise ConfigurationError("Forward trace was computed on a different mesh")
    if trace.grid.steps != grid.steps:
        raise ConfigurationError(
            f"Forward trace has {trace.grid.steps} time levels, grid has {grid.steps}"
        )


def _forcing_state(
    trace: ForwardTrace, i: int, scheme: SensitivityScheme
) -> Tuple[np.ndarray, float]:
    """Interior state driving step i -> i + 1 and the matching boundary weight of c2.

    The implicit rule differentiates the forward step exactly; the trapezoidal rule
    averages the two time levels.
    """
    lam = trace.lam
    rho = lam[0]
    if scheme is SensitivityScheme.IMPLICIT:
        return 2.0 * lam[1:, i + 1], 2.0 * rho[i + 1]
    return lam[1:, i + 1] + lam[1:, i], rho[i] + rho[i + 1]


def block_sensitivity_solve(
    mesh: Mesh,
    grid: TimeGrid,
    params: FirnParams,
    r_alpha: float,
    D_alpha,
    trace: ForwardTrace,
    system: Optional[BandedSystem] = None,
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
) -> SensitivityBlock:
    """End-time sensitivities of one gas to every nodal perturbation of d at once.

    All n directions share the factorized forward system, so each time step is a
    single solve with n right-hand sides.
    """
    _check_trace(mesh, grid, trace)
    values = profile_values(mesh, D_alpha)
    if system is None:
        system = assemble_system(mesh, grid, params, values)
    mass = system.mass if system.mass is not None else galerkin_mass(mesh)

    time_scale = params.Te * grid.dt
    c2 = boundary_constant_c2(mesh, params, r_alpha, trace.c1_mode)

    block = np.zeros((mesh.size - 1, mesh.size), order="F")
    start_time = time.perf_counter()
    for i in range(grid.steps - 1):
        state, boundary_weight = _forcing_state(trace, i, scheme)
        forcing = structured_J_block(state, params, r_alpha, mesh)
        p = c2 * boundary_weight
        forcing[0, 0] += p
        forcing[0, 1] += p

        block = system.solve(mass.matvec(block) - time_scale * forcing)
        if not np.all(np.isfinite(block)):
            logger.error(f"Sensitivity solve produced non-finite values at step {i + 1}")
            raise NonFiniteSolutionError(
                f"Non-finite sensitivity at time step {i + 1}", step=i + 1
            )

    logger.debug(
        f"Block sensitivity solve (r={r_alpha}, {scheme.value}): "
        f"{mesh.size} directions, {time.perf_counter() - start_time:.3f}s"
    )
    return SensitivityBlock(V_end=block, scheme=scheme)


def single_direction_solve(
    mesh: Mesh,
    grid: TimeGrid,
    params: FirnParams,
    r_alpha: float,
    D_alpha,
    beta: np.ndarray,
    trace: ForwardTrace,
    system: Optional[BandedSystem] = None,
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
) -> np.ndarray:
    """End-time sensitivity of one gas along an arbitrary direction beta."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (mesh.size,):
        raise ConfigurationError(f"Direction has shape {beta.shape}, expected ({mesh.size},)")
    _check_trace(mesh, grid, trace)

    values = profile_values(mesh, D_alpha)
    if system is None:
        system = assemble_system(mesh, grid, params, values)
    mass = system.mass if system.mass is not None else galerkin_mass(mesh)

    time_scale = params.Te * grid.dt
    operator = assemble_direction_operator(mesh, params, r_alpha, beta)
    c2_beta = boundary_constant_c2(mesh, params, r_alpha, trace.c1_mode) * (beta[0] + beta[1])

    sensitivity = np.zeros(mesh.size - 1)
    for i in range(grid.steps - 1):
        state, boundary_weight = _forcing_state(trace, i, scheme)
        forcing = operator.matvec(state)
        forcing[0] += c2_beta * boundary_weight
        sensitivity = system.solve(mass.matvec(sensitivity) - time_scale * forcing)
        if not np.all(np.isfinite(sensitivity)):
            raise NonFiniteSolutionError(
                f"Non-finite sensitivity at time step {i + 1}", step=i + 1
            )

    return sensitivity
