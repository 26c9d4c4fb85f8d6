import logging
import time
from typing import Optional, Tuple

import numpy as np

from constants import OSCILLATION_FRACTION, OSCILLATION_RELATIVE_TOLERANCE
from discretization.assembly import boundary_constant_c1, galerkin_mass, profile_values
from discretization.mesh import common_node_indices
from domain_models import C1Mode, ErrorReport, FirnParams, ForwardTrace, Mesh, TimeGrid
from exceptions import ConfigurationError, NonFiniteSolutionError
from solvers.banded_system import BandedSystem, assemble_system
from utils import count_sign_changes

logger = logging.getLogger(__name__)


def forward_solve(
    mesh: Mesh,
    grid: TimeGrid,
    params: FirnParams,
    D_alpha,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
    system: Optional[BandedSystem] = None,
) -> ForwardTrace:
    """March the implicit Euler scheme from the zero state to t = 1.

    Each step solves [M + Te*dt*C] L_{i+1} = M L_i - b_i where only the first
    entry of b_i is nonzero and carries the atmospheric boundary coupling.
    """
    values = profile_values(mesh, D_alpha)
    if system is None:
        system = assemble_system(mesh, grid, params, values)
    if system.dim != mesh.size - 1:
        raise ConfigurationError("Factorized system does not match the mesh")

    mass = system.mass if system.mass is not None else galerkin_mass(mesh)
    time_scale = params.Te * grid.dt
    c1 = boundary_constant_c1(mesh, params, values, c1_mode)
    z2 = mesh.second_node
    rho = params.rho_atm(grid.times)

    lam = np.zeros((mesh.size, grid.steps), order="F")
    lam[0, :] = rho

    start_time = time.perf_counter()
    for i in range(grid.steps - 1):
        rhs = mass.matvec(lam[1:, i])
        rhs[0] -= time_scale * rho[i + 1] * c1 + (rho[i + 1] - rho[i]) * z2 / 6.0
        column = system.solve(rhs)
        if not np.all(np.isfinite(column)):
            logger.error(f"Forward solve produced non-finite values at step {i + 1}")
            raise NonFiniteSolutionError(f"Non-finite solution at time step {i + 1}", step=i + 1)
        lam[1:, i + 1] = column
    wall_time = time.perf_counter() - start_time

    logger.debug(
        f"Forward solve: {mesh.size} nodes, {grid.steps} time levels, {wall_time:.3f}s"
    )
    return ForwardTrace(
        lam=lam, mesh=mesh, grid=grid, params=params, c1_mode=c1_mode, wall_time=wall_time
    )


def compare_traces(
    a: ForwardTrace, b: ForwardTrace, at_nodes: Optional[Mesh] = None
) -> ErrorReport:
    """Errors of a's end-time profile against the reference b at their common nodes.

    at_nodes restricts the comparison further, e.g. to the nodes of the coarsest mesh
    of a refinement study.
    """
    if a.params.zF != b.params.zF or a.params.Te != b.params.Te:
        raise ConfigurationError("Traces compared across different zF or Te")
    return compare_profiles(a.mesh, a.end_profile, b.mesh, b.end_profile, at_nodes)


def compare_profiles(
    mesh_a: Mesh,
    profile_a: np.ndarray,
    mesh_b: Mesh,
    profile_b: np.ndarray,
    at_nodes: Optional[Mesh] = None,
) -> ErrorReport:
    ia, ib = common_node_indices(mesh_a, mesh_b)
    if at_nodes is not None:
        keep, _ = common_node_indices(mesh_a, at_nodes)
        selected = np.isin(ia, keep)
        ia, ib = ia[selected], ib[selected]

    # Both endpoints are always shared; they alone say nothing about the interior
    if ia.size <= 2 and min(mesh_a.size, mesh_b.size) > 2:
        raise ConfigurationError("Meshes share no nodes beyond the endpoints")

    approx = np.asarray(profile_a)[ia]
    reference = np.asarray(profile_b)[ib]
    difference = approx - reference

    linf_abs = float(np.max(np.abs(difference)))
    l2_abs = float(np.linalg.norm(difference))
    linf_scale = float(np.max(np.abs(reference)))
    l2_scale = float(np.linalg.norm(reference))

    return ErrorReport(
        linf_abs=linf_abs,
        linf_rel=linf_abs / linf_scale if linf_scale > 0.0 else linf_abs,
        l2_abs=l2_abs,
        l2_rel=l2_abs / l2_scale if l2_scale > 0.0 else l2_abs,
        common_nodes=int(ia.size),
    )


def detect_oscillation(
    profile: np.ndarray, rel_tol: float = OSCILLATION_RELATIVE_TOLERANCE
) -> Tuple[bool, int]:
    """Flag a profile whose consecutive differences change sign at over 25% of interior nodes."""
    profile = np.asarray(profile, dtype=float)
    sign_changes = count_sign_changes(profile, rel_tol)
    interior = max(profile.size - 2, 0)
    oscillating = interior > 0 and sign_changes > OSCILLATION_FRACTION * interior

    if oscillating:
        logger.warning(f"Oscillating profile: {sign_changes} sign changes over {interior} interior nodes")
    return oscillating, sign_changes
