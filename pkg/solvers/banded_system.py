import logging
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cholesky_banded, eigvalsh_tridiagonal
from scipy.sparse.linalg import splu

from constants import DENSE_EIGEN_LIMIT
from discretization.assembly import assemble_C, galerkin_mass
from discretization.tridiagonal_matrix import TridiagonalMatrix
from domain_models import Diagnostic, FirnParams, Mesh, TimeGrid
from exceptions import SingularSystemError

logger = logging.getLogger(__name__)


class BandedSystem:
    """System matrix M + Te*dt*C with an LU factorization computed once and reused."""

    def __init__(
        self,
        matrix: TridiagonalMatrix,
        factor,
        mass: Optional[TridiagonalMatrix] = None,
        time_scale: Optional[float] = None,
    ):
        self.matrix = matrix
        self.factor = factor
        self.mass = mass
        self.time_scale = time_scale

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for one right-hand side or for every column of a block."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.dim:
            raise ValueError(f"right-hand side has {rhs.shape[0]} rows, system has {self.dim}")
        return self.factor.solve(rhs)


def locate_zero_pivot(matrix: TridiagonalMatrix) -> Optional[int]:
    """Index of the first vanishing pivot of banded elimination with partial pivoting.

    Returns None when every pivot is nonzero. Only two rows are live at any step:
    the pivot candidate carried over (with its fill-in) and the next original row.
    """
    size = matrix.dim
    threshold = np.finfo(float).eps * max(matrix.norm_inf(), np.finfo(float).tiny)

    current = np.array([matrix.diag[0], matrix.sup[0] if size > 1 else 0.0, 0.0])
    for k in range(size):
        if k == size - 1:
            return k if abs(current[0]) <= threshold else None

        following = np.array(
            [matrix.sub[k], matrix.diag[k + 1], matrix.sup[k + 1] if k + 1 < size - 1 else 0.0]
        )
        if abs(following[0]) > abs(current[0]):
            current, following = following, current
        if abs(current[0]) <= threshold:
            return k

        multiplier = following[0] / current[0]
        remainder = following[1:] - multiplier * current[1:]
        current = np.array([remainder[0], remainder[1], 0.0])

    return None


def factorize(
    system_matrix: TridiagonalMatrix,
    mass: Optional[TridiagonalMatrix] = None,
    time_scale: Optional[float] = None,
) -> BandedSystem:
    """LU-factorize a tridiagonal system once; raises SingularSystemError on a zero pivot."""
    try:
        # NATURAL ordering keeps the band; pivoting stays partial by rows
        factor = splu(system_matrix.to_sparse(), permc_spec="NATURAL")

    except RuntimeError as e:
        pivot = locate_zero_pivot(system_matrix)
        system = BandedSystem(system_matrix, None, mass, time_scale)
        diagnostic = check_dt_admissible(system)
        logger.error(f"Singular system matrix (pivot {pivot}): {diagnostic.message}")
        raise SingularSystemError(
            f"System matrix is singular at pivot {pivot}; {diagnostic.message}", pivot_index=pivot
        ) from e

    logger.debug(f"Factorized system of dimension {system_matrix.dim}")
    return BandedSystem(system_matrix, factor, mass, time_scale)


def assemble_system(
    mesh: Mesh, grid: TimeGrid, params: FirnParams, D_alpha: np.ndarray
) -> BandedSystem:
    """Factorized M + Te*dt*C_alpha for one gas."""
    mass = galerkin_mass(mesh)
    time_scale = params.Te * grid.dt
    matrix = mass + time_scale * assemble_C(mesh, params, D_alpha)
    return factorize(matrix, mass=mass, time_scale=time_scale)


def check_dt_admissible(system: BandedSystem) -> Diagnostic:
    """Check positive definiteness of the symmetric part of the system matrix.

    Positive definiteness is sufficient for invertibility, not necessary, so a
    failed check is logged as a warning and never raised.
    """
    symmetric = system.matrix.symmetric_part()
    diag, off = symmetric.diag, symmetric.sup
    size = symmetric.dim
    min_eigenvalue = None

    if size <= DENSE_EIGEN_LIMIT:
        if size == 1:
            min_eigenvalue = float(diag[0])
        else:
            min_eigenvalue = float(
                eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0]
            )
        positive_definite = min_eigenvalue > 0.0
        method = "eigenvalue"
    else:
        radii = np.zeros(size)
        radii[:-1] += np.abs(off)
        radii[1:] += np.abs(off)
        gershgorin_bound = float(np.min(diag - radii))
        if gershgorin_bound > 0.0:
            positive_definite = True
            method = "gershgorin"
        else:
            method = "cholesky"
            bands = np.zeros((2, size))
            bands[0, 1:] = off
            bands[1] = diag
            try:
                cholesky_banded(bands, lower=False)
                positive_definite = True
            except LinAlgError:
                positive_definite = False

    step_text = f"Te*dt = {system.time_scale:.6g}" if system.time_scale is not None else "given dt"
    if positive_definite:
        message = f"Symmetric part is positive definite ({method}) for {step_text}"
        logger.debug(message)
    else:
        message = (
            f"Symmetric part is not positive definite ({method}) for {step_text}; "
            f"invertibility is not guaranteed, consider a smaller time step"
        )
        logger.warning(message)

    return Diagnostic(
        positive_definite=positive_definite,
        min_eigenvalue=min_eigenvalue,
        method=method,
        message=message,
    )
