"""P1 finite-element matrices of the rescaled firn problem.

All matrices act on the interior unknowns, nodes 1..n-1 of an n-node mesh
(node 0 carries the atmospheric boundary value). Element k joins nodes k and
k + 1 and has length h_k. Diffusion enters through the per-element mean
(D_k + D_{k+1}) / 2, so uniform meshes reproduce the classic stencils exactly.
"""

import logging
from typing import Tuple, Union

import numpy as np

from discretization.tridiagonal_matrix import TridiagonalMatrix
from domain_models import C1Mode, DiffusionProfile, FirnParams, Mesh
from exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ProfileLike = Union[DiffusionProfile, np.ndarray]


def profile_values(mesh: Mesh, D: ProfileLike) -> np.ndarray:
    """Nodal values of D, checked against the mesh."""
    if isinstance(D, DiffusionProfile):
        if D.mesh.size != mesh.size or not np.array_equal(D.mesh.nodes, mesh.nodes):
            raise ConfigurationError("Diffusion profile is sampled on a different mesh")
        return np.asarray(D.values, dtype=float)

    values = np.asarray(D, dtype=float)
    if values.shape != (mesh.size,):
        raise ConfigurationError(
            f"Diffusion profile has shape {values.shape}, expected ({mesh.size},)"
        )
    return values


def assemble_mass(mesh: Mesh, include_boundary_element: bool = False) -> TridiagonalMatrix:
    """Mass matrix of the interior hat functions.

    The default drops the first element from the first diagonal entry, which
    gives the displayed stencil (h/6) * tridiag(1; 2, 4, ..., 4, 2; 1) on uniform
    meshes. Time stepping uses galerkin_mass instead.
    """
    h = mesh.spacings
    left = h.copy()
    if not include_boundary_element and left.size > 1:
        left[0] = 0.0

    diag = left / 3.0
    diag[:-1] += h[1:] / 3.0
    off = h[1:] / 6.0
    return TridiagonalMatrix(sub=off, diag=diag, sup=off)


def galerkin_mass(mesh: Mesh) -> TridiagonalMatrix:
    """Consistent mass of the forward and sensitivity systems, (h/6) * tridiag(1; 4, ..., 4, 2; 1)."""
    return assemble_mass(mesh, include_boundary_element=True)


def assemble_K_Q_B(
    mesh: Mesh, F: float
) -> Tuple[TridiagonalMatrix, TridiagonalMatrix, TridiagonalMatrix]:
    """Advection matrix K, its boundary complement Q = B - K and the outflow matrix B."""
    size = mesh.size - 1
    half = 0.5 * F

    k_diag = np.zeros(size)
    k_diag[-1] = half
    K = TridiagonalMatrix(sub=np.full(size - 1, -half), diag=k_diag, sup=np.full(size - 1, half))

    b_diag = np.zeros(size)
    b_diag[-1] = F
    B = TridiagonalMatrix(sub=np.zeros(size - 1), diag=b_diag, sup=np.zeros(size - 1))

    return K, B - K, B


def assemble_A(mesh: Mesh, D: ProfileLike) -> TridiagonalMatrix:
    """Gravitational drift matrix, entries (D phi_j', phi_i) with the mean-value approximation."""
    values = profile_values(mesh, D)
    weights = (values[:-1] + values[1:]) / 4.0

    diag = weights.copy()
    diag[:-1] -= weights[1:]
    return TridiagonalMatrix(sub=-weights[1:], diag=diag, sup=weights[1:])


def assemble_S(mesh: Mesh, D: ProfileLike) -> TridiagonalMatrix:
    """Diffusion stiffness matrix, entries (D phi_i', phi_j') with the trapezoidal approximation."""
    values = profile_values(mesh, D)
    weights = (values[:-1] + values[1:]) / (2.0 * mesh.spacings)

    diag = weights.copy()
    diag[:-1] += weights[1:]
    return TridiagonalMatrix(sub=-weights[1:], diag=diag, sup=-weights[1:])


def assemble_C(mesh: Mesh, params: FirnParams, D_alpha: ProfileLike) -> TridiagonalMatrix:
    """C = (G/f) M + S / (zF^2 f) - (M_alpha / (zF f)) A + Q / zF."""
    M = galerkin_mass(mesh)
    _, Q, _ = assemble_K_Q_B(mesh, params.F)
    S = assemble_S(mesh, D_alpha)
    A = assemble_A(mesh, D_alpha)

    f, zF = params.f, params.zF
    return (
        (params.G / f) * M
        + (1.0 / (zF**2 * f)) * S
        - (params.Malpha / (zF * f)) * A
        + (1.0 / zF) * Q
    )


def boundary_constant_c1(
    mesh: Mesh,
    params: FirnParams,
    D_alpha: ProfileLike,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
) -> float:
    """Coupling of the first interior unknown to the atmospheric boundary value."""
    values = profile_values(mesh, D_alpha)
    z2 = mesh.second_node
    f = params.f
    zF = params.zF if c1_mode is C1Mode.CONSISTENT else 1.0

    mass_term = params.G * z2 / (6.0 * f)
    diffusion_factor = 1.0 / (2.0 * f * zF**2 * z2) + params.Malpha / (4.0 * zF * f)
    return mass_term - diffusion_factor * (values[0] + values[1]) - params.F / (2.0 * zF)


def boundary_constant_c2(
    mesh: Mesh,
    params: FirnParams,
    r_alpha: float,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
) -> float:
    """Half the derivative of c1 with respect to d_1 (equivalently d_2)."""
    z2 = mesh.second_node
    f = params.f
    zF = params.zF if c1_mode is C1Mode.CONSISTENT else 1.0
    return -r_alpha / (4.0 * zF**2 * f * z2) - r_alpha * params.Malpha / (8.0 * zF * f)


def boundary_forcing_coefficients(
    mesh: Mesh,
    params: FirnParams,
    r_alpha: float,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
) -> np.ndarray:
    """c2 per canonical direction: nonzero only for the two nodes of the first element."""
    coefficients = np.zeros(mesh.size)
    coefficients[:2] = boundary_constant_c2(mesh, params, r_alpha, c1_mode)
    return coefficients


def _element_differences(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ConfigurationError("Structured products take a single interior vector")
    return np.diff(np.concatenate(([0.0], v)))


def _scatter_element_block(element_values: np.ndarray, signs: float) -> np.ndarray:
    """Spread per-element values into the (n-1) x n block of a unit-direction product.

    Element k feeds columns k and k + 1 (the directions touching it) on row k, and
    the same columns on row k - 1 with the given sign.
    """
    size = element_values.size
    block = np.zeros((size, size + 1))
    rows = np.arange(size)

    block[rows, rows] += element_values
    block[rows, rows + 1] += element_values
    block[rows[1:] - 1, rows[1:]] += signs * element_values[1:]
    block[rows[1:] - 1, rows[1:] + 1] += signs * element_values[1:]
    return block


def structured_Ae_product(v: np.ndarray) -> np.ndarray:
    """Block [A(e_1) v, ..., A(e_n) v] in O(n), with v_0 = 0 implied."""
    differences = _element_differences(v)
    return _scatter_element_block(differences / 4.0, +1.0)


def structured_Se_product(v: np.ndarray, h: Union[float, np.ndarray]) -> np.ndarray:
    """Block [S(e_1) v, ..., S(e_n) v] in O(n); h is a scalar or the element spacings."""
    differences = _element_differences(v)
    spacings = np.broadcast_to(np.asarray(h, dtype=float), differences.shape)
    return _scatter_element_block(differences / (2.0 * spacings), -1.0)


def structured_J_block(
    v: np.ndarray, params: FirnParams, r_alpha: float, mesh: Mesh
) -> np.ndarray:
    """r/(2 zF^2 f) Se-block - r M_alpha/(2 zF f) Ae-block."""
    f, zF = params.f, params.zF
    se_block = structured_Se_product(v, mesh.spacings)
    ae_block = structured_Ae_product(v)
    return (r_alpha / (2.0 * zF**2 * f)) * se_block - (
        r_alpha * params.Malpha / (2.0 * zF * f)
    ) * ae_block


def assemble_direction_operator(
    mesh: Mesh, params: FirnParams, r_alpha: float, beta: np.ndarray
) -> TridiagonalMatrix:
    """J_beta = S(r beta) / (2 zF^2 f) - M_alpha A(r beta) / (2 zF f) for one direction."""
    direction = r_alpha * np.asarray(beta, dtype=float)
    f, zF = params.f, params.zF
    return (1.0 / (2.0 * zF**2 * f)) * assemble_S(mesh, direction) - (
        params.Malpha / (2.0 * zF * f)
    ) * assemble_A(mesh, direction)
