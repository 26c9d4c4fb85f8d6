import logging
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np

from constants import ADAPTIVE_BANDS, NODE_MATCH_TOLERANCE, UNIFORM_SPACING_TOLERANCE
from domain_models import DtRule, Mesh, MeshKind, TimeGrid
from exceptions import ConfigurationError, MeshError
from utils import parse_fraction

logger = logging.getLogger(__name__)

StepSize = Union[str, float, Fraction]


def build_uniform_mesh(h: StepSize) -> Mesh:
    """Equally spaced nodes 0, h, 2h, ..., 1."""
    step = parse_fraction(h)
    if step <= 0 or step > 1:
        raise MeshError(f"Mesh size must lie in (0, 1], got {h}")

    cells = 1 / step
    if cells.denominator != 1:
        raise MeshError(f"Mesh size {h} does not divide [0, 1] into whole cells")

    cells = int(cells)
    nodes = np.arange(cells + 1, dtype=float) / cells
    logger.debug(f"Uniform mesh h={step}: {cells + 1} nodes")
    return Mesh(nodes=nodes, kind=MeshKind.UNIFORM, h=float(step))


def build_adaptive_mesh(h: StepSize) -> Mesh:
    """Five-band mesh refined towards the surface.

    Spacing is h/16 on [0, 1/16], h/8 on [1/16, 1/8], h/4 on [1/8, 1/4],
    h/2 on [1/4, 1/2] and h on [1/2, 1]. Band boundaries are nodes.
    """
    step = parse_fraction(h)
    if step <= 0 or step > 1:
        raise MeshError(f"Mesh size must lie in (0, 1], got {h}")

    coordinates: List[Fraction] = [Fraction(0)]
    for start, end, divisor in ADAPTIVE_BANDS:
        band_step = step / divisor
        cells = (end - start) / band_step
        if cells.denominator != 1:
            raise MeshError(
                f"Mesh size {h} leaves band [{start}, {end}] with a fractional cell count ({cells})"
            )
        coordinates.extend(start + band_step * i for i in range(1, int(cells) + 1))

    nodes = np.array([float(z) for z in coordinates])
    logger.debug(f"Adaptive mesh h={step}: {nodes.size} nodes")
    return Mesh(nodes=nodes, kind=MeshKind.ADAPTIVE, h=float(step))


def build_mesh(h: StepSize, kind: MeshKind = MeshKind.UNIFORM) -> Mesh:
    if kind is MeshKind.ADAPTIVE:
        return build_adaptive_mesh(h)
    return build_uniform_mesh(h)


def mesh_from_nodes(nodes: np.ndarray, h: Optional[float] = None) -> Mesh:
    """Rebuild a mesh from stored coordinates, e.g. the z column of a dataset."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise MeshError("At least two node coordinates are required")

    spacings = np.diff(nodes)
    spread = float(np.max(spacings) - np.min(spacings))
    uniform = spread <= UNIFORM_SPACING_TOLERANCE * float(np.max(np.abs(spacings)))
    if uniform:
        # Snap to exact multiples so that stored round-off does not leak into assembly
        nodes = np.arange(nodes.size, dtype=float) / (nodes.size - 1)
    kind = MeshKind.UNIFORM if uniform else MeshKind.ADAPTIVE
    nominal = h if h is not None else float(np.max(spacings))

    try:
        return Mesh(nodes=nodes, kind=kind, h=nominal)
    except ValueError as e:
        raise MeshError(f"Stored nodes do not form a mesh on [0, 1]: {e}") from e


def build_time_grid(dt: StepSize) -> TimeGrid:
    step = parse_fraction(dt)
    if step <= 0 or step > 1 or (1 / step).denominator != 1:
        raise ConfigurationError(f"Time step {dt} does not divide [0, 1]")
    return TimeGrid(dt=float(step))


def time_step_for(mesh: Mesh, rule: DtRule) -> Fraction:
    """dt = h or dt = h^2 for the nominal h of the mesh."""
    h = parse_fraction(mesh.h)
    return h if rule is DtRule.H else h * h


def common_node_indices(a: Mesh, b: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """Index pairs (ia, ib) of nodes that both meshes share to within 1e-12."""
    positions = np.searchsorted(b.nodes, a.nodes)
    positions = np.clip(positions, 0, b.size - 1)
    # The match may sit just below the insertion point
    below = np.clip(positions - 1, 0, b.size - 1)
    closer_below = np.abs(b.nodes[below] - a.nodes) < np.abs(b.nodes[positions] - a.nodes)
    positions = np.where(closer_below, below, positions)

    matched = np.isclose(b.nodes[positions], a.nodes, rtol=0.0, atol=NODE_MATCH_TOLERANCE)
    ia = np.flatnonzero(matched)
    return ia, positions[matched]
