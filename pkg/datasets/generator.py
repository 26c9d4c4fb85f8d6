import logging
from typing import Optional, Union

import numpy as np

from constants import DEFAULT_GENERATION_STEP
from datasets.firn_cases import TestCase, get_test_case
from discretization.mesh import build_time_grid, build_uniform_mesh
from domain_models import C1Mode, FirnParams, GasObservation, InverseData, Mesh, TimeGrid, TestCaseId
from solvers.forward_solver import forward_solve
from utils import format_fraction, parse_fraction

logger = logging.getLogger(__name__)


def generate_data(
    case: Union[TestCase, TestCaseId, str],
    params: FirnParams,
    h_g=DEFAULT_GENERATION_STEP,
    dt=None,
    noise_sigma: float = 0.0,
    seed: Optional[int] = None,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
) -> InverseData:
    """Synthetic end-time concentrations of every gas on a uniform generation mesh.

    Each gas alpha diffuses with D_alpha = r_alpha * d_true; the time step defaults
    to the generation mesh size. Gaussian noise is added only when noise_sigma > 0.
    """
    test_case = case if isinstance(case, TestCase) else get_test_case(case)
    step = parse_fraction(h_g)
    time_step = step if dt is None else parse_fraction(dt)
    mesh = build_uniform_mesh(step)
    grid = build_time_grid(time_step)
    d_true = test_case.d_true(mesh.nodes)

    rng = np.random.default_rng(seed)
    gases = []
    for r_alpha in params.r_alphas:
        trace = forward_solve(mesh, grid, params, r_alpha * d_true, c1_mode)
        g = trace.end_profile.copy()
        if noise_sigma > 0.0:
            g += rng.normal(0.0, noise_sigma, size=g.shape)
        gases.append(GasObservation(r_alpha=r_alpha, g=g))

    logger.info(
        f"Generated {len(gases)} gases for {test_case.id.value} on h_g={step} "
        f"({mesh.size} nodes), dt={time_step}, noise={noise_sigma}"
    )
    return InverseData(
        mesh=mesh,
        grid=grid,
        params=params,
        gases=tuple(gases),
        d_true=d_true,
        provenance={
            "case": test_case.id.value,
            "h_g": format_fraction(step),
            "dt": format_fraction(time_step),
            "zF": params.zF,
            "Te": params.Te,
            "noise": noise_sigma,
            "seed": seed,
            "c1_mode": c1_mode.value,
        },
    )


def resample_linear(
    data: InverseData, target: Mesh, grid: Optional[TimeGrid] = None
) -> InverseData:
    """Piecewise-linear interpolation of every gas onto the target mesh.

    d_true is re-evaluated from its closed form when the dataset names its case,
    interpolated otherwise.
    """
    gases = tuple(
        GasObservation(r_alpha=gas.r_alpha, g=np.interp(target.nodes, data.mesh.nodes, gas.g))
        for gas in data.gases
    )

    d_true = None
    if data.d_true is not None:
        case = data.provenance.get("case")
        if case:
            d_true = get_test_case(case).d_true(target.nodes)
        else:
            d_true = np.interp(target.nodes, data.mesh.nodes, data.d_true)

    logger.debug(f"Resampled {len(gases)} gases from {data.mesh.size} to {target.size} nodes")
    return InverseData(
        mesh=target,
        grid=grid if grid is not None else data.grid,
        params=data.params,
        gases=gases,
        d_true=d_true,
        provenance={**data.provenance, "resampled_to": target.size},
    )
