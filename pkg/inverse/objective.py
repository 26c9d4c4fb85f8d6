"""Data misfit V(d) = sum over gases of |L_alpha(., 1) - g_alpha|^2 and its gradient.

The value uses every node, including the boundary row; the gradient pairs the
interior residuals with the (n-1) x n end-time sensitivity block of each gas.
"""

import logging
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np

from domain_models import (
    C1Mode,
    ForwardTrace,
    GasObservation,
    GradientBackendKind,
    InverseData,
    ObjectiveEval,
    SensitivityBlock,
    SensitivityScheme,
)
from exceptions import ConfigurationError
from inverse.gradient_backend import (
    GradientBackend,
    central_difference_gradient,
    get_gradient_backend,
    relative_step_rule,
)
from optimizers.base_optimizer import MinimizationProblem
from solvers.banded_system import BandedSystem, assemble_system
from solvers.forward_solver import forward_solve
from solvers.sensitivity_solver import block_sensitivity_solve, single_direction_solve

logger = logging.getLogger(__name__)


class GasRun(NamedTuple):
    gas: GasObservation
    D_alpha: np.ndarray
    system: BandedSystem
    trace: ForwardTrace
    residual: np.ndarray


class FirnObjective(MinimizationProblem):
    """Objective of the diffusion-profile inversion over a fixed dataset."""

    def __init__(
        self,
        data: InverseData,
        backend: Optional[GradientBackend] = None,
        c1_mode: C1Mode = C1Mode.CONSISTENT,
        scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
    ):
        self.data = data
        self.backend = backend or get_gradient_backend(GradientBackendKind.BLOCK)
        self.c1_mode = c1_mode
        self.scheme = scheme
        self.evaluations = 0
        self.forward_solves = 0
        self._warned_negative = False
        self._last_runs: Optional[Tuple[np.ndarray, List[GasRun]]] = None

    def _check_profile(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if d.shape != (self.data.mesh.size,):
            raise ConfigurationError(
                f"Diffusion profile has shape {d.shape}, data mesh has {self.data.mesh.size} nodes"
            )
        if not self._warned_negative and np.any(d < 0.0):
            logger.warning("Diffusion iterate has negative values; continuing without projection")
            self._warned_negative = True
        return d

    def solve_gases(self, d: np.ndarray) -> List[GasRun]:
        """Forward runs for every gas, in dataset order.

        The runs of the last profile are kept, so a line search asking for the
        gradient at the point it just valued only adds the sensitivity solves.
        """
        if self._last_runs is not None and np.array_equal(self._last_runs[0], d):
            return self._last_runs[1]

        data = self.data
        runs = []
        for gas in data.gases:
            D_alpha = gas.r_alpha * d
            system = assemble_system(data.mesh, data.grid, data.params, D_alpha)
            trace = forward_solve(
                data.mesh, data.grid, data.params, D_alpha, self.c1_mode, system=system
            )
            self.forward_solves += 1
            runs.append(GasRun(gas, D_alpha, system, trace, trace.end_profile - gas.g))
        self._last_runs = (np.array(d, dtype=float), runs)
        return runs

    def sensitivity_block(self, run: GasRun) -> SensitivityBlock:
        data = self.data
        return block_sensitivity_solve(
            data.mesh,
            data.grid,
            data.params,
            run.gas.r_alpha,
            run.D_alpha,
            run.trace,
            system=run.system,
            scheme=self.scheme,
        )

    def evaluate(self, d: np.ndarray, want_gradient: bool = False) -> ObjectiveEval:
        d = self._check_profile(d)
        self.evaluations += 1
        runs = self.solve_gases(d)
        value = float(sum(run.residual @ run.residual for run in runs))

        gradient = self.backend.gradient(self, d, runs) if want_gradient else None
        return ObjectiveEval(
            value=value,
            gradient=gradient,
            residuals=tuple(run.residual for run in runs),
        )

    def value(self, d: np.ndarray) -> float:
        return self.evaluate(d).value

    def value_and_gradient(self, d: np.ndarray) -> Tuple[float, np.ndarray]:
        result = self.evaluate(d, want_gradient=True)
        return result.value, result.gradient

    def fd_gradient(
        self, d: np.ndarray, eps_rule: Callable[[np.ndarray], np.ndarray] = relative_step_rule
    ) -> np.ndarray:
        d = self._check_profile(d)
        return central_difference_gradient(self.value, d, eps_rule)

    def directional_derivative(self, d: np.ndarray, beta: np.ndarray) -> float:
        """grad V . beta from one single-direction sensitivity solve per gas."""
        d = self._check_profile(d)
        data = self.data
        derivative = 0.0
        for run in self.solve_gases(d):
            sensitivity = single_direction_solve(
                data.mesh,
                data.grid,
                data.params,
                run.gas.r_alpha,
                run.D_alpha,
                beta,
                run.trace,
                system=run.system,
                scheme=self.scheme,
            )
            derivative += 2.0 * float(run.residual[1:] @ sensitivity)
        return derivative


def evaluate(
    d: np.ndarray,
    data: InverseData,
    want_gradient: bool = False,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT,
) -> ObjectiveEval:
    return FirnObjective(data, c1_mode=c1_mode, scheme=scheme).evaluate(d, want_gradient)


def fd_gradient(
    d: np.ndarray,
    data: InverseData,
    eps_rule: Callable[[np.ndarray], np.ndarray] = relative_step_rule,
    c1_mode: C1Mode = C1Mode.CONSISTENT,
) -> np.ndarray:
    return FirnObjective(data, c1_mode=c1_mode).fd_gradient(d, eps_rule)
