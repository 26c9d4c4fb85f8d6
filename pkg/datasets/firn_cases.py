import logging
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from constants import (
    ADVECTION_SPEED,
    DECAY_RATE,
    DEFAULT_R_ALPHAS,
    GRAVITATIONAL_FACTOR,
    OPEN_PORE_FRACTION,
)
from domain_models import DtRule, FirnParams, TestCaseId

logger = logging.getLogger(__name__)


class TestCase(BaseModel):
    """Closed-form CO2 diffusion profile d_true(z) on [0, 1]."""

    __test__ = False  # not a pytest class

    model_config = ConfigDict(frozen=True)

    id: TestCaseId
    exponent: Optional[float] = None
    description: str

    def d_true(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.exponent is None:
            return 200.0 - 199.98 * z
        # Clip guards round-off just above z = 1
        return 200.0 * np.power(np.clip(1.0 - z, 0.0, None), self.exponent)


TEST_CASES: Dict[TestCaseId, TestCase] = {
    TestCaseId.CASE1: TestCase(id=TestCaseId.CASE1, description="200 - 199.98 z"),
    TestCaseId.CASE2A: TestCase(id=TestCaseId.CASE2A, exponent=0.25, description="200 (1 - z)^0.25"),
    TestCaseId.CASE2B: TestCase(id=TestCaseId.CASE2B, exponent=0.5, description="200 (1 - z)^0.5"),
    TestCaseId.CASE2C: TestCase(id=TestCaseId.CASE2C, exponent=0.75, description="200 (1 - z)^0.75"),
    TestCaseId.CASE2D: TestCase(id=TestCaseId.CASE2D, exponent=1.0, description="200 (1 - z)"),
}


def get_test_case(case: Union[TestCaseId, str]) -> TestCase:
    case_id = case if isinstance(case, TestCaseId) else TestCaseId.parse(case)
    return TEST_CASES[case_id]


def default_params(
    zF: float = 1.0, Te: float = 150.0, r_alphas: Sequence[float] = DEFAULT_R_ALPHAS
) -> FirnParams:
    """Firn constants f = 0.2, G = 10.03, F = 685, M_alpha = 1.8134e-4 with rho_atm(t) = 2 (Te t)^(1/4)."""
    return FirnParams(
        f=OPEN_PORE_FRACTION,
        G=DECAY_RATE,
        F=ADVECTION_SPEED,
        Malpha=GRAVITATIONAL_FACTOR,
        zF=zF,
        Te=Te,
        r_alphas=tuple(float(r) for r in r_alphas),
    )


class ExperimentGrid(BaseModel):
    """Parameter sweep of one numerical study."""

    model_config = ConfigDict(frozen=True)

    zF_list: Tuple[float, ...]
    Te_list: Tuple[float, ...]
    h_list: Tuple[str, ...]
    dt_rule: DtRule = DtRule.H2
    reference_h: Optional[str] = None
    h_g: Optional[str] = None


FORWARD_CONVERGENCE_GRID = ExperimentGrid(
    zF_list=(1.0, 50.0, 100.0, 150.0),
    Te_list=(150.0,),
    h_list=("1/16", "1/32", "1/64", "1/128"),
    dt_rule=DtRule.H2,
    reference_h="1/256",
)

DT_RULE_GRID = ExperimentGrid(
    zF_list=(150.0,),
    Te_list=(150.0,),
    h_list=("1/16", "1/64", "1/128", "1/256"),
)

ADAPTIVE_MESH_GRID = ExperimentGrid(
    zF_list=(150.0,),
    Te_list=(150.0,),
    h_list=("1/4", "1/8", "1/16", "1/32", "1/64"),
    dt_rule=DtRule.H,
)

INVERSION_GRID = ExperimentGrid(
    zF_list=(1.0, 5.0, 10.0),
    Te_list=(1.0, 50.0, 100.0, 150.0),
    h_list=("1/16", "1/32", "1/64"),
    dt_rule=DtRule.H,
    h_g="1/65",
)
