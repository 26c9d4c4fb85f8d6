import logging
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from constants import (
    ATMOSPHERIC_AMPLITUDE,
    ATMOSPHERIC_EXPONENT,
    DEFAULT_GRADIENT_TOLERANCE,
    DEFAULT_R_ALPHAS,
    NCG_GRADIENT_TOLERANCE,
    UNIFORM_SPACING_TOLERANCE,
    WOLFE_C1,
    WOLFE_C2,
)

logger = logging.getLogger(__name__)


def _frozen_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


class MeshKind(Enum):
    UNIFORM = "uniform"
    ADAPTIVE = "adaptive"


class DtRule(Enum):
    H = "h"
    H2 = "h2"


class C1Mode(Enum):
    CONSISTENT = "consistent"
    LITERAL = "literal"


class SensitivityScheme(Enum):
    IMPLICIT = "implicit"
    TRAPEZOIDAL = "trapezoidal"


class OptimizerMethod(Enum):
    STEEPEST = "sd"
    NCG = "ncg"


class BetaRule(Enum):
    HS = "hs"
    FR = "fr"
    PR = "pr"
    HZ = "hz"


class ConstraintKind(Enum):
    NONE = "none"
    NONNEG = "nonneg"
    NONNEG_DECREASING = "dec"


class GradientBackendKind(Enum):
    BLOCK = "block"
    FINITE_DIFFERENCE = "fd"


class PostprocessMode(Enum):
    NONE = "none"
    CLAMP_NONNEG = "clamp"
    POLYFIT = "polyfit"


class Command(Enum):
    FORWARD = "forward"
    TABLES = "tables"
    GRADCHECK = "gradcheck"
    GENERATE = "generate"
    INVERT = "invert"


class TestCaseId(Enum):
    __test__ = False  # not a pytest class

    CASE1 = "case1"
    CASE2A = "case2a"
    CASE2B = "case2b"
    CASE2C = "case2c"
    CASE2D = "case2d"

    @classmethod
    def parse(cls, value: str) -> "TestCaseId":
        text = str(value).strip().lower()
        if not text.startswith("case"):
            text = f"case{text}"
        return cls(text)


class Mesh(BaseModel):
    """Node coordinates on the rescaled interval [0, 1]."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    nodes: np.ndarray
    kind: MeshKind
    h: float

    @field_validator("nodes", mode="before")
    @classmethod
    def _coerce_nodes(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def validate_nodes(self) -> "Mesh":
        nodes = self.nodes
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a mesh needs at least two nodes")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError(f"mesh must span [0, 1], got [{nodes[0]}, {nodes[-1]}]")
        spacings = np.diff(nodes)
        if np.any(spacings <= 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        if self.kind is MeshKind.UNIFORM:
            spread = float(np.max(spacings) - np.min(spacings))
            if spread > UNIFORM_SPACING_TOLERANCE * float(np.max(spacings)):
                raise ValueError("uniform mesh has unequal spacings")
        return self

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def second_node(self) -> float:
        """z_2, the first interior node."""
        return float(self.nodes[1])


class TimeGrid(BaseModel):
    """Uniform grid t_i = i * dt on [0, 1]."""

    model_config = ConfigDict(frozen=True)

    dt: float = Field(gt=0.0, le=1.0)
    steps: int

    @model_validator(mode="before")
    @classmethod
    def validate_request(cls, values: Dict) -> Dict:
        dt = float(values.get("dt", 0.0))
        if dt <= 0.0 or dt > 1.0:
            raise ValueError(f"time step must lie in (0, 1], got {dt}")
        intervals = round(1.0 / dt)
        if abs(intervals * dt - 1.0) > 1e-12:
            raise ValueError(f"time step {dt} does not divide [0, 1]")
        expected_steps = intervals + 1
        if values.get("steps") is None:
            values = {**values, "steps": expected_steps}
        elif int(values["steps"]) != expected_steps:
            raise ValueError(f"steps must equal 1/dt + 1 = {expected_steps}")
        return values

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) / (self.steps - 1)


class FirnParams(BaseModel):
    """Physical and scaling constants of one firn site."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    f: float = Field(gt=0.0, lt=1.0)
    G: float = Field(gt=0.0)
    F: float = Field(gt=0.0)
    Malpha: float = Field(ge=0.0)
    zF: float = Field(gt=0.0)
    Te: float = Field(gt=0.0)
    r_alphas: Tuple[float, ...] = DEFAULT_R_ALPHAS
    atm_amplitude: float = ATMOSPHERIC_AMPLITUDE
    atm_exponent: float = Field(default=ATMOSPHERIC_EXPONENT, gt=0.0)
    # Replaces the power law when set; must vanish at t = 0
    rho_atm_override: Optional[Callable[[np.ndarray], np.ndarray]] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def validate_boundary(self) -> "FirnParams":
        if abs(float(self.rho_atm(np.array([0.0]))[0])) > 1e-14:
            raise ValueError("atmospheric concentration must vanish at t = 0")
        return self

    def rho_atm(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.rho_atm_override is not None:
            return np.asarray(self.rho_atm_override(t), dtype=float)
        return self.atm_amplitude * np.power(self.Te * t, self.atm_exponent)


class DiffusionProfile(BaseModel):
    """Nodal samples of a diffusion coefficient on a mesh."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    mesh: Mesh

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)

    @model_validator(mode="after")
    def validate_profile(self) -> "DiffusionProfile":
        if self.values.shape != (self.mesh.size,):
            raise ValueError(
                f"profile has {self.values.size} samples but the mesh has {self.mesh.size} nodes"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("diffusion profile contains non-finite values")
        if np.any(self.values < 0.0):
            raise ValueError("diffusion profile must be nonnegative")
        return self


class ErrorReport(BaseModel):
    linf_abs: float
    linf_rel: float
    l2_abs: float
    l2_rel: float
    common_nodes: int


class Diagnostic(BaseModel):
    positive_definite: bool
    min_eigenvalue: Optional[float] = None
    method: str
    message: str


class ForwardTrace(BaseModel):
    """All time columns of one forward run; row 0 is the atmospheric boundary."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    lam: np.ndarray
    mesh: Mesh
    grid: TimeGrid
    params: FirnParams
    c1_mode: C1Mode = C1Mode.CONSISTENT
    wall_time: float = 0.0

    @model_validator(mode="after")
    def validate_shape(self) -> "ForwardTrace":
        if self.lam.shape != (self.mesh.size, self.grid.steps):
            raise ValueError(
                f"trace shape {self.lam.shape} does not match mesh/grid "
                f"({self.mesh.size}, {self.grid.steps})"
            )
        return self

    @property
    def end_profile(self) -> np.ndarray:
        return self.lam[:, -1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def time_per_step(self) -> float:
        return self.wall_time / max(self.grid.steps - 1, 1)


class SensitivityBlock(BaseModel):
    """End-time sensitivities; column j is the response to a perturbation of d at node j."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    V_end: np.ndarray
    scheme: SensitivityScheme = SensitivityScheme.IMPLICIT

    @model_validator(mode="after")
    def validate_block(self) -> "SensitivityBlock":
        rows, columns = self.V_end.shape
        if columns != rows + 1:
            raise ValueError("sensitivity block must be (n-1) x n")
        if not np.all(np.isfinite(self.V_end)):
            raise ValueError("sensitivity block contains non-finite entries")
        return self


class GasObservation(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    r_alpha: float = Field(ge=0.0)
    g: np.ndarray

    @field_validator("g", mode="before")
    @classmethod
    def _coerce_g(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)


class InverseData(BaseModel):
    """End-time concentrations of every gas on a common mesh."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mesh: Mesh
    grid: TimeGrid
    params: FirnParams
    gases: Tuple[GasObservation, ...]
    d_true: Optional[np.ndarray] = None
    provenance: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_gases(self) -> "InverseData":
        if not self.gases:
            raise ValueError("inverse data needs at least one gas")
        for index, gas in enumerate(self.gases):
            if gas.g.shape != (self.mesh.size,):
                raise ValueError(
                    f"gas {index} has {gas.g.size} samples but the mesh has {self.mesh.size} nodes"
                )
        if self.d_true is not None and np.shape(self.d_true) != (self.mesh.size,):
            raise ValueError("d_true must be sampled on the data mesh")
        return self


class ObjectiveEval(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: float = Field(ge=0.0)
    gradient: Optional[np.ndarray] = None
    residuals: Tuple[np.ndarray, ...] = ()


class OptimizerConfig(BaseModel):
    method: OptimizerMethod = OptimizerMethod.NCG
    beta_rule: BetaRule = BetaRule.HZ
    constraints: ConstraintKind = ConstraintKind.NONE
    grad_backend: GradientBackendKind = GradientBackendKind.BLOCK
    tol_grad: Optional[float] = None
    max_iters: int = Field(default=500, gt=0)
    wolfe_c1: float = WOLFE_C1
    wolfe_c2: float = WOLFE_C2
    max_line_search_steps: int = Field(default=30, gt=0)
    restart_every: Optional[int] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def validate_request(self) -> "OptimizerConfig":
        if not 0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0:
            raise ValueError(
                f"Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={self.wolfe_c1}, c2={self.wolfe_c2}"
            )
        if self.tol_grad is None:
            default = (
                NCG_GRADIENT_TOLERANCE
                if self.method is OptimizerMethod.NCG
                else DEFAULT_GRADIENT_TOLERANCE
            )
            self.tol_grad = default
        elif self.tol_grad <= 0.0:
            raise ValueError("gradient tolerance must be positive")
        return self


class OptimizerReport(BaseModel):
    method: str
    d_final: List[float]
    iterations: int
    wall_time: float
    objective_history: List[float]
    grad_norm_history: List[float]
    termination_reason: str
    function_evaluations: int = 0
    gradient_evaluations: int = 0
    l2_relative_error: Optional[float] = None


class RunConfig(BaseModel):
    """Validated command-line run configuration."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    command: Command
    case: Optional[TestCaseId] = None
    zF: float = Field(default=1.0, gt=0.0)
    Te: float = Field(default=150.0, gt=0.0)
    h: str = "1/16"
    dt_rule: DtRule = DtRule.H
    mesh_kind: MeshKind = MeshKind.UNIFORM
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    c1_mode: C1Mode = C1Mode.CONSISTENT
    sensitivity_scheme: SensitivityScheme = SensitivityScheme.IMPLICIT
    output_dir: Path = Path("firn_reports")
    seed: Optional[int] = None
    data_path: Optional[Path] = None
    h_g: Optional[str] = None
    noise: float = Field(default=0.0, ge=0.0)
    postprocess: PostprocessMode = PostprocessMode.NONE
    degree: Optional[int] = Field(default=None, ge=0)
    plot: bool = False
    full_trace: bool = False
    workers: int = Field(default=1, gt=0)
    zf_list: Tuple[float, ...] = (1.0, 50.0, 100.0, 150.0)

    @model_validator(mode="before")
    @classmethod
    def validate_request(cls, values: Dict) -> Dict:
        case = values.get("case")
        if isinstance(case, str):
            try:
                values = {**values, "case": TestCaseId.parse(case)}
            except ValueError:
                raise ValueError(f"Unknown test case '{case}'; expected 1, 2a, 2b, 2c or 2d")
        return values

    @model_validator(mode="after")
    def validate_preconditions(self) -> "RunConfig":
        needs_case = {Command.FORWARD, Command.GENERATE, Command.GRADCHECK}
        if self.command in needs_case and self.case is None:
            raise ValueError(f"--case is required for '{self.command.value}'")
        if self.command is Command.INVERT and self.case is None and self.data_path is None:
            raise ValueError("invert needs --case or --data")
        if self.postprocess is PostprocessMode.POLYFIT and self.degree is None:
            raise ValueError("--postprocess polyfit requires --degree")
        return self


class ForwardTask(BaseModel):
    """One forward run of a table sweep; small enough to ship to a worker process."""

    case: TestCaseId
    zF: float
    Te: float
    h: str
    dt_rule: DtRule = DtRule.H2
    mesh_kind: MeshKind = MeshKind.UNIFORM
    c1_mode: C1Mode = C1Mode.CONSISTENT


class ForwardRunSummary(BaseModel):
    """End-time result of a forward run without the full trace."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    task: ForwardTask
    mesh: Mesh
    end_profile: np.ndarray
    steps: int
    wall_time: float
    oscillating: bool
    sign_changes: int
    positive_definite: bool

    @property
    def time_per_step(self) -> float:
        return self.wall_time / max(self.steps - 1, 1)


class GradcheckResult(BaseModel):
    max_relative_discrepancy: float
    block_time: float
    fd_time: float
    speedup: float
    nodes: int
    threshold: float
    passed: bool
