import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add the current directory to Python path for imports
sys.path.insert(0, str(Path(__file__).parent))

from pydantic import ValidationError  # noqa: E402

from config import get_config, load_run_file  # noqa: E402
from constants import GRADCHECK_THRESHOLD  # noqa: E402
from data_exporter.csv_exporter import CSVExporter  # noqa: E402
from data_exporter.json_exporter import JSONExporter  # noqa: E402
from data_exporter.svg_plotter import SVGPlotter  # noqa: E402
from domain_models import (  # noqa: E402
    BetaRule,
    C1Mode,
    Command,
    ConstraintKind,
    DtRule,
    GradientBackendKind,
    MeshKind,
    OptimizerMethod,
    PostprocessMode,
    RunConfig,
    SensitivityScheme,
)
from exceptions import ConfigurationError, SolverError  # noqa: E402
from services.firn_service import FirnExperimentService  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3

# flag name (normalized) -> RunConfig field
RUN_FIELDS = {
    "case": "case",
    "zf": "zF",
    "te": "Te",
    "h": "h",
    "dt": "dt_rule",
    "mesh": "mesh_kind",
    "c1_mode": "c1_mode",
    "sensitivity": "sensitivity_scheme",
    "out": "output_dir",
    "seed": "seed",
    "data": "data_path",
    "hg": "h_g",
    "noise": "noise",
    "postprocess": "postprocess",
    "degree": "degree",
    "plot": "plot",
    "full_trace": "full_trace",
    "workers": "workers",
    "zf_list": "zf_list",
}
# flag name (normalized) -> OptimizerConfig field
OPTIMIZER_FIELDS = {
    "method": "method",
    "beta": "beta_rule",
    "constraints": "constraints",
    "grad": "grad_backend",
    "max_iters": "max_iters",
    "tol": "tol_grad",
}


def _values(enum) -> List[str]:
    return [member.value for member in enum]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firn",
        description="Firn gas-trapping solver - forward runs, convergence tables, gradient checks, "
        "synthetic data and diffusion-profile inversion",
    )
    parser.add_argument("command", choices=_values(Command), help="Command to run")
    parser.add_argument("--config", type=Path, help="key=value run file; flags override it")
    parser.add_argument("--case", help="Test case: 1, 2a, 2b, 2c or 2d")
    parser.add_argument("--zf", type=float, help="Firn depth zF in meters")
    parser.add_argument("--te", type=float, help="End time Te in years")
    parser.add_argument("--h", help="Mesh size as a fraction, e.g. 1/64")
    parser.add_argument("--dt", choices=_values(DtRule), help="Time step rule: dt = h or h^2")
    parser.add_argument("--mesh", choices=_values(MeshKind), help="Mesh kind")
    parser.add_argument("--method", choices=_values(OptimizerMethod), help="Optimizer")
    parser.add_argument("--beta", choices=_values(BetaRule), help="NCG beta rule")
    parser.add_argument("--constraints", choices=_values(ConstraintKind), help="Constraint set for d")
    parser.add_argument("--grad", choices=_values(GradientBackendKind), help="Gradient backend")
    parser.add_argument("--c1-mode", choices=_values(C1Mode), help="Boundary constant reading")
    parser.add_argument(
        "--sensitivity", choices=_values(SensitivityScheme), help="Sensitivity forcing rule"
    )
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--seed", type=int, help="Noise seed")
    parser.add_argument("--data", type=Path, help="Dataset CSV written by 'generate'")
    parser.add_argument("--hg", help="Generation mesh size, default 1/65")
    parser.add_argument("--noise", type=float, help="Gaussian noise sigma added to generated data")
    parser.add_argument("--max-iters", type=int, help="Optimizer iteration limit")
    parser.add_argument("--tol", type=float, help="Gradient tolerance")
    parser.add_argument("--postprocess", choices=_values(PostprocessMode), help="Profile cleanup")
    parser.add_argument("--degree", type=int, help="Polynomial degree for --postprocess polyfit")
    parser.add_argument("--plot", action="store_true", default=None, help="Also write SVG plots")
    parser.add_argument(
        "--full-trace", action="store_true", default=None, help="Write every time level"
    )
    parser.add_argument("--workers", type=int, help="Worker processes for 'tables'")
    parser.add_argument("--zf-list", help="Comma-separated zF values for 'tables'")
    return parser


def _parse_zf_list(value: Any) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(float(item) for item in value)
    try:
        return tuple(float(item) for item in str(value).split(",") if item.strip())
    except ValueError as e:
        raise ConfigurationError(f"Invalid zF list '{value}': {e}") from e


def build_run_config(
    args: argparse.Namespace, file_settings: Dict[str, str], defaults: Dict[str, Any]
) -> RunConfig:
    """Merge config-file values, flags (which win) and environment defaults into a RunConfig."""
    unknown = set(file_settings) - set(RUN_FIELDS) - set(OPTIMIZER_FIELDS)
    if unknown:
        raise ConfigurationError(f"Unknown keys in config file: {', '.join(sorted(unknown))}")

    merged: Dict[str, Any] = dict(file_settings)
    for key, value in vars(args).items():
        if key in RUN_FIELDS or key in OPTIMIZER_FIELDS:
            if value is not None:
                merged[key] = value

    run_values: Dict[str, Any] = {"command": args.command, **defaults}
    optimizer_values: Dict[str, Any] = {}
    for key, value in merged.items():
        if key in OPTIMIZER_FIELDS:
            optimizer_values[OPTIMIZER_FIELDS[key]] = value
        else:
            run_values[RUN_FIELDS[key]] = value

    if "zf_list" in run_values:
        run_values["zf_list"] = _parse_zf_list(run_values["zf_list"])
    run_values["optimizer"] = optimizer_values
    return RunConfig(**run_values)


def run_command(service: FirnExperimentService, run_config: RunConfig) -> int:
    command = run_config.command
    if command is Command.FORWARD:
        service.run_forward(run_config)
    elif command is Command.TABLES:
        service.run_tables(run_config)
    elif command is Command.GENERATE:
        service.run_generate(run_config)
    elif command is Command.INVERT:
        service.run_invert(run_config)
    elif command is Command.GRADCHECK:
        result = service.run_gradcheck(run_config)
        if not result.passed:
            print(
                f"Error: gradient discrepancy {result.max_relative_discrepancy:.3e} "
                f"exceeds {GRADCHECK_THRESHOLD:.0e}"
            )
            return EXIT_FAILURE
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the firn solver."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse already printed usage; --help exits with 0
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG_ERROR

    try:
        config = get_config()
        config.setup_logging()
        defaults = {
            "output_dir": config.config["output"]["directory"],
            "workers": config.config["tables"]["workers"],
        }
        run_config = build_run_config(args, load_run_file(args.config), defaults)

    except (ConfigurationError, ValidationError, ValueError) as e:
        logger.error(f"Invalid configuration: {str(e)}")
        print(f"Error: {str(e)}")
        parser.print_usage()
        return EXIT_CONFIG_ERROR

    logger.info(f"Starting '{run_config.command.value}'")

    try:
        output_dir = run_config.output_dir
        service = FirnExperimentService(
            csv_exporter=CSVExporter(output_dir),
            json_exporter=JSONExporter(output_dir),
            plotter=SVGPlotter(output_dir),
            workers=run_config.workers,
        )
        return run_command(service, run_config)

    except ConfigurationError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        print(f"Error: {str(e)}")
        return EXIT_CONFIG_ERROR

    except SolverError as e:
        logger.error(f"Solver failure: {str(e)}")
        print(f"Error: {str(e)}")
        return EXIT_SOLVER_ERROR

    except Exception as e:
        logger.error(f"Error during '{run_config.command.value}': {str(e)}")
        print(f"Error: {str(e)}")
        return EXIT_FAILURE


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
