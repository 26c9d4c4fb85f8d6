import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from constants import GRADCHECK_THRESHOLD, REFERENCE_RELATIVE_ERRORS
from data_exporter.csv_exporter import CSVExporter, load_dataset
from data_exporter.json_exporter import JSONExporter
from data_exporter.svg_plotter import SVGPlotter
from datasets.firn_cases import (
    ADAPTIVE_MESH_GRID,
    DT_RULE_GRID,
    FORWARD_CONVERGENCE_GRID,
    INVERSION_GRID,
    default_params,
    get_test_case,
)
from datasets.generator import generate_data, resample_linear
from discretization.mesh import build_mesh, build_time_grid, time_step_for
from domain_models import (
    DtRule,
    ForwardRunSummary,
    ForwardTask,
    GradcheckResult,
    InverseData,
    MeshKind,
    OptimizerReport,
    RunConfig,
    TestCaseId,
)
from inverse.objective import FirnObjective
from optimizers.minimize import minimize_profile
from optimizers.postprocess import postprocess_profile
from solvers.banded_system import assemble_system, check_dt_admissible
from solvers.forward_solver import compare_profiles, detect_oscillation, forward_solve
from utils import format_fraction, max_relative_discrepancy, parse_fraction, relative_l2_error

logger = logging.getLogger(__name__)

ERROR_TABLE_COLUMNS = [
    "case", "zF", "Te", "h", "dt_rule", "nodes", "linf_abs", "linf_rel", "l2_abs", "l2_rel",
    "reference_linf_rel", "oscillating", "sign_changes",
]
RUNTIME_TABLE_COLUMNS = [
    "mesh", "zF", "h", "nodes", "dt_rule", "steps", "wall_time", "time_per_step",
    "l2_rel_vs_reference", "dt_rule_l2_difference",
]


def run_forward_task(task: ForwardTask) -> ForwardRunSummary:
    """One forward run reduced to its end-time profile; module level so worker processes can pickle it."""
    params = default_params(zF=task.zF, Te=task.Te)
    mesh = build_mesh(task.h, task.mesh_kind)
    grid = build_time_grid(time_step_for(mesh, task.dt_rule))
    d_true = get_test_case(task.case).d_true(mesh.nodes)

    system = assemble_system(mesh, grid, params, d_true)
    diagnostic = check_dt_admissible(system)
    trace = forward_solve(mesh, grid, params, d_true, task.c1_mode, system=system)
    oscillating, sign_changes = detect_oscillation(trace.end_profile)

    return ForwardRunSummary(
        task=task,
        mesh=mesh,
        end_profile=trace.end_profile.copy(),
        steps=grid.steps,
        wall_time=trace.wall_time,
        oscillating=oscillating,
        sign_changes=sign_changes,
        positive_definite=diagnostic.positive_definite,
    )


class FirnExperimentService:
    """Runs the forward, table, gradient-check, generation and inversion commands."""

    def __init__(
        self,
        csv_exporter: CSVExporter,
        json_exporter: JSONExporter,
        plotter: Optional[SVGPlotter] = None,
        workers: int = 1,
    ):
        self.csv_exporter = csv_exporter
        self.json_exporter = json_exporter
        self.plotter = plotter
        self.workers = workers

    def _run_tasks(self, tasks: Sequence[ForwardTask]) -> List[ForwardRunSummary]:
        if self.workers > 1 and len(tasks) > 1:
            logger.info(f"Running {len(tasks)} forward runs on {self.workers} workers")
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                return list(executor.map(run_forward_task, tasks))
        return [run_forward_task(task) for task in tasks]

    def run_forward(self, config: RunConfig) -> List[Path]:
        params = default_params(zF=config.zF, Te=config.Te)
        mesh = build_mesh(config.h, config.mesh_kind)
        dt = time_step_for(mesh, config.dt_rule)
        grid = build_time_grid(dt)
        case = get_test_case(config.case)
        d_true = case.d_true(mesh.nodes)

        logger.info(
            f"Forward run {case.id.value}: zF={config.zF:g}, Te={config.Te:g}, "
            f"h={config.h} ({mesh.kind.value}, {mesh.size} nodes), dt={dt}"
        )
        system = assemble_system(mesh, grid, params, d_true)
        diagnostic = check_dt_admissible(system)
        trace = forward_solve(mesh, grid, params, d_true, config.c1_mode, system=system)
        oscillating, sign_changes = detect_oscillation(trace.end_profile)

        stem = (
            f"forward_{case.id.value}_zf{config.zF:g}_te{config.Te:g}_"
            f"h{format_fraction(parse_fraction(config.h))}_{config.mesh_kind.value}_dt{config.dt_rule.value}"
        )
        paths = self.csv_exporter.export_solution(trace, stem, full_trace=config.full_trace)
        if config.plot and self.plotter is not None:
            paths.append(self.plotter.plot_solution(trace, stem))

        print("\n\n--------------------------------")
        print(f"Forward solution for {case.id.value} ({case.description}):")
        print(f"- Nodes: {mesh.size}, time steps: {grid.steps - 1}")
        print(f"- rho(z=1, t=1): {trace.end_profile[-1]:.10e}")
        print(f"- Wall time: {trace.wall_time:.3f}s ({trace.time_per_step:.3e}s per step)")
        print(f"- Symmetric part positive definite: {diagnostic.positive_definite}")
        print(f"- Oscillating: {oscillating} ({sign_changes} sign changes)")
        for path in paths:
            print(f"- Saved: {path}")
        print("--------------------------------\n\n")
        return paths

    def run_tables(self, config: RunConfig) -> List[Path]:
        """Error tables against the finest mesh plus runtime and dt-rule tables."""
        case = config.case or TestCaseId.CASE1
        study = FORWARD_CONVERGENCE_GRID
        other_rule = DtRule.H if config.dt_rule is DtRule.H2 else DtRule.H2
        uniform_h = sorted(
            set(study.h_list) | set(DT_RULE_GRID.h_list), key=lambda h: parse_fraction(h), reverse=True
        )

        tasks: List[ForwardTask] = []
        for zF in config.zf_list:
            common = dict(case=case, zF=zF, Te=config.Te, c1_mode=config.c1_mode)
            for h in uniform_h:
                tasks.append(ForwardTask(h=h, dt_rule=config.dt_rule, **common))
                tasks.append(ForwardTask(h=h, dt_rule=other_rule, **common))
            if study.reference_h not in uniform_h:
                tasks.append(ForwardTask(h=study.reference_h, dt_rule=config.dt_rule, **common))
            for h in ADAPTIVE_MESH_GRID.h_list:
                tasks.append(
                    ForwardTask(h=h, dt_rule=config.dt_rule, mesh_kind=MeshKind.ADAPTIVE, **common)
                )

        summaries = self._run_tasks(tasks)
        lookup: Dict[Tuple, ForwardRunSummary] = {
            (s.task.zF, s.task.h, s.task.dt_rule, s.task.mesh_kind): s for s in summaries
        }

        error_rows, runtime_rows = [], []
        coarsest = build_mesh(study.h_list[0])
        for zF in config.zf_list:
            reference = lookup[(zF, study.reference_h, config.dt_rule, MeshKind.UNIFORM)]
            references = REFERENCE_RELATIVE_ERRORS.get(case.value, {}).get(float(zF), {})

            for h in uniform_h:
                run = lookup[(zF, h, config.dt_rule, MeshKind.UNIFORM)]
                other = lookup[(zF, h, other_rule, MeshKind.UNIFORM)]
                dt_difference = relative_l2_error(other.end_profile, run.end_profile)
                l2_rel = None

                if h in study.h_list:
                    errors = compare_profiles(
                        run.mesh, run.end_profile, reference.mesh, reference.end_profile, coarsest
                    )
                    l2_rel = errors.l2_rel
                    error_rows.append(
                        {
                            "case": case.value,
                            "zF": zF,
                            "Te": config.Te,
                            "h": h,
                            "dt_rule": config.dt_rule.value,
                            "nodes": run.mesh.size,
                            **errors.model_dump(exclude={"common_nodes"}),
                            "reference_linf_rel": references.get(parse_fraction(h).denominator),
                            "oscillating": run.oscillating,
                            "sign_changes": run.sign_changes,
                        }
                    )
                for summary in (run, other):
                    runtime_rows.append(self._runtime_row(summary, l2_rel, dt_difference))

            for h in ADAPTIVE_MESH_GRID.h_list:
                run = lookup[(zF, h, config.dt_rule, MeshKind.ADAPTIVE)]
                errors = compare_profiles(
                    run.mesh, run.end_profile, reference.mesh, reference.end_profile
                )
                runtime_rows.append(self._runtime_row(run, errors.l2_rel, None))

        stem = f"tables_{case.value}_te{config.Te:g}_dt{config.dt_rule.value}"
        paths = [
            self.csv_exporter.export_table(
                error_rows,
                ERROR_TABLE_COLUMNS,
                f"{stem}_errors",
                f"Errors at common nodes of h={study.h_list[0]} against h={study.reference_h}",
            ),
            self.csv_exporter.export_table(
                runtime_rows, RUNTIME_TABLE_COLUMNS, f"{stem}_runtime", "Runtime per mesh and dt rule"
            ),
        ]
        return paths

    @staticmethod
    def _runtime_row(
        summary: ForwardRunSummary, l2_rel: Optional[float], dt_difference: Optional[float]
    ) -> Dict:
        task = summary.task
        return {
            "mesh": task.mesh_kind.value,
            "zF": task.zF,
            "h": task.h,
            "nodes": summary.mesh.size,
            "dt_rule": task.dt_rule.value,
            "steps": summary.steps - 1,
            "wall_time": summary.wall_time,
            "time_per_step": summary.time_per_step,
            "l2_rel_vs_reference": l2_rel,
            "dt_rule_l2_difference": dt_difference,
        }

    @staticmethod
    def _generation_step(config: RunConfig) -> str:
        """Generation mesh of synthetic data; the inversion study default when --hg is absent."""
        return config.h_g or INVERSION_GRID.h_g

    def _inverse_data(self, config: RunConfig) -> InverseData:
        """Dataset from --data, or generated for --case, resampled onto the inversion mesh."""
        if config.data_path is not None:
            data = load_dataset(config.data_path)
        else:
            params = default_params(zF=config.zF, Te=config.Te)
            data = generate_data(
                config.case, params, self._generation_step(config), noise_sigma=config.noise, seed=config.seed,
                c1_mode=config.c1_mode,
            )
        target = build_mesh(config.h, config.mesh_kind)
        grid = build_time_grid(time_step_for(target, config.dt_rule))
        return resample_linear(data, target, grid)

    def run_gradcheck(self, config: RunConfig) -> GradcheckResult:
        """Compare the block gradient with central differences at d = 0.8 d_true."""
        data = self._inverse_data(config)
        if data.d_true is None:
            d = np.full(data.mesh.size, 100.0)
        else:
            d = 0.8 * np.asarray(data.d_true)

        objective = FirnObjective(data, c1_mode=config.c1_mode, scheme=config.sensitivity_scheme)
        start_time = time.perf_counter()
        _, block_gradient = objective.value_and_gradient(d)
        block_time = time.perf_counter() - start_time

        start_time = time.perf_counter()
        fd_gradient = objective.fd_gradient(d)
        fd_time = time.perf_counter() - start_time

        discrepancy = max_relative_discrepancy(block_gradient, fd_gradient)
        result = GradcheckResult(
            max_relative_discrepancy=discrepancy,
            block_time=block_time,
            fd_time=fd_time,
            speedup=fd_time / block_time if block_time > 0.0 else float("inf"),
            nodes=data.mesh.size,
            threshold=GRADCHECK_THRESHOLD,
            passed=discrepancy <= GRADCHECK_THRESHOLD,
        )

        stem = f"gradcheck_{data.provenance.get('case', 'data')}_h{format_fraction(parse_fraction(config.h))}"
        path = self.json_exporter.export_report(result, stem)

        print("\n\n--------------------------------")
        print(f"Gradient check on {data.mesh.size} nodes, {len(data.gases)} gases:")
        print(f"- Max relative discrepancy: {discrepancy:.3e} (threshold {GRADCHECK_THRESHOLD:.0e})")
        print(f"- Block gradient: {block_time:.3f}s, finite differences: {fd_time:.3f}s")
        print(f"- Speedup: {result.speedup:.1f}x")
        print(f"- Result: {'PASS' if result.passed else 'FAIL'}")
        print(f"- Saved: {path}")
        print("--------------------------------\n\n")

        if not result.passed:
            logger.warning(f"Gradient check failed: discrepancy {discrepancy:.3e}")
        return result

    def run_generate(self, config: RunConfig) -> Tuple[Path, Path]:
        params = default_params(zF=config.zF, Te=config.Te)
        h_g = self._generation_step(config)
        data = generate_data(
            config.case, params, h_g, noise_sigma=config.noise, seed=config.seed,
            c1_mode=config.c1_mode,
        )
        stem = (
            f"data_{config.case.value}_zf{config.zF:g}_te{config.Te:g}_"
            f"hg{format_fraction(parse_fraction(h_g))}"
        )
        return self.csv_exporter.export_dataset(data, stem)

    def run_invert(self, config: RunConfig) -> OptimizerReport:
        data = self._inverse_data(config)
        report = minimize_profile(
            data, config.optimizer, c1_mode=config.c1_mode, scheme=config.sensitivity_scheme
        )

        d_final = np.array(report.d_final)
        d_smoothed = postprocess_profile(d_final, config.postprocess, config.degree, data.mesh.nodes)
        extra = {
            "postprocess": config.postprocess.value,
            "settings": {
                "zF": data.params.zF,
                "Te": data.params.Te,
                "h": config.h,
                "mesh": config.mesh_kind.value,
                "constraints": config.optimizer.constraints.value,
                "grad_backend": config.optimizer.grad_backend.value,
            },
            "provenance": data.provenance,
        }
        if data.d_true is not None:
            extra["postprocessed_l2_relative_error"] = relative_l2_error(d_smoothed, data.d_true)

        case_label = data.provenance.get("case", "data")
        stem = (
            f"invert_{case_label}_{config.optimizer.method.value}_{config.optimizer.beta_rule.value}_"
            f"{config.optimizer.constraints.value}_h{format_fraction(parse_fraction(config.h))}"
        )
        paths = [
            self.json_exporter.export_report(report, stem, extra),
            self.csv_exporter.export_profile(data.mesh.nodes, d_smoothed, data.d_true, stem),
        ]
        if config.plot and self.plotter is not None:
            paths.append(
                self.plotter.plot_profiles(data.mesh.nodes, d_smoothed, data.d_true, stem, report.method)
            )

        print("\n\n--------------------------------")
        print(f"Inversion with {report.method}:")
        print(f"- Iterations: {report.iterations} ({report.termination_reason})")
        print(f"- V(d): {report.objective_history[0]:.6e} -> {report.objective_history[-1]:.6e}")
        if report.l2_relative_error is not None:
            print(f"- L2 relative error vs d_true: {report.l2_relative_error:.3e}")
        print(f"- Wall time: {report.wall_time:.2f}s")
        for path in paths:
            print(f"- Saved: {path}")
        print("--------------------------------\n\n")
        return report
