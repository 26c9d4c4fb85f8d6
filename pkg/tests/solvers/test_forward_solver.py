import logging
from functools import lru_cache

import numpy as np
import pytest

from constants import REFERENCE_RELATIVE_ERRORS
from datasets.firn_cases import ADAPTIVE_MESH_GRID, DT_RULE_GRID, default_params, get_test_case
from discretization.mesh import build_adaptive_mesh, build_mesh, build_time_grid, build_uniform_mesh, time_step_for
from domain_models import C1Mode, DtRule, FirnParams, MeshKind, TestCaseId
from exceptions import ConfigurationError, NonFiniteSolutionError
from solvers.banded_system import BandedSystem, assemble_system
from solvers.forward_solver import compare_profiles, compare_traces, detect_oscillation, forward_solve
from tests.oracles import dense_forward
from utils import relative_l2_error


def _run(h: str, dt: str, zF: float = 1.0, Te: float = 150.0, case=TestCaseId.CASE1, **kwargs):
    params = default_params(zF=zF, Te=Te)
    mesh = build_uniform_mesh(h)
    grid = build_time_grid(dt)
    d_true = get_test_case(case).d_true(mesh.nodes)
    return forward_solve(mesh, grid, params, d_true, **kwargs)


class TestForwardSolve:
    """Test suite for the implicit Euler forward solver."""

    def test_zero_boundary_gives_zero_trace(self):
        params = FirnParams(**default_params().model_dump(), rho_atm_override=lambda t: 0.0 * t)
        mesh = build_uniform_mesh("1/8")
        trace = forward_solve(mesh, build_time_grid("1/8"), params, np.linspace(200.0, 0.02, mesh.size))
        assert not np.any(trace.lam)

    def test_boundary_row_and_initial_state(self):
        trace = _run("1/8", "1/8")
        np.testing.assert_array_equal(trace.lam[0], trace.params.rho_atm(trace.grid.times))
        assert not np.any(trace.lam[:, 0])
        assert trace.lam.shape == (9, 9)
        np.testing.assert_array_equal(trace.end_profile, trace.lam[:, -1])
        np.testing.assert_array_equal(trace.times, trace.grid.times)

    def test_deterministic(self):
        first = _run("1/16", "1/16", zF=50.0)
        second = _run("1/16", "1/16", zF=50.0)
        np.testing.assert_array_equal(first.lam, second.lam)

    @pytest.mark.parametrize("c1_mode", [C1Mode.CONSISTENT, C1Mode.LITERAL])
    def test_matches_dense_oracle_at_unit_depth(self, c1_mode):
        trace = _run("1/8", "1/32", zF=1.0, c1_mode=c1_mode)
        reference = dense_forward(trace.mesh.nodes, trace.grid.times, trace.params, get_test_case(TestCaseId.CASE1).d_true(trace.mesh.nodes))
        np.testing.assert_allclose(trace.lam, reference, rtol=1e-10, atol=1e-12)

    def test_matches_dense_oracle_on_adaptive_mesh(self):
        params = default_params(zF=5.0, Te=50.0)
        mesh = build_adaptive_mesh("1/4")
        grid = build_time_grid("1/16")
        d = get_test_case(TestCaseId.CASE2D).d_true(mesh.nodes)
        trace = forward_solve(mesh, grid, params, d)
        reference = dense_forward(mesh.nodes, grid.times, params, d)
        np.testing.assert_allclose(trace.lam, reference, rtol=1e-10, atol=1e-12)

    def test_reuses_given_system(self, mocker):
        params = default_params()
        mesh = build_uniform_mesh("1/8")
        grid = build_time_grid("1/8")
        d = np.linspace(200.0, 0.02, mesh.size)
        system = assemble_system(mesh, grid, params, d)
        spy = mocker.patch("solvers.forward_solver.assemble_system")
        forward_solve(mesh, grid, params, d, system=system)
        spy.assert_not_called()

    def test_mismatched_system_rejected(self):
        params = default_params()
        mesh = build_uniform_mesh("1/8")
        grid = build_time_grid("1/8")
        other = assemble_system(build_uniform_mesh("1/4"), grid, params, np.ones(5))
        with pytest.raises(ConfigurationError):
            forward_solve(mesh, grid, params, np.ones(9), system=other)

    def test_non_finite_step_aborts(self, mocker):
        mocker.patch.object(BandedSystem, "solve", side_effect=lambda rhs: np.full_like(rhs, np.nan))
        with pytest.raises(NonFiniteSolutionError) as error:
            _run("1/8", "1/8")
        assert error.value.step == 1

    def test_end_profile_positive_at_unit_depth(self):
        trace = _run("1/16", "1/16")
        assert np.all(trace.end_profile[:-1] > 0.0)
        assert trace.time_per_step >= 0.0


class TestCompareTraces:
    """Test suite for the error report between end-time profiles."""

    def test_identical_traces(self):
        trace = _run("1/8", "1/8")
        report = compare_traces(trace, trace)
        assert report.linf_abs == report.l2_abs == 0.0
        assert report.linf_rel == report.l2_rel == 0.0
        assert report.common_nodes == 9

    def test_restricted_to_coarse_nodes(self):
        coarse = _run("1/8", "1/64")
        fine = _run("1/32", "1/64")
        report = compare_traces(coarse, fine, at_nodes=build_uniform_mesh("1/4"))
        assert report.common_nodes == 5
        assert report.linf_rel > 0.0

    def test_different_settings_rejected(self):
        with pytest.raises(ConfigurationError):
            compare_traces(_run("1/8", "1/8", zF=1.0), _run("1/8", "1/8", zF=5.0))

    def test_endpoints_only_rejected(self):
        a, b = build_uniform_mesh("1/3"), build_uniform_mesh("1/2")
        with pytest.raises(ConfigurationError):
            compare_profiles(a, np.ones(4), b, np.ones(3))

    def test_relative_errors(self):
        mesh = build_uniform_mesh("1/2")
        report = compare_profiles(mesh, np.array([0.0, 2.2, 1.0]), mesh, np.array([0.0, 2.0, 1.0]))
        assert report.linf_abs == pytest.approx(0.2)
        assert report.linf_rel == pytest.approx(0.1)
        assert report.l2_rel == pytest.approx(0.2 / np.sqrt(5.0))



class TestDetectOscillation:
    """Test suite for the oscillation flag."""

    def test_smooth_profile(self):
        oscillating, changes = detect_oscillation(np.exp(-np.linspace(0.0, 5.0, 33)))
        assert not oscillating
        assert changes == 0

    def test_zigzag_profile(self, caplog):
        profile = np.exp(-np.linspace(0.0, 5.0, 33)) + 0.05 * (-1.0) ** np.arange(33)
        with caplog.at_level(logging.WARNING):
            oscillating, changes = detect_oscillation(profile)
        assert oscillating
        assert changes > 0.25 * 31
        assert "Oscillating profile" in caplog.text

    def test_few_wiggles_below_threshold(self):
        profile = np.linspace(1.0, 0.0, 41)
        profile[20] += 0.1
        oscillating, changes = detect_oscillation(profile)
        assert changes == 2
        assert not oscillating


@lru_cache(maxsize=None)
def _end_profile(case: TestCaseId, zF: float, h: str, dt_rule: DtRule = DtRule.H2, kind=MeshKind.UNIFORM):
    """End-time profile at Te = 150, cached across the convergence tests."""
    mesh = build_mesh(h, kind)
    grid = build_time_grid(time_step_for(mesh, dt_rule))
    d_true = get_test_case(case).d_true(mesh.nodes)
    return mesh, forward_solve(mesh, grid, default_params(zF=zF, Te=150.0), d_true).end_profile.copy()


@pytest.mark.slow
class TestConvergenceTables:
    """End-time errors against h = 1/256 at the nodes of h = 1/16, dt = h^2."""

    @pytest.mark.parametrize("case", [TestCaseId.CASE1, TestCaseId.CASE2B])
    @pytest.mark.parametrize("zF", [1.0, 50.0, 100.0, 150.0])
    def test_relative_errors_match_reference_table(self, case, zF):
        reference_mesh, reference = _end_profile(case, zF, "1/256")
        coarsest = build_uniform_mesh("1/16")
        expected = REFERENCE_RELATIVE_ERRORS[case.value][zF]

        errors = {}
        for denominator, published in expected.items():
            mesh, profile = _end_profile(case, zF, f"1/{denominator}")
            errors[denominator] = compare_profiles(mesh, profile, reference_mesh, reference, coarsest).linf_rel
            assert errors[denominator] == pytest.approx(published, rel=0.1)

        resolved = [denominator for denominator in sorted(errors) if zF / denominator < 3.0]
        for coarse, fine in zip(resolved, resolved[1:]):
            assert errors[fine] < errors[coarse]

    @pytest.mark.parametrize("h", DT_RULE_GRID.h_list)
    def test_time_step_rule_barely_matters(self, h):
        _, fine_in_time = _end_profile(TestCaseId.CASE1, 150.0, h, DtRule.H2)
        _, coarse_in_time = _end_profile(TestCaseId.CASE1, 150.0, h, DtRule.H)
        assert relative_l2_error(coarse_in_time, fine_in_time) <= 1e-6

    def test_oscillation_threshold(self):
        _, under_resolved = _end_profile(TestCaseId.CASE1, 150.0, "1/16")
        _, resolved = _end_profile(TestCaseId.CASE1, 150.0, "1/64")
        assert detect_oscillation(under_resolved)[0]
        assert not detect_oscillation(resolved)[0]

    def test_adaptive_grid_node_counts(self):
        sizes = [build_adaptive_mesh(h).size for h in ADAPTIVE_MESH_GRID.h_list]
        assert sizes == [13, 25, 49, 97, 193]

    def test_adaptive_mesh_matches_fine_uniform_mesh(self):
        adaptive_mesh, adaptive = _end_profile(TestCaseId.CASE1, 150.0, "1/16", DtRule.H, MeshKind.ADAPTIVE)
        reference_mesh, reference = _end_profile(TestCaseId.CASE1, 150.0, "1/256", DtRule.H)
        assert adaptive_mesh.size == 49
        assert compare_profiles(adaptive_mesh, adaptive, reference_mesh, reference).l2_rel <= 1e-2
