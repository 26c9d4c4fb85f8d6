import numpy as np
import pytest

from constants import CO2_MOLAR_MASS, FIRN_TEMPERATURE, GAS_CONSTANT, GRAVITATIONAL_FACTOR, GRAVITY
from datasets.firn_cases import (
    ADAPTIVE_MESH_GRID,
    DT_RULE_GRID,
    FORWARD_CONVERGENCE_GRID,
    INVERSION_GRID,
    TEST_CASES,
    default_params,
    get_test_case,
)
from domain_models import DtRule, TestCaseId


class TestDefaultParams:
    def test_constants(self):
        params = default_params()
        assert (params.f, params.G, params.F) == (0.2, 10.03, 685.0)
        assert params.zF == 1.0 and params.Te == 150.0
        assert params.r_alphas == (0.5, 1.0, 1.5)

    def test_gravitational_factor(self):
        expected = CO2_MOLAR_MASS * GRAVITY / (GAS_CONSTANT * FIRN_TEMPERATURE)
        assert GRAVITATIONAL_FACTOR == pytest.approx(expected, rel=1e-4)

    def test_atmospheric_history(self):
        params = default_params(Te=150.0)
        rho = params.rho_atm(np.array([0.0, 1.0]))
        assert rho[0] == 0.0
        assert rho[1] == pytest.approx(2.0 * 150.0**0.25)


class TestTestCases:
    """Test suite for the closed-form diffusion profiles."""

    @pytest.mark.parametrize("case", list(TestCaseId))
    def test_profiles_nonnegative_and_decreasing(self, case):
        z = np.linspace(0.0, 1.0, 65)
        d = get_test_case(case).d_true(z)
        assert np.all(d >= 0.0)
        assert np.all(np.diff(d) <= 0.0)
        assert d[0] == pytest.approx(200.0)

    def test_endpoint_values(self):
        assert get_test_case("1").d_true(np.array([1.0]))[0] == pytest.approx(0.02)
        assert get_test_case("2b").d_true(np.array([1.0]))[0] == 0.0
        assert get_test_case("case2d").d_true(np.array([0.5]))[0] == pytest.approx(100.0)

    def test_round_off_above_one_is_clipped(self):
        assert get_test_case(TestCaseId.CASE2A).d_true(np.array([1.0 + 1e-15]))[0] == 0.0

    def test_registry_is_complete(self):
        assert set(TEST_CASES) == set(TestCaseId)

    def test_unknown_case(self):
        with pytest.raises(ValueError):
            get_test_case("3")


class TestExperimentGrids:
    def test_forward_convergence_grid(self):
        assert FORWARD_CONVERGENCE_GRID.reference_h == "1/256"
        assert FORWARD_CONVERGENCE_GRID.zF_list == (1.0, 50.0, 100.0, 150.0)

    def test_adaptive_grid(self):
        assert ADAPTIVE_MESH_GRID.h_list[0] == "1/4"
        assert ADAPTIVE_MESH_GRID.zF_list == (150.0,)

    def test_dt_rule_grid_reaches_reference_mesh(self):
        assert DT_RULE_GRID.h_list[-1] == FORWARD_CONVERGENCE_GRID.reference_h
        assert DT_RULE_GRID.zF_list == (150.0,)

    def test_inversion_grid(self):
        assert INVERSION_GRID.h_g == "1/65"
        assert INVERSION_GRID.dt_rule is DtRule.H
