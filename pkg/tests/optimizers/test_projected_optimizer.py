import numpy as np
import pytest

from domain_models import ConstraintKind, OptimizerConfig, OptimizerMethod
from exceptions import ConfigurationError
from optimizers.base_optimizer import MinimizationProblem
from optimizers.projected_optimizer import (
    ProjectedOptimizer,
    pool_adjacent_violators,
    project_nonneg,
    project_nonneg_decreasing,
    projection_for,
)
from tests.oracles import isotonic_projection_bruteforce


class DistanceTo(MinimizationProblem):
    """|x - c|^2; its constrained minimizer is the projection of c."""

    def __init__(self, center):
        self.center = np.asarray(center, dtype=float)

    def value(self, x):
        return float(np.sum((x - self.center) ** 2))

    def value_and_gradient(self, x):
        return self.value(x), 2.0 * (x - self.center)


class TestProjections:
    """Test suite for the feasible-set projections."""

    def test_nonneg(self):
        np.testing.assert_array_equal(project_nonneg([1.0, -2.0, 0.0]), [1.0, 0.0, 0.0])

    def test_pava_small_example(self):
        np.testing.assert_allclose(pool_adjacent_violators([1.0, 3.0, -2.0]), [2.0, 2.0, -2.0])
        np.testing.assert_allclose(project_nonneg_decreasing([1.0, 3.0, -2.0]), [2.0, 2.0, 0.0])

    def test_pava_matches_bruteforce(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            y = rng.normal(size=6)
            np.testing.assert_allclose(pool_adjacent_violators(y), isotonic_projection_bruteforce(y), atol=1e-12)

    def test_feasible_points_unchanged(self):
        y = np.array([5.0, 4.0, 4.0, 1.0, 0.0])
        np.testing.assert_array_equal(pool_adjacent_violators(y), y)
        np.testing.assert_array_equal(project_nonneg_decreasing(y), y)

    def test_idempotent(self):
        y = np.random.default_rng(29).normal(size=12)
        once = project_nonneg_decreasing(y)
        np.testing.assert_allclose(project_nonneg_decreasing(once), once)
        assert np.all(np.diff(once) <= 0.0)
        assert np.all(once >= 0.0)

    def test_projection_for(self):
        assert projection_for(ConstraintKind.NONNEG) is project_nonneg
        assert projection_for(ConstraintKind.NONNEG_DECREASING) is project_nonneg_decreasing
        with pytest.raises(ConfigurationError):
            projection_for(ConstraintKind.NONE)


class TestProjectedOptimizer:
    """Test suite for projected gradient and projected NCG."""

    CENTER = [3.0, -1.0, 2.0, 5.0]

    @pytest.mark.parametrize(
        "constraints,expected",
        [
            (ConstraintKind.NONNEG, [3.0, 0.0, 2.0, 5.0]),
            (ConstraintKind.NONNEG_DECREASING, [3.0, 2.0, 2.0, 2.0]),
        ],
    )
    def test_projected_gradient_finds_projection(self, constraints, expected):
        config = OptimizerConfig(
            method=OptimizerMethod.STEEPEST, constraints=constraints, tol_grad=1e-10, max_iters=200
        )
        report = ProjectedOptimizer(config).minimize(DistanceTo(self.CENTER), np.zeros(4))
        assert report.termination_reason in ("gradient_tolerance", "stagnation")
        np.testing.assert_allclose(report.d_final, expected, atol=1e-6)

    def test_description(self):
        config = OptimizerConfig(constraints=ConstraintKind.NONNEG_DECREASING)
        assert ProjectedOptimizer(config).description == "projected ncg-hz (dec)"
        steepest = OptimizerConfig(method=OptimizerMethod.STEEPEST, constraints=ConstraintKind.NONNEG)
        assert ProjectedOptimizer(steepest).description == "projected gradient (nonneg)"

    def test_iterates_stay_feasible_and_decrease(self):
        config = OptimizerConfig(constraints=ConstraintKind.NONNEG_DECREASING, max_iters=20)
        report = ProjectedOptimizer(config).minimize(DistanceTo(self.CENTER), np.array([-1.0, 4.0, 0.0, 7.0]))
        d_final = np.array(report.d_final)
        assert np.all(d_final >= 0.0)
        assert np.all(np.diff(d_final) <= 0.0)
        assert np.all(np.diff(report.objective_history) < 0.0)

    def test_feasible_minimum_stops_immediately(self):
        config = OptimizerConfig(constraints=ConstraintKind.NONNEG)
        report = ProjectedOptimizer(config).minimize(DistanceTo([1.0, 0.0, 2.0]), np.array([1.0, -3.0, 2.0]))
        assert report.iterations == 0
        assert report.termination_reason == "gradient_tolerance"

    def test_unconstrained_config_rejected(self):
        with pytest.raises(ConfigurationError):
            ProjectedOptimizer(OptimizerConfig())
