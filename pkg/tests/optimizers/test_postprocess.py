import numpy as np
import pytest

from domain_models import PostprocessMode
from exceptions import ConfigurationError
from optimizers.postprocess import postprocess_profile


class TestPostprocessProfile:
    def test_none_returns_copy(self):
        d = np.array([3.0, -1.0, 2.0])
        result = postprocess_profile(d)
        np.testing.assert_array_equal(result, d)
        assert result is not d

    def test_clamp(self):
        np.testing.assert_array_equal(
            postprocess_profile([3.0, -1.0, 2.0], PostprocessMode.CLAMP_NONNEG), [3.0, 0.0, 2.0]
        )

    def test_polyfit_reproduces_linear_profile(self):
        nodes = np.linspace(0.0, 1.0, 17)
        d = 200.0 - 199.98 * nodes
        np.testing.assert_allclose(
            postprocess_profile(d, PostprocessMode.POLYFIT, degree=1, nodes=nodes), d, atol=1e-10
        )

    def test_polyfit_smooths_noise(self):
        nodes = np.linspace(0.0, 1.0, 33)
        smooth = 200.0 * (1.0 - nodes)
        noisy = smooth + np.random.default_rng(2).normal(0.0, 5.0, size=nodes.size)
        fitted = postprocess_profile(noisy, PostprocessMode.POLYFIT, degree=1, nodes=nodes)
        assert np.linalg.norm(fitted - smooth) < np.linalg.norm(noisy - smooth)

    def test_polyfit_uses_uniform_nodes_by_default(self):
        d = np.linspace(5.0, 1.0, 9)
        np.testing.assert_allclose(postprocess_profile(d, PostprocessMode.POLYFIT, degree=2), d, atol=1e-10)

    @pytest.mark.parametrize("degree", [None, -1, 5])
    def test_polyfit_rejects_bad_degree(self, degree):
        with pytest.raises(ConfigurationError):
            postprocess_profile(np.ones(5), PostprocessMode.POLYFIT, degree=degree)
