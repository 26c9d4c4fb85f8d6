import numpy as np
import pytest
from scipy.linalg import cholesky

from datasets.firn_cases import default_params
from discretization.assembly import (
    assemble_A,
    assemble_C,
    assemble_direction_operator,
    assemble_K_Q_B,
    assemble_mass,
    assemble_S,
    boundary_constant_c1,
    boundary_constant_c2,
    boundary_forcing_coefficients,
    galerkin_mass,
    structured_Ae_product,
    structured_J_block,
    structured_Se_product,
)
from discretization.mesh import build_adaptive_mesh, build_uniform_mesh
from domain_models import C1Mode, DiffusionProfile, FirnParams
from exceptions import ConfigurationError
from tests.oracles import dense_assemble_A_S, dense_mass, eig_min_symmetric_part


def _dense(matrix) -> np.ndarray:
    return matrix.to_sparse().toarray()


def _unit(n: int, j: int) -> np.ndarray:
    e = np.zeros(n)
    e[j] = 1.0
    return e


def _bare_params(**values) -> FirnParams:
    """Constants outside the validated ranges (zero G or F, f = 1) for closed-form checks."""
    defaults = dict(f=0.2, G=10.03, F=685.0, Malpha=1.8134e-4, zF=1.0, Te=150.0, r_alphas=(1.0,))
    defaults.update(values)
    return FirnParams.model_construct(**defaults)


class TestMassMatrix:
    """Test suite for assemble_mass."""

    def test_three_node_mesh(self):
        M = assemble_mass(build_uniform_mesh("1/2"))
        np.testing.assert_allclose(_dense(M), np.array([[2.0, 1.0], [1.0, 2.0]]) / 12.0, rtol=1e-14)

    def test_displayed_stencil(self):
        h = 1.0 / 8.0
        M = _dense(assemble_mass(build_uniform_mesh(h)))
        expected = (h / 6.0) * (np.diag([2.0] + [4.0] * 5 + [2.0]) + np.diag([1.0] * 6, 1) + np.diag([1.0] * 6, -1))
        np.testing.assert_allclose(M, expected, rtol=1e-14)

    def test_galerkin_mass_fills_first_row(self):
        h = 1.0 / 8.0
        mesh = build_uniform_mesh(h)
        M = _dense(galerkin_mass(mesh))
        expected = (h / 6.0) * (np.diag([4.0] * 6 + [2.0]) + np.diag([1.0] * 6, 1) + np.diag([1.0] * 6, -1))
        np.testing.assert_allclose(M, expected, rtol=1e-14)
        assert M[0, 0] - _dense(assemble_mass(mesh))[0, 0] == pytest.approx(h / 3.0)

    def test_system_uses_galerkin_mass(self):
        params = default_params(zF=5.0)
        mesh = build_uniform_mesh("1/4")
        D = np.linspace(200.0, 0.02, mesh.size)
        without_mass = assemble_C(mesh, params.model_copy(update={"G": 0.0}), D)
        mass_part = (_dense(assemble_C(mesh, params, D)) - _dense(without_mass)) * params.f / params.G
        np.testing.assert_allclose(mass_part, _dense(galerkin_mass(mesh)), rtol=1e-12, atol=1e-15)

    @pytest.mark.parametrize("include_boundary_element", [False, True])
    def test_matches_quadrature(self, include_boundary_element):
        for mesh in [build_uniform_mesh("1/4"), build_adaptive_mesh("1/4")]:
            M = assemble_mass(mesh, include_boundary_element=include_boundary_element)
            reference = dense_mass(mesh.nodes, include_boundary_element)
            np.testing.assert_allclose(_dense(M), reference, rtol=1e-13, atol=1e-16)

    def test_symmetric_positive_definite(self):
        for mesh in [build_uniform_mesh("1/8"), build_uniform_mesh("1/64"), build_adaptive_mesh("1/8")]:
            M = _dense(assemble_mass(mesh))
            np.testing.assert_array_equal(M, M.T)
            cholesky(M)
            assert eig_min_symmetric_part(M) > 0.0

    @pytest.mark.parametrize("h", [1.0 / 8.0, 1.0 / 64.0])
    def test_norm_equivalence(self, h):
        """h/6 |v|^2 <= v'Mv <= h |v|^2 for random v."""
        M = assemble_mass(build_uniform_mesh(h))
        rng = np.random.default_rng(11)
        for _ in range(1000):
            v = rng.normal(size=M.dim)
            energy = M.quadratic_form(v)
            norm = float(v @ v)
            assert h * norm / 6.0 <= energy * (1 + 1e-14)
            assert energy <= h * norm * (1 + 1e-14)


class TestAdvectionMatrices:
    """Test suite for assemble_K_Q_B."""

    def test_three_node_patterns(self):
        K, Q, B = assemble_K_Q_B(build_uniform_mesh("1/2"), F=2.0)
        np.testing.assert_array_equal(_dense(K), [[0.0, 1.0], [-1.0, 1.0]])
        np.testing.assert_array_equal(_dense(Q), [[0.0, -1.0], [1.0, 1.0]])
        np.testing.assert_array_equal(_dense(B), [[0.0, 0.0], [0.0, 2.0]])

    def test_quadratic_forms(self):
        F = 685.0
        K, Q, B = assemble_K_Q_B(build_uniform_mesh("1/16"), F)
        rng = np.random.default_rng(5)
        for _ in range(50):
            v = rng.normal(size=K.dim)
            assert K.quadratic_form(v) == pytest.approx(0.5 * F * v[-1] ** 2, rel=1e-10, abs=1e-9)
            assert Q.quadratic_form(v) == pytest.approx(0.5 * F * v[-1] ** 2, rel=1e-10, abs=1e-9)

    def test_q_plus_k_is_b(self):
        K, Q, B = assemble_K_Q_B(build_uniform_mesh("1/8"), 3.0)
        np.testing.assert_array_equal(_dense(Q + K), _dense(B))


class TestDiffusionMatrices:
    """Test suite for assemble_A and assemble_S."""

    def test_A_example(self):
        A = assemble_A(build_uniform_mesh("1/3"), np.array([4.0, 3.0, 2.0, 1.0]))
        expected = np.array([[2.0, 5.0, 0.0], [-5.0, 2.0, 3.0], [0.0, -3.0, 3.0]]) / 4.0
        np.testing.assert_allclose(_dense(A), expected, rtol=1e-14)

    def test_match_dense_oracle(self):
        rng = np.random.default_rng(7)
        for mesh in [build_uniform_mesh("1/8"), build_adaptive_mesh("1/4")]:
            D = rng.uniform(0.5, 3.0, size=mesh.size)
            A_ref, S_ref = dense_assemble_A_S(mesh.nodes, D)
            np.testing.assert_allclose(_dense(assemble_A(mesh, D)), A_ref, rtol=1e-13, atol=1e-12)
            np.testing.assert_allclose(_dense(assemble_S(mesh, D)), S_ref, rtol=1e-13, atol=1e-12)

    def test_zero_profile(self):
        mesh = build_uniform_mesh("1/8")
        assert not np.any(_dense(assemble_A(mesh, np.zeros(9))))
        assert not np.any(_dense(assemble_S(mesh, np.zeros(9))))

    def test_S_positive_definite_for_random_positive_D(self):
        mesh = build_uniform_mesh("1/64")
        rng = np.random.default_rng(13)
        for _ in range(100):
            S = _dense(assemble_S(mesh, rng.uniform(0.01, 200.0, size=mesh.size)))
            np.testing.assert_array_equal(S, S.T)
            cholesky(S)

    def test_A_positive_definite_for_decreasing_D(self):
        mesh = build_uniform_mesh("1/64")
        rng = np.random.default_rng(17)
        for _ in range(100):
            D = np.sort(rng.uniform(0.01, 200.0, size=mesh.size))[::-1].copy()
            D += np.linspace(1e-3, 0.0, mesh.size)  # strictly decreasing
            assert eig_min_symmetric_part(_dense(assemble_A(mesh, D))) > 0.0

    def test_homogeneity(self):
        mesh = build_uniform_mesh("1/16")
        D = np.linspace(200.0, 0.02, mesh.size)
        np.testing.assert_allclose(_dense(assemble_A(mesh, 3.0 * D)), 3.0 * _dense(assemble_A(mesh, D)), rtol=1e-14)
        np.testing.assert_allclose(_dense(assemble_S(mesh, 3.0 * D)), 3.0 * _dense(assemble_S(mesh, D)), rtol=1e-14)

    def test_S_energy_identity(self):
        h = 1.0 / 5.0
        mesh = build_uniform_mesh(h)
        rng = np.random.default_rng(19)
        D = rng.uniform(0.5, 2.0, size=mesh.size)
        v = rng.normal(size=mesh.size - 1)
        padded = np.concatenate(([0.0], v))
        expected = sum((D[k] + D[k + 1]) * (padded[k + 1] - padded[k]) ** 2 for k in range(mesh.size - 1)) / (2.0 * h)
        assert assemble_S(mesh, D).quadratic_form(v) == pytest.approx(expected, rel=1e-13)

    def test_accepts_profile_model(self):
        mesh = build_uniform_mesh("1/4")
        profile = DiffusionProfile(values=np.linspace(2.0, 1.0, 5), mesh=mesh)
        np.testing.assert_array_equal(_dense(assemble_S(mesh, profile)), _dense(assemble_S(mesh, profile.values)))

    def test_profile_on_other_mesh_rejected(self):
        with pytest.raises(ConfigurationError):
            assemble_S(build_uniform_mesh("1/4"), np.ones(4))
        other = DiffusionProfile(values=np.ones(9), mesh=build_uniform_mesh("1/8"))
        with pytest.raises(ConfigurationError):
            assemble_A(build_uniform_mesh("1/4"), other)


class TestSystemMatrix:
    """Test suite for assemble_C."""

    def test_pure_diffusion(self):
        params = _bare_params(G=0.0, F=0.0, Malpha=0.0, zF=3.0)
        mesh = build_uniform_mesh("1/8")
        D = np.linspace(2.0, 1.0, mesh.size)
        expected = _dense(assemble_S(mesh, D)) / (9.0 * params.f)
        np.testing.assert_allclose(_dense(assemble_C(mesh, params, D)), expected, rtol=1e-14, atol=1e-14)

    def test_weighted_sum_of_parts(self):
        params = default_params(zF=5.0)
        mesh = build_uniform_mesh("1/3")
        D = np.array([200.0, 150.0, 100.0, 50.0])
        M = _dense(galerkin_mass(mesh))
        _, Q, _ = assemble_K_Q_B(mesh, params.F)
        A_ref, S_ref = dense_assemble_A_S(mesh.nodes, D)
        f, zF = params.f, params.zF
        expected = (params.G / f) * M + S_ref / (zF**2 * f) - params.Malpha / (zF * f) * A_ref + _dense(Q) / zF
        C = _dense(assemble_C(mesh, params, D))
        assert C[0, 0] == pytest.approx(expected[0, 0], rel=1e-13)
        np.testing.assert_allclose(C, expected, rtol=1e-12, atol=1e-12)


class TestBoundaryConstants:
    """Test suite for c1 and c2."""

    def test_c1_mass_term_only(self):
        params = _bare_params(F=0.0)
        mesh = build_uniform_mesh("1/4")
        D = np.zeros(mesh.size)
        assert boundary_constant_c1(mesh, params, D) == pytest.approx(params.G * 0.25 / (6.0 * params.f))

    def test_c1_readings_agree_for_unit_depth(self):
        params = default_params(zF=1.0)
        mesh = build_uniform_mesh("1/16")
        D = np.linspace(200.0, 0.02, mesh.size)
        consistent = boundary_constant_c1(mesh, params, D, C1Mode.CONSISTENT)
        literal = boundary_constant_c1(mesh, params, D, C1Mode.LITERAL)
        assert consistent == literal

    def test_c1_readings_differ_for_deep_firn(self):
        params = default_params(zF=50.0)
        mesh = build_uniform_mesh("1/16")
        D = np.linspace(200.0, 0.02, mesh.size)
        assert boundary_constant_c1(mesh, params, D, C1Mode.CONSISTENT) != pytest.approx(
            boundary_constant_c1(mesh, params, D, C1Mode.LITERAL)
        )

    def test_c2_closed_form(self):
        params = _bare_params(f=1.0, Malpha=0.0, zF=1.0)
        assert boundary_constant_c2(build_uniform_mesh("1/4"), params, 1.0) == pytest.approx(-1.0)

    def test_c2_zero_for_inert_gas(self):
        params = default_params()
        assert boundary_constant_c2(build_uniform_mesh("1/4"), params, 0.0) == 0.0

    def test_c2_is_half_the_c1_derivative(self):
        params = default_params(zF=5.0)
        mesh = build_uniform_mesh("1/16")
        r_alpha = 1.5
        base = np.linspace(200.0, 0.0, mesh.size)
        for j in (0, 1):
            shifted = base + r_alpha * _unit(mesh.size, j)
            derivative = boundary_constant_c1(mesh, params, shifted) - boundary_constant_c1(mesh, params, base)
            assert boundary_constant_c2(mesh, params, r_alpha) == pytest.approx(0.5 * derivative, rel=1e-9)

    def test_forcing_coefficients_only_on_first_element(self):
        params = default_params()
        mesh = build_uniform_mesh("1/8")
        coefficients = boundary_forcing_coefficients(mesh, params, 1.0)
        assert coefficients[0] == coefficients[1] == boundary_constant_c2(mesh, params, 1.0)
        assert not np.any(coefficients[2:])


class TestStructuredProducts:
    """Test suite for the O(n) block products against dense per-direction matrices."""

    @pytest.fixture
    def vector(self):
        return np.random.default_rng(23).normal(size=6)

    def test_Ae_second_column(self, vector):
        block = structured_Ae_product(vector)
        expected = np.zeros(6)
        expected[0], expected[1] = vector[1], vector[1] - vector[0]
        np.testing.assert_allclose(block[:, 1], expected / 4.0, rtol=1e-14, atol=1e-15)

    def test_Se_second_column(self, vector):
        h = 1.0 / 6.0
        block = structured_Se_product(vector, h)
        expected = np.zeros(6)
        expected[0], expected[1] = 2.0 * vector[0] - vector[1], vector[1] - vector[0]
        np.testing.assert_allclose(block[:, 1], expected / (2.0 * h), rtol=1e-13, atol=1e-13)

    def test_zero_vector(self):
        assert not np.any(structured_Ae_product(np.zeros(5)))
        assert not np.any(structured_Se_product(np.zeros(5), 0.2))

    def test_constant_vector_only_touches_boundary_element(self):
        block = structured_Se_product(np.ones(5), 0.2)
        assert not np.any(block[:, 2:])

    @pytest.mark.parametrize("mesh_builder,h", [(build_uniform_mesh, "1/6"), (build_adaptive_mesh, "1/4")])
    def test_columns_match_dense_products(self, mesh_builder, h):
        mesh = mesh_builder(h)
        n = mesh.size
        v = np.random.default_rng(29).normal(size=n - 1)
        ae_block = structured_Ae_product(v)
        se_block = structured_Se_product(v, mesh.spacings)
        for j in range(n):
            A_ref, S_ref = dense_assemble_A_S(mesh.nodes, _unit(n, j))
            np.testing.assert_allclose(ae_block[:, j], A_ref @ v, rtol=1e-13, atol=1e-13)
            np.testing.assert_allclose(se_block[:, j], S_ref @ v, rtol=1e-13, atol=1e-10)

    def test_J_block_columns(self):
        params = default_params(zF=5.0)
        mesh = build_uniform_mesh("1/6")
        n, r_alpha = mesh.size, 1.5
        v = np.random.default_rng(31).normal(size=n - 1)
        block = structured_J_block(v, params, r_alpha, mesh)
        f, zF = params.f, params.zF
        for j in range(n):
            A_ref, S_ref = dense_assemble_A_S(mesh.nodes, r_alpha * _unit(n, j))
            expected = S_ref @ v / (2.0 * zF**2 * f) - params.Malpha / (2.0 * zF * f) * (A_ref @ v)
            np.testing.assert_allclose(block[:, j], expected, rtol=1e-12, atol=1e-12)
            operator = assemble_direction_operator(mesh, params, r_alpha, _unit(n, j))
            np.testing.assert_allclose(operator.matvec(v), block[:, j], rtol=1e-12, atol=1e-12)

    def test_J_block_special_cases(self):
        mesh = build_uniform_mesh("1/6")
        v = np.random.default_rng(37).normal(size=mesh.size - 1)
        assert not np.any(structured_J_block(v, default_params(), 0.0, mesh))

        params = _bare_params(Malpha=0.0, zF=2.0)
        expected = structured_Se_product(v, mesh.spacings) / (2.0 * 4.0 * params.f)
        np.testing.assert_allclose(structured_J_block(v, params, 1.0, mesh), expected, rtol=1e-14)

    def test_rejects_block_input(self):
        with pytest.raises(ConfigurationError):
            structured_Ae_product(np.zeros((3, 2)))
