import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edge_consensus.errors import (ConvergenceFailure, DimensionMismatch, NotDetectable,
                                   NotStabilizable)
from edge_consensus.linear_systems import (LtiModel, care_residual, check_assumptions, eig,
                                           is_detectable, is_stabilizable, solve_care)
from instances import DRYING_A, DRYING_B, a1_model, drying_model, stabilizable_instance
from oracles import newton_kleinman


class TestLtiModel:

    def test_dimensions(self):
        m = LtiModel(DRYING_A, DRYING_B)
        assert (m.n, m.m) == (3, 1)

    def test_vector_b_promoted(self):
        assert LtiModel([[0.0]], [1.0]).b.shape == (1, 1)

    @pytest.mark.parametrize("a, b", [
        (np.zeros((2, 3)), np.zeros((2, 1))),
        (np.zeros((2, 2)), np.zeros((3, 1))),
    ])
    def test_rejects_mismatch(self, a, b):
        with pytest.raises(DimensionMismatch):
            LtiModel(a, b)


class TestCheckAssumptions:

    def test_scalar_integrator(self):
        rep = check_assumptions(LtiModel([[0.0]], [[1.0]]))
        assert rep.a1_holds and rep.a2_holds

    def test_drying_section(self):
        rep = check_assumptions(drying_model())
        assert rep.a1_holds and rep.a2_holds
        np.testing.assert_allclose(rep.spectrum_of_a, [-125.0, -0.01, 0.0], atol=1e-12)
        np.testing.assert_allclose(rep.imaginary_axis_eigs, [0.0], atol=1e-12)

    def test_unstable_scalar(self):
        rep = check_assumptions(LtiModel([[1.0]], [[1.0]]))
        assert not rep.a1_holds
        assert rep.a2_holds

    def test_hurwitz_not_a1(self):
        assert not check_assumptions(LtiModel([[-1.0]], [[1.0]])).a1_holds

    def test_uncontrollable(self):
        rep = check_assumptions(LtiModel(np.zeros((2, 2)), [[1.0], [0.0]]))
        assert rep.a1_holds and not rep.a2_holds

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_similarity_invariance(self, seed):
        rng = np.random.default_rng(seed)
        model = a1_model(rng)
        while True:
            t = rng.standard_normal((model.n, model.n))
            if np.linalg.cond(t) < 100:
                break
        other = LtiModel(t @ model.a @ np.linalg.inv(t), t @ model.b)
        r1, r2 = check_assumptions(model), check_assumptions(other)
        assert (r1.a1_holds, r1.a2_holds) == (r2.a1_holds, r2.a2_holds)


class TestEig:

    def test_identity(self):
        np.testing.assert_array_equal(eig(np.eye(3)), [1, 1, 1])

    def test_rotation(self):
        np.testing.assert_allclose(eig([[0.0, 1.0], [-1.0, 0.0]]), [-1j, 1j], atol=1e-14)

    def test_drying(self):
        np.testing.assert_allclose(eig(DRYING_A), [-125.0, -0.01, 0.0], atol=1e-12)

    def test_vectors_match_values(self):
        a = np.array([[2.0, 1.0], [0.0, -1.0]])
        w, v = eig(a, vectors=True)
        np.testing.assert_allclose(a @ v, v * w, atol=1e-12)

    def test_non_square(self):
        with pytest.raises(DimensionMismatch):
            eig(np.zeros((2, 3)))


class TestPbh:

    def test_stabilizable_with_stable_uncontrolled_mode(self):
        a = np.diag([0.0, -1.0])
        assert is_stabilizable(a, [[1.0], [0.0]])
        assert not is_stabilizable(a, [[0.0], [1.0]])

    def test_detectable(self):
        a = np.diag([0.0, -1.0])
        assert is_detectable([[1.0, 0.0]], a)
        assert not is_detectable([[0.0, 1.0]], a)


class TestSolveCare:

    def test_scalar_integrator(self):
        q1, r = 4.0, 0.25
        sol = solve_care([[0.0]], [[1.0]], [[q1]], [[r]])
        assert sol.p[0, 0] == pytest.approx(np.sqrt(q1 / r), rel=1e-12)
        assert sol.gain[0, 0] == pytest.approx(np.sqrt(q1 * r), rel=1e-12)

    def test_zero_weight_on_stable_plant(self):
        a = np.array([[-1.0, 2.0], [0.0, -3.0]])
        sol = solve_care(a, np.eye(2), np.zeros((2, 2)), np.eye(2))
        np.testing.assert_allclose(sol.p, 0.0, atol=1e-12)
        np.testing.assert_allclose(sol.gain, 0.0, atol=1e-12)

    def test_drying_rank_one(self):
        # modal left null vector of A, first component 1
        nu = np.array([1.0, 100.0, 0.16])
        sol = solve_care(DRYING_A, DRYING_B, np.outer(nu, nu), [[100.0]])
        np.testing.assert_allclose(sol.gain, [[10.0, 1000.0, 1.6]], rtol=1e-8)
        assert np.linalg.matrix_rank(sol.p, tol=1e-8 * np.linalg.norm(sol.p)) == 1
        # P = nu p nu^T with scalar p = sqrt(q1 / r1), r1 = nu^T B R B^T nu
        r1 = float(nu @ DRYING_B @ [[100.0]] @ DRYING_B.T @ nu)
        np.testing.assert_allclose(sol.p, np.outer(nu, nu) / np.sqrt(r1), rtol=1e-8)

    def test_not_stabilizable(self):
        with pytest.raises(NotStabilizable):
            solve_care(np.diag([1.0, -1.0]), [[0.0], [1.0]], np.eye(2), [[1.0]])

    def test_not_detectable(self):
        with pytest.raises(NotDetectable):
            solve_care(np.diag([1.0, -1.0]), np.eye(2), np.diag([0.0, 1.0]), np.eye(2))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve_care(np.eye(2), np.ones((2, 1)), np.eye(3), [[1.0]])

    def test_unreachable_tolerance(self):
        with pytest.raises(ConvergenceFailure) as info:
            solve_care(DRYING_A, DRYING_B, np.eye(3), [[100.0]], tol=1e-300)
        assert info.value.residual > 0

    def test_complex_hermitian(self):
        a = np.array([[1j, 0.0], [0.0, -1.0]])
        b = np.array([[1.0], [1.0]])
        sol = solve_care(a, b, np.eye(2), [[1.0]])
        np.testing.assert_allclose(sol.p, sol.p.conj().T, atol=1e-12)
        assert np.linalg.norm(care_residual(a, b, np.eye(2), [[1.0]], sol.p)) < 1e-9
        assert np.max(np.linalg.eigvals(a - b @ sol.gain).real) < 0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_newton_kleinman(self, seed):
        a, b, q, r = stabilizable_instance(np.random.default_rng(seed))
        sol = solve_care(a, b, q, r)
        ref = newton_kleinman(a, b, q, r)
        np.testing.assert_allclose(sol.p, sol.p.T, atol=1e-10 * max(1, np.abs(sol.p).max()))
        assert np.linalg.norm(sol.p - ref) <= 1e-6 * max(1.0, np.linalg.norm(ref))
        assert np.max(np.linalg.eigvals(a - b @ sol.gain).real) < 0
        assert np.min(np.linalg.eigvalsh(sol.p)) > -1e-9 * max(1.0, np.linalg.norm(sol.p))
