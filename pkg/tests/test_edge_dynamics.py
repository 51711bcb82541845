import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edge_consensus.edge_dynamics import (build_edge_dynamics, build_transform,
                                          feedback_equivalence_residual, lbar_from_transform,
                                          lift_reduced_state, project_initial_state,
                                          reduced_system)
from edge_consensus.errors import DimensionMismatch, DisconnectedGraph
from edge_consensus.graph_algebra import build_graph, compute_matrices, path_graph, spectrum
from edge_consensus.linear_systems import LtiModel
from edge_consensus.synthesis import closed_loop_matrix, design_local
from instances import a1_model, graphs, random_pd

K3 = build_graph(3, [(1, 2), (1, 3), (2, 3)])
INTEGRATOR = LtiModel([[0.0]], [[1.0]])


def _setup(graph):
    mats = compute_matrices(graph)
    sp = spectrum(mats)
    return mats, sp, build_transform(mats, sp)


class TestBuildEdgeDynamics:

    def test_single_integrator(self):
        mats = compute_matrices(K3)
        dyn = build_edge_dynamics(mats, INTEGRATOR)
        np.testing.assert_array_equal(dyn.lbar_kron_a, np.zeros((3, 3)))
        np.testing.assert_array_equal(dyn.input_map, np.eye(3))
        assert dyn.edge_state_dim == 3

    def test_tree_scalar(self):
        dyn = build_edge_dynamics(compute_matrices(path_graph(3)), LtiModel([[-0.7]], [[1.0]]))
        np.testing.assert_allclose(dyn.lbar_kron_a, -0.7 * np.eye(2), atol=1e-12)

    def test_consensus_states_annihilated(self):
        dyn = build_edge_dynamics(compute_matrices(K3), INTEGRATOR)
        np.testing.assert_allclose(dyn.z_projector @ np.ones(3), 0.0, atol=1e-15)

    def test_consensus_states_annihilated_vector(self):
        model = LtiModel(np.zeros((2, 2)), np.eye(2))
        dyn = build_edge_dynamics(compute_matrices(K3), model)
        xi = np.array([0.3, -2.0])
        np.testing.assert_allclose(dyn.z_projector @ np.kron(np.ones(3), xi), 0.0, atol=1e-15)

    def test_disconnected(self):
        mats = compute_matrices(build_graph(4, [(1, 2), (3, 4)]))
        with pytest.raises(DisconnectedGraph):
            build_edge_dynamics(mats, INTEGRATOR)

    @settings(max_examples=30, deadline=None)
    @given(graphs(8), st.integers(0, 2**32 - 1))
    def test_edge_closed_loop_intertwines(self, g, seed):
        # (E^T (x) I) M_agent = M_edge (E^T (x) I), so z = (E^T (x) I) x solves
        # the edge dynamics whenever x solves the agent network
        rng = np.random.default_rng(seed)
        model = a1_model(rng)
        mats = compute_matrices(g)
        gain = design_local(model, random_pd(rng, model.n), random_pd(rng, model.m), 0.7)
        dyn = build_edge_dynamics(mats, model)
        m_edge = dyn.lbar_kron_a - gain.mu * np.kron(mats.edge_laplacian, model.b @ gain.k)
        m_agent = closed_loop_matrix(mats.laplacian, model, gain)
        lhs = dyn.z_projector @ m_agent
        scale = max(1.0, np.abs(lhs).max())
        np.testing.assert_allclose(lhs, m_edge @ dyn.z_projector, atol=1e-10 * scale)


class TestBuildTransform:

    def test_tree_is_square(self):
        _, _, tr = _setup(path_graph(6))
        assert tr.is_tree
        assert tr.u1.shape == (5, 0)
        np.testing.assert_allclose(tr.u2.T @ tr.u2, np.eye(5), atol=1e-12)
        np.testing.assert_allclose(tr.u2 @ tr.u2.T, np.eye(5), atol=1e-12)

    def test_triangle_cycle(self):
        mats, _, tr = _setup(K3)
        assert not tr.is_tree
        assert tr.u1.shape == (3, 1)
        np.testing.assert_allclose(mats.incidence @ tr.u1, 0.0, atol=1e-12)
        # cycle 1->2->3->1 with the lower-index-positive orientation
        np.testing.assert_allclose(np.abs(tr.u1[:, 0]), np.full(3, 1 / np.sqrt(3)), atol=1e-12)

    def test_single_edge(self):
        _, _, tr = _setup(build_graph(2, [(1, 2)]))
        np.testing.assert_allclose(tr.u, [[1.0]], atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(graphs())
    def test_invariants(self, g):
        mats, sp, tr = _setup(g)
        u = tr.u
        assert u.shape == (g.edge_count, g.edge_count)
        np.testing.assert_allclose(u.T @ u, np.eye(g.edge_count), atol=1e-10)
        np.testing.assert_allclose(mats.incidence @ tr.u1, 0.0, atol=1e-10)
        np.testing.assert_allclose(tr.u2.T @ mats.edge_laplacian @ tr.u2, sp.gamma, atol=1e-9)
        np.testing.assert_allclose(lbar_from_transform(tr), mats.lbar, atol=1e-8)
        lbar_t = u.T @ mats.lbar @ u
        k1 = tr.u1.shape[1]
        expected = np.diag(np.r_[np.zeros(k1), np.ones(g.node_count - 1)])
        np.testing.assert_allclose(lbar_t, expected, atol=1e-8)

    @settings(max_examples=60, deadline=None)
    @given(graphs(), st.floats(1e-3, 10.0))
    def test_feedback_equivalence(self, g, mu):
        mats, _, tr = _setup(g)
        scale = max(1.0, mu * np.abs(mats.laplacian).max())
        assert feedback_equivalence_residual(tr, mats, mu) < 1e-9 * scale


class TestReducedSystem:

    @settings(max_examples=30, deadline=None)
    @given(graphs(8))
    def test_projector_identity(self, g):
        mats, sp, tr = _setup(g)
        model = LtiModel(np.diag([0.0, -1.0]), [[1.0], [1.0]])
        red = reduced_system(tr, mats, model)
        expected = np.kron(np.sqrt(sp.gamma) @ sp.v2.T, np.eye(2))
        np.testing.assert_allclose(red.z2_projector, expected, atol=1e-9)
        k = g.node_count - 1
        np.testing.assert_array_equal(red.a_block, np.kron(np.eye(k), model.a))
        np.testing.assert_array_equal(red.b_block, np.kron(np.eye(k), model.b))


class TestProjectInitialState:

    def test_consensus_start(self):
        mats, _, tr = _setup(K3)
        dyn = build_edge_dynamics(mats, INTEGRATOR)
        z1, z2 = project_initial_state(tr, dyn, np.full(3, 4.2))
        np.testing.assert_allclose(z1, 0.0, atol=1e-14)
        np.testing.assert_allclose(z2, 0.0, atol=1e-14)

    def test_two_integrators(self):
        mats, sp, tr = _setup(build_graph(2, [(1, 2)]))
        dyn = build_edge_dynamics(mats, INTEGRATOR)
        x0 = np.array([1.0, -1.0])
        z1, z2 = project_initial_state(tr, dyn, x0)
        assert z1.size == 0
        oracle = np.sqrt(sp.gamma) @ sp.v2.T @ x0
        np.testing.assert_allclose(z2, oracle, atol=1e-14)
        # v2 = (1, -1)/sqrt(2) under the sign convention, gamma = 2
        np.testing.assert_allclose(z2, [2.0], atol=1e-14)

    def test_cycle_component_zero(self):
        g = build_graph(5, [(1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (2, 5)])
        mats, _, tr = _setup(g)
        dyn = build_edge_dynamics(mats, INTEGRATOR)
        z1, _ = project_initial_state(tr, dyn, np.random.default_rng(3).standard_normal(5))
        np.testing.assert_allclose(z1, 0.0, atol=1e-14)

    def test_dimension_mismatch(self):
        mats, _, tr = _setup(K3)
        dyn = build_edge_dynamics(mats, INTEGRATOR)
        with pytest.raises(DimensionMismatch):
            project_initial_state(tr, dyn, np.zeros(4))

    @settings(max_examples=30, deadline=None)
    @given(graphs(8), st.integers(0, 2**32 - 1))
    def test_lift_round_trip(self, g, seed):
        mats, sp, tr = _setup(g)
        model = LtiModel(np.zeros((2, 2)), np.eye(2))
        dyn = build_edge_dynamics(mats, model)
        z2 = np.random.default_rng(seed).standard_normal(2 * (g.node_count - 1))
        x0 = lift_reduced_state(sp, z2, 2)
        _, back = project_initial_state(tr, dyn, x0)
        np.testing.assert_allclose(back, z2, atol=1e-10)
        # the lifted state has zero average
        np.testing.assert_allclose(x0.reshape(-1, 2).sum(axis=0), 0.0, atol=1e-10)
