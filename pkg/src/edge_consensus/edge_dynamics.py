"""Edge dynamics of a homogeneous multi-agent system.

With ``z = (E^T (x) I_n) x`` the stacked edge differences, the agent network
``x' = (I_N (x) A) x + (I_N (x) B) u`` becomes::

    z' = (Lbar (x) A) z + (I_M (x) B) w,        Lbar = E^T L^+ E

An orthogonal ``U = [U1 U2]`` diagonalizing ``Lbar`` splits ``z`` into a cycle
part ``z1 = (U1^T (x) I) z`` that is identically zero and a reduced part
``z2`` driven by ``N - 1`` decoupled copies of ``(A, B)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DisconnectedGraph
from .graph_algebra import GraphMatrices, LaplacianSpectrum, sign_normalize
from .linear_systems import LtiModel

NULL_TOL = 1e-9


@dataclass(frozen=True)
class EdgeDynamics:
    lbar_kron_a: np.ndarray
    input_map: np.ndarray
    z_projector: np.ndarray
    n: int

    @property
    def edge_state_dim(self) -> int:
        return self.lbar_kron_a.shape[0]


@dataclass(frozen=True)
class EdgeTransform:
    u1: np.ndarray
    u2: np.ndarray
    gamma: np.ndarray
    is_tree: bool

    @property
    def u(self) -> np.ndarray:
        return np.hstack([self.u1, self.u2])


@dataclass(frozen=True)
class ReducedEdgeSystem:
    a_block: np.ndarray
    b_block: np.ndarray
    z2_projector: np.ndarray


def _require_connected(matrices: GraphMatrices):
    if not matrices.connected:
        raise DisconnectedGraph()


def build_edge_dynamics(matrices: GraphMatrices, model: LtiModel) -> EdgeDynamics:
    _require_connected(matrices)
    m_edges = matrices.edge_count
    return EdgeDynamics(
        lbar_kron_a=np.kron(matrices.lbar, model.a),
        input_map=np.kron(np.eye(m_edges), model.b),
        z_projector=np.kron(matrices.incidence.T, np.eye(model.n)),
        n=model.n,
    )


def cycle_basis(incidence: np.ndarray, tol: float = NULL_TOL) -> np.ndarray:
    """Orthonormal basis of ``ker E`` (the cycle space), sign-normalized."""
    _, s, vh = np.linalg.svd(incidence)
    m = incidence.shape[1]
    scale = s[0] if s.size else 1.0
    rank = int(np.sum(s >= tol * max(scale, 1.0)))
    basis = vh[rank:].T
    if basis.shape[1] == 0:
        return np.zeros((m, 0))
    return sign_normalize(basis)


def build_transform(matrices: GraphMatrices, spec: LaplacianSpectrum) -> EdgeTransform:
    """``U2 = E^T V2 Gamma^{-1/2}`` and ``U1`` spanning the cycle space.

    For a spanning tree ``U1`` has no columns and ``U = U2`` is square.
    """
    _require_connected(matrices)
    e = matrices.incidence
    gamma = spec.gamma
    u2 = e.T @ spec.v2 / np.sqrt(np.diag(gamma))
    n_nodes, m_edges = e.shape
    u1 = cycle_basis(e)
    expected = m_edges - n_nodes + 1
    if u1.shape[1] != expected:
        raise DisconnectedGraph(
            f"cycle space has dimension {u1.shape[1]}, expected {expected}")
    return EdgeTransform(u1=u1, u2=u2, gamma=gamma, is_tree=(m_edges == n_nodes - 1))


def reduced_system(transform: EdgeTransform, matrices: GraphMatrices,
                   model: LtiModel) -> ReducedEdgeSystem:
    k = transform.u2.shape[1]
    eye_n = np.eye(model.n)
    return ReducedEdgeSystem(
        a_block=np.kron(np.eye(k), model.a),
        b_block=np.kron(np.eye(k), model.b),
        z2_projector=np.kron(transform.u2.T @ matrices.incidence.T, eye_n),
    )


def project_initial_state(transform: EdgeTransform, dynamics: EdgeDynamics, x0):
    """Split ``x0`` into ``(z1(0), z2(0))`` in transformed edge coordinates."""
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size != dynamics.z_projector.shape[1]:
        raise DimensionMismatch(
            f"x0 has {x0.size} entries, expected {dynamics.z_projector.shape[1]}")
    z = dynamics.z_projector @ x0
    eye_n = np.eye(dynamics.n)
    z1 = np.kron(transform.u1.T, eye_n) @ z
    z2 = np.kron(transform.u2.T, eye_n) @ z
    return z1, z2


def lift_reduced_state(spec: LaplacianSpectrum, z2, n: int) -> np.ndarray:
    """Agent state ``x`` with zero average whose reduced edge state is ``z2``.

    Inverts ``z2 = (Gamma^{1/2} V2^T (x) I) x`` on the disagreement subspace.
    """
    z2 = np.asarray(z2, dtype=float).ravel()
    left = spec.v2 / np.sqrt(np.diag(spec.gamma))
    return np.kron(left, np.eye(n)) @ z2


def lbar_from_transform(transform: EdgeTransform) -> np.ndarray:
    """``U diag(0, I) U^T``, which must reproduce ``Lbar``."""
    return transform.u2 @ transform.u2.T


def feedback_equivalence_residual(transform: EdgeTransform, matrices: GraphMatrices,
                                  mu: float) -> float:
    """Max-abs residual of ``F (U^T E^T) = mu U^T E^T L`` with
    ``F = diag(0, mu Gamma)``."""
    u = transform.u
    k1 = transform.u1.shape[1]
    f = np.zeros((u.shape[1],) * 2)
    f[k1:, k1:] = mu * transform.gamma
    ute = u.T @ matrices.incidence.T
    return float(np.max(np.abs(f @ ute - mu * ute @ matrices.laplacian)))
