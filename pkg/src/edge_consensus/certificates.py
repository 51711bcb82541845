"""Numerical certificates for a synthesized gain on a given network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .edge_dynamics import (EdgeTransform, build_edge_dynamics, build_transform,
                            feedback_equivalence_residual, lbar_from_transform,
                            project_initial_state)
from .graph_algebra import GraphMatrices, LaplacianSpectrum
from .linear_systems import LtiModel
from .simulation import closed_loop_cost, integrate_linear
from .synthesis import (ControllerGain, closed_loop_matrix, edge_feedback,
                        global_riccati_residual, global_weights, optimal_cost,
                        predicted_spectrum, riccati_feedback)

RICCATI_TOL = 1e-8
FEEDBACK_TOL = 1e-9
SPECTRUM_TOL = 1e-7
COST_RTOL = 5e-3
ORTHO_TOL = 1e-10
EQUIV_TOL = 1e-9
Z1_TOL = 1e-9


@dataclass(frozen=True)
class Certificate:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tolerance)

    @property
    def margin(self) -> float:
        return self.tolerance - self.value

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "tolerance": self.tolerance, "margin": self.margin}


def _scale(*values) -> float:
    return max([1.0] + [float(v) for v in values])


def certify(matrices: GraphMatrices, spec: LaplacianSpectrum, model: LtiModel,
            gain: ControllerGain, x0, transform: EdgeTransform | None = None,
            z1_horizon: float | None = None) -> list[Certificate]:
    """Run every certificate and return them in a fixed order.

    Tolerances on quantities whose magnitude depends on the data (Riccati
    residual, feedback, spectrum) are scaled by ``max(1, size)`` of the
    relevant reference quantity.
    """
    transform = transform or build_transform(matrices, spec)
    dyn = build_edge_dynamics(matrices, model)
    gamma = spec.gamma
    certs = []

    q_tilde, _ = global_weights(gain, gamma)
    certs.append(Certificate(
        "global_riccati_residual", global_riccati_residual(model, gain, gamma),
        RICCATI_TOL * _scale(np.linalg.norm(q_tilde))))
    f_closed = edge_feedback(gain, gamma)
    f_ric = riccati_feedback(model, gain, gamma)
    certs.append(Certificate(
        "edge_feedback_structure", float(np.max(np.abs(f_ric - f_closed))),
        FEEDBACK_TOL * _scale(np.max(np.abs(f_closed)))))

    rep = predicted_spectrum(gain, spec, model, matrices.laplacian)
    radius = np.max(np.abs(rep.mas_computed))
    certs.append(Certificate("spectrum_match", rep.max_mismatch, SPECTRUM_TOL * _scale(radius)))

    _, z2 = project_initial_state(transform, dyn, x0)
    j_formula = optimal_cost(gain.p1, z2)
    j_num, _ = closed_loop_cost(matrices, transform, model, gain, x0)
    rel = abs(j_num - j_formula) / abs(j_formula) if j_formula else abs(j_num)
    certs.append(Certificate("cost_identity", rel, COST_RTOL))

    u = transform.u
    certs.append(Certificate(
        "transform_orthogonality", float(np.max(np.abs(u.T @ u - np.eye(u.shape[1])))),
        ORTHO_TOL))
    certs.append(Certificate(
        "feedback_equivalence", feedback_equivalence_residual(transform, matrices, gain.mu),
        EQUIV_TOL * _scale(gain.mu * np.max(np.abs(matrices.laplacian)))))

    m = closed_loop_matrix(matrices.laplacian, model, gain)
    rho = float(np.max(np.abs(np.linalg.eigvals(m))))
    h = min(1e-3, 0.5 / rho)
    horizon = z1_horizon if z1_horizon is not None else 2000 * h
    _, xs = integrate_linear(m, x0, max(horizon, h), h, record_every=max(1, int(horizon / h) // 500))
    z1 = xs @ np.kron(matrices.incidence @ transform.u1, np.eye(model.n))
    certs.append(Certificate(
        "cycle_states_zero", float(np.max(np.abs(z1), initial=0.0)),
        Z1_TOL * _scale(np.max(np.abs(xs)))))

    if transform.is_tree:
        lbar_gap = float(np.max(np.abs(matrices.lbar - np.eye(matrices.edge_count))))
        square = transform.u1.shape[1] == 0 and transform.u2.shape[0] == transform.u2.shape[1]
        certs.append(Certificate("tree_fast_path", lbar_gap if square else np.inf, ORTHO_TOL))
    else:
        lbar_gap = float(np.max(np.abs(lbar_from_transform(transform) - matrices.lbar)))
        certs.append(Certificate("lbar_from_transform", lbar_gap, 1e-8))
    return certs
