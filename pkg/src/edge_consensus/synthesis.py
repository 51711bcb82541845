"""LQR-based coupling gains for the consensus law ``u = -mu (L (x) K) x``.

Four designs share one local Riccati equation
``P1 A + A^T P1 + Q1 - P1 B R1 B^T P1 = 0`` and the gain ``K = R1 B^T P1``:

* ``global``   -- globally optimal for the reduced edge system; needs
  ``mu >= 1 / lambda_min(L)``.
* ``local``    -- the same ``K`` justified edge by edge; any ``mu > 0``.
* ``reduced``  -- ``Q1 = W Q1t W^*`` built from left eigenvectors of chosen
  modes, so ``rank K <= q`` and the closed-loop spectrum has a closed form.
* ``first_order`` -- the reduced design on the single zero mode of ``A``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import (AssumptionViolation, ComplexGainResidual, CouplingTooSmall,
                     DimensionMismatch, InvalidDesign, NotDetectable,
                     RepeatedTargetMode, UncontrollableZeroMode, ZeroNotSimple,
                     ConvergenceFailure)
from .graph_algebra import LaplacianSpectrum
from .linear_systems import (LtiModel, check_assumptions, eig, is_detectable,
                             matrix_rank, psd_sqrt, solve_care, sort_eigenvalues)

log = logging.getLogger(__name__)

RANK_TOL = 1e-9
GLOBAL_RESIDUAL_TOL = 1e-8


class DesignMode(str, enum.Enum):
    GLOBAL = "global"
    LOCAL = "local"
    REDUCED = "reduced"
    FIRST_ORDER = "first_order"


class NuNormalization(str, enum.Enum):
    #: left vector scaled so that ``nu^* eta = 1`` for the unit right eigenvector
    MODAL = "modal"
    #: left vector of unit 2-norm
    UNIT = "unit"


@dataclass(frozen=True)
class DesignSpec:
    mode: DesignMode
    mu: float
    r1: np.ndarray
    q1: np.ndarray | None = None
    target_modes: tuple[complex, ...] | None = None
    q1_scalar: float | None = None
    nu_normalization: NuNormalization = NuNormalization.MODAL

    def __post_init__(self):
        object.__setattr__(self, "mode", DesignMode(self.mode))
        object.__setattr__(self, "nu_normalization", NuNormalization(self.nu_normalization))
        object.__setattr__(self, "r1", np.atleast_2d(np.asarray(self.r1, dtype=float)))
        if self.q1 is not None:
            object.__setattr__(self, "q1", np.atleast_2d(np.asarray(self.q1)))
        if self.mode in (DesignMode.GLOBAL, DesignMode.LOCAL) and self.q1 is None:
            raise InvalidDesign(f"{self.mode.value} design needs q1")
        if self.mode is DesignMode.REDUCED and not self.target_modes:
            raise InvalidDesign("reduced design needs target_modes")
        if self.mode is DesignMode.FIRST_ORDER and self.q1_scalar is None:
            raise InvalidDesign("first_order design needs q1_scalar")


@dataclass(frozen=True)
class ModeBasis:
    """Modal data of the targeted eigenvalues.

    ``w_matrix`` holds left eigenvectors (``nu_i^* A = lambda_i nu_i^*``) as
    columns and ``right`` the matching unit right eigenvectors.
    """
    lambda_diag: np.ndarray
    w_matrix: np.ndarray
    right: np.ndarray
    h_matrix: np.ndarray
    r_tilde: np.ndarray

    @property
    def q(self) -> int:
        return self.lambda_diag.shape[0]

    @property
    def nu(self) -> np.ndarray:
        return self.w_matrix[:, 0]

    @property
    def r1_scalar(self) -> float:
        return float(np.real(self.r_tilde[0, 0]))


@dataclass(frozen=True)
class ControllerGain:
    k: np.ndarray
    mu: float
    mode: DesignMode
    p1: np.ndarray
    q1: np.ndarray
    r1: np.ndarray
    order: int
    basis: ModeBasis | None = None
    p_tilde: np.ndarray | None = None
    q1_scalar: float | None = None

    def with_mu(self, mu: float) -> "ControllerGain":
        _check_mu(mu)
        return replace(self, mu=float(mu))

    def to_dict(self) -> dict:
        out = {
            "mode": self.mode.value,
            "mu": self.mu,
            "k": self.k.tolist(),
            "order": self.order,
            "p1": self.p1.tolist(),
            "q1": self.q1.tolist(),
            "r1": self.r1.tolist(),
        }
        if self.basis is not None:
            out["target_modes"] = _complex_pairs(np.diag(self.basis.lambda_diag))
            out["left_eigenvectors"] = _complex_matrix(self.basis.w_matrix)
            out["r_tilde"] = _complex_matrix(self.basis.r_tilde)
            out["p_tilde"] = _complex_matrix(self.p_tilde)
        if self.q1_scalar is not None:
            out["q1_scalar"] = self.q1_scalar
            out["r1_scalar"] = self.basis.r1_scalar
        return out


@dataclass(frozen=True)
class SpectrumReport:
    method: str
    mas_predicted: np.ndarray
    edge_predicted: np.ndarray
    consensus_speed: float
    speed_formula: float | None = None
    mas_computed: np.ndarray | None = None
    max_mismatch: float | None = None

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "mas_predicted": _complex_pairs(self.mas_predicted),
            "edge_predicted": _complex_pairs(self.edge_predicted),
            "consensus_speed": self.consensus_speed,
            "speed_formula": self.speed_formula,
        }
        if self.mas_computed is not None:
            out["mas_computed"] = _complex_pairs(self.mas_computed)
            out["max_mismatch"] = self.max_mismatch
        return out


def _complex_pairs(values):
    return [[float(np.real(v)), float(np.imag(v))] for v in np.ravel(values)]


def _complex_matrix(m):
    m = np.atleast_2d(m)
    if not np.iscomplexobj(m) or not np.any(m.imag):
        return np.real(m).tolist()
    return {"real": m.real.tolist(), "imag": m.imag.tolist()}


def _check_mu(mu):
    if not (np.isfinite(mu) and mu > 0):
        raise InvalidDesign(f"mu must be positive, got {mu!r}")


def _require_assumptions(model: LtiModel):
    rep = check_assumptions(model)
    if not rep.a1_holds:
        raise AssumptionViolation(
            "assumption A1 fails: spectrum of A must lie in the closed left half "
            "plane with at least one eigenvalue on the imaginary axis")
    if not rep.a2_holds:
        raise AssumptionViolation("assumption A2 fails: (A, B) is not controllable")


def _check_weights(q1, r1, n, m):
    q1 = np.atleast_2d(np.asarray(q1))
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))
    if q1.shape != (n, n):
        raise DimensionMismatch(f"Q1 has shape {q1.shape}, expected ({n}, {n})")
    if r1.shape != (m, m):
        raise DimensionMismatch(f"R1 has shape {r1.shape}, expected ({m}, {m})")
    if not np.allclose(r1, r1.T) or np.min(np.linalg.eigvalsh(r1)) <= 0:
        raise InvalidDesign("R1 must be symmetric positive definite")
    if not np.allclose(q1, q1.conj().T):
        raise InvalidDesign("Q1 must be symmetric")
    qh = 0.5 * (q1 + q1.conj().T)
    if np.min(np.linalg.eigvalsh(qh)) < -1e-12 * max(1.0, np.linalg.norm(qh)):
        raise InvalidDesign("Q1 must be positive semidefinite")
    return qh, r1


def _gain_rank(k) -> int:
    return matrix_rank(k, RANK_TOL)


def local_gain(model: LtiModel, q1, r1, mu: float, mode=DesignMode.LOCAL) -> ControllerGain:
    q1, r1 = _check_weights(q1, r1, model.n, model.m)
    q1 = np.real(q1)
    if not is_detectable(psd_sqrt(q1), model.a):
        raise NotDetectable("(Q1^{1/2}, A) is not detectable")
    sol = solve_care(model.a, model.b, q1, r1)
    return ControllerGain(k=sol.gain, mu=float(mu), mode=DesignMode(mode), p1=sol.p,
                          q1=q1, r1=r1, order=_gain_rank(sol.gain))


def design_local(model: LtiModel, q1, r1, mu: float) -> ControllerGain:
    """Locally optimal design: the consensus law works for any ``mu > 0``."""
    _check_mu(mu)
    _require_assumptions(model)
    return local_gain(model, q1, r1, mu, DesignMode.LOCAL)


def global_mu_bound(spec: LaplacianSpectrum) -> float:
    return 1.0 / spec.lambda_min


def design_global(model: LtiModel, spec: LaplacianSpectrum, q1, r1, mu: float) -> ControllerGain:
    """Globally optimal design for the reduced edge system.

    The returned gain is certified: ``I (x) P1`` is checked to solve the
    global Riccati equation under the structured weights of
    :func:`global_weights`.

    Raises
    ------
    CouplingTooSmall
        If ``mu < 1 / lambda_min(L)``.
    """
    _check_mu(mu)
    bound = global_mu_bound(spec)
    if mu < bound * (1 - 1e-12):
        raise CouplingTooSmall(mu, bound)
    _require_assumptions(model)
    gain = local_gain(model, q1, r1, mu, DesignMode.GLOBAL)
    q_tilde, _ = global_weights(gain, spec.gamma)
    res = global_riccati_residual(model, gain, spec.gamma)
    tol = GLOBAL_RESIDUAL_TOL * max(1.0, float(np.linalg.norm(q_tilde)))
    if not res < tol:
        raise ConvergenceFailure(f"global Riccati residual {res:.3e} above {tol:.3e}", res)
    return gain


def global_weights(gain: ControllerGain, gamma: np.ndarray):
    """Structured weights ``(Qt, Rt^{-1})`` of the global index.

    ``Qt = I (x) Q1 + (mu Gamma - I) (x) Q2`` with ``Q2 = P1 B R1 B^T P1``
    (written here as ``K^T R1^{-1} K``) and ``Rt^{-1} = mu Gamma (x) R1``.
    """
    k = gain.k
    q2 = k.T @ np.linalg.solve(gain.r1, k)
    q2 = 0.5 * (q2 + q2.T)
    dim = gamma.shape[0]
    q_tilde = np.kron(np.eye(dim), gain.q1) + np.kron(gain.mu * gamma - np.eye(dim), q2)
    r_tilde_inv = np.kron(gain.mu * gamma, gain.r1)
    return q_tilde, r_tilde_inv


def global_riccati_residual(model: LtiModel, gain: ControllerGain, gamma: np.ndarray) -> float:
    """Frobenius residual of the global Riccati equation at ``I (x) P1``."""
    q_tilde, r_inv = global_weights(gain, gamma)
    dim = gamma.shape[0]
    ab = np.kron(np.eye(dim), model.a)
    bb = np.kron(np.eye(dim), model.b)
    pt = np.kron(np.eye(dim), gain.p1)
    res = pt @ ab + ab.T @ pt + q_tilde - pt @ bb @ r_inv @ bb.T @ pt
    return float(np.linalg.norm(res))


def riccati_feedback(model: LtiModel, gain: ControllerGain, gamma: np.ndarray) -> np.ndarray:
    """``F2 = Rt^{-1} (I (x) B)^T (I (x) P1)`` computed from the global weights."""
    _, r_inv = global_weights(gain, gamma)
    dim = gamma.shape[0]
    return r_inv @ np.kron(np.eye(dim), model.b).T @ np.kron(np.eye(dim), gain.p1)


def edge_feedback(gain: ControllerGain, gamma: np.ndarray) -> np.ndarray:
    """``F2 = mu Gamma (x) K``."""
    return np.kron(gain.mu * gamma, gain.k)


def _phase_normalize(v, tol=1e-12):
    v = np.asarray(v, dtype=complex)
    idx = np.flatnonzero(np.abs(v) > tol * max(1.0, np.max(np.abs(v))))
    if idx.size:
        z = v[idx[0]]
        v = v * (abs(z) / z)
    return v


def _modal_vectors(right, left, normalization):
    eta = _phase_normalize(right / np.linalg.norm(right))
    if normalization is NuNormalization.MODAL:
        c = np.vdot(left, eta)
        if abs(c) < 1e-12:
            raise RepeatedTargetMode("left and right eigenvectors are orthogonal (defective mode)")
        nu = left / np.conj(c)
    else:
        nu = _phase_normalize(left / np.linalg.norm(left))
    return eta, nu


def mode_basis(model: LtiModel, target_modes: Sequence[complex], r1,
               normalization=NuNormalization.MODAL, tol: float = 1e-7) -> ModeBasis:
    """Left/right eigenvectors, ``Lambda``, ``H = B^T W`` and
    ``Rt1 = W^* B R1 B^T W`` for the targeted eigenvalues of ``A``.

    Targets must be simple eigenvalues; complex targets must come with their
    conjugate so that the resulting gain is real.
    """
    normalization = NuNormalization(normalization)
    a = model.a
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))
    w, vl, vr = sla.eig(a, left=True, right=True)
    scale = max(1.0, float(np.max(np.abs(w))))
    targets = [complex(t) for t in target_modes]
    if not targets:
        raise InvalidDesign("at least one target mode is required")

    chosen = []
    for t in targets:
        dist = np.abs(w - t)
        near = np.flatnonzero(dist <= tol * scale)
        if near.size == 0:
            raise InvalidDesign(f"target {t} is not an eigenvalue of A")
        if near.size > 1:
            raise RepeatedTargetMode(f"target {t} is a repeated eigenvalue of A")
        if near[0] in chosen:
            raise RepeatedTargetMode(f"target {t} listed twice")
        chosen.append(int(near[0]))

    vals = w[chosen]
    is_complex = np.abs(vals.imag) > tol * scale
    for i, idx in enumerate(chosen):
        if is_complex[i]:
            partner = [j for j in chosen if abs(w[j] - np.conj(w[idx])) <= tol * scale]
            if not partner:
                raise ComplexGainResidual(
                    f"complex target {targets[i]} selected without its conjugate")

    lams, etas, nus = [], [], []
    for i, idx in enumerate(chosen):
        lam = w[idx]
        if not is_complex[i]:
            eta, nu = _modal_vectors(vr[:, idx], vl[:, idx], normalization)
            lams.append(complex(lam.real, 0.0))
            etas.append(np.real(eta).astype(complex))
            nus.append(np.real(nu).astype(complex))
            continue
        # build from the upper-half-plane member so the pair is exactly conjugate
        up = idx if lam.imag > 0 else next(j for j in chosen if abs(w[j] - np.conj(lam)) <= tol * scale)
        eta, nu = _modal_vectors(vr[:, up], vl[:, up], normalization)
        if lam.imag > 0:
            lams.append(w[up])
            etas.append(eta)
            nus.append(nu)
        else:
            lams.append(np.conj(w[up]))
            etas.append(np.conj(eta))
            nus.append(np.conj(nu))

    lam_diag = np.diag(np.array(lams, dtype=complex))
    wm = np.column_stack(nus)
    right = np.column_stack(etas)
    h = model.b.T @ wm
    r_tilde = h.conj().T @ r1 @ h
    r_tilde = 0.5 * (r_tilde + r_tilde.conj().T)
    if not np.any(is_complex):
        lam_diag, wm, right, h, r_tilde = (np.real(x) for x in (lam_diag, wm, right, h, r_tilde))
    return ModeBasis(lambda_diag=lam_diag, w_matrix=wm, right=right, h_matrix=h, r_tilde=r_tilde)


def _real_or_raise(m, what, tol=1e-9):
    m = np.asarray(m)
    if np.iscomplexobj(m):
        if np.max(np.abs(m.imag), initial=0.0) > tol * max(1.0, np.max(np.abs(m))):
            raise ComplexGainResidual(f"{what} has a non-negligible imaginary part")
        return np.real(m)
    return m


def design_reduced(model: LtiModel, target_modes: Sequence[complex], q1_tilde, r1, mu: float,
                   normalization=NuNormalization.MODAL) -> ControllerGain:
    """Reduced-order design acting only on the targeted modes.

    Solves the ``q x q`` Riccati equation
    ``Pt Lambda + Lambda^* Pt - Pt Rt1 Pt + Qt1 = 0`` and lifts it to
    ``P1 = W Pt W^*``; ``K = R1 B^T P1`` has rank at most ``q``.
    """
    _check_mu(mu)
    basis = mode_basis(model, target_modes, r1, normalization)
    q = basis.q
    q1_tilde = np.eye(q) if q1_tilde is None else np.atleast_2d(np.asarray(q1_tilde))
    if q1_tilde.shape != (q, q):
        raise DimensionMismatch(f"Q1 tilde has shape {q1_tilde.shape}, expected ({q}, {q})")
    _check_weights(q1_tilde, r1, q, model.m)
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))

    sol = solve_care(basis.lambda_diag, basis.h_matrix.conj().T, q1_tilde, r1)
    wm = basis.w_matrix
    p1 = _real_or_raise(wm @ sol.p @ wm.conj().T, "P1")
    q1 = _real_or_raise(wm @ q1_tilde @ wm.conj().T, "Q1")
    p1 = 0.5 * (p1 + p1.T)
    q1 = 0.5 * (q1 + q1.T)
    if not is_detectable(psd_sqrt(q1), model.a):
        raise NotDetectable("(Q1^{1/2}, A) is not detectable for the chosen modes")
    k = r1 @ model.b.T @ p1
    return ControllerGain(k=k, mu=float(mu), mode=DesignMode.REDUCED, p1=p1, q1=q1, r1=r1,
                          order=_gain_rank(k), basis=basis, p_tilde=sol.p)


def _null_vector(m):
    _, s, vh = np.linalg.svd(m)
    return vh[-1].conj()


def design_first_order(model: LtiModel, q1_scalar: float, r1, mu: float,
                       normalization=NuNormalization.MODAL) -> ControllerGain:
    """Rank-one gain ``K = sqrt(q1/r1) R1 B^T nu nu^T`` on the zero mode.

    ``nu`` is the left null vector of ``A``, ``r1 = nu^T B R1 B^T nu``.
    """
    _check_mu(mu)
    if not q1_scalar > 0:
        raise InvalidDesign(f"q1 must be positive, got {q1_scalar!r}")
    a = model.a
    n = model.n
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))
    _check_weights(np.zeros((n, n)), r1, n, model.m)
    normalization = NuNormalization(normalization)

    w = np.linalg.eigvals(a)
    zero_tol = 1e-7 * max(1.0, float(np.linalg.norm(a, 2)))
    n_zero = int(np.sum(np.abs(w) <= zero_tol))
    if n_zero != 1 or matrix_rank(a) != n - 1:
        raise ZeroNotSimple(f"A must have a single zero eigenvalue, found {n_zero}")
    rep = check_assumptions(model)
    if not rep.a1_holds:
        raise AssumptionViolation("assumption A1 fails for the first-order design")

    eta = np.real(_null_vector(a))
    nu = np.real(_null_vector(a.T))
    eta, nu = _modal_vectors(eta, nu, normalization)
    eta, nu = np.real(eta), np.real(nu)

    bnu = model.b.T @ nu
    r1s = float(bnu @ r1 @ bnu)
    if r1s <= 1e-12 * float(nu @ nu) * max(1.0, np.linalg.norm(model.b) ** 2 * np.linalg.norm(r1)):
        raise UncontrollableZeroMode("B cannot actuate the zero mode (nu^T B R1 B^T nu = 0)")

    q1 = q1_scalar * np.outer(nu, nu)
    if not is_detectable(psd_sqrt(q1), a):
        raise NotDetectable("(Q1^{1/2}, A) is not detectable: A has other marginal modes")
    p_t = np.sqrt(q1_scalar / r1s)
    p1 = p_t * np.outer(nu, nu)
    k = p_t * (r1 @ model.b.T @ np.outer(nu, nu))
    basis = ModeBasis(lambda_diag=np.zeros((1, 1)), w_matrix=nu[:, None], right=eta[:, None],
                      h_matrix=bnu[:, None], r_tilde=np.array([[r1s]]))
    return ControllerGain(k=k, mu=float(mu), mode=DesignMode.FIRST_ORDER, p1=p1, q1=q1, r1=r1,
                          order=_gain_rank(k), basis=basis, p_tilde=np.array([[p_t]]),
                          q1_scalar=float(q1_scalar))


def design(model: LtiModel, spec: LaplacianSpectrum, ds: DesignSpec) -> ControllerGain:
    """Dispatch on ``ds.mode``."""
    if ds.mode is DesignMode.GLOBAL:
        return design_global(model, spec, ds.q1, ds.r1, ds.mu)
    if ds.mode is DesignMode.LOCAL:
        return design_local(model, ds.q1, ds.r1, ds.mu)
    if ds.mode is DesignMode.REDUCED:
        return design_reduced(model, ds.target_modes, ds.q1, ds.r1, ds.mu, ds.nu_normalization)
    return design_first_order(model, ds.q1_scalar, ds.r1, ds.mu, ds.nu_normalization)


def closed_loop_matrix(laplacian, model: LtiModel, gain: ControllerGain) -> np.ndarray:
    """``I_N (x) A - mu L (x) B K``."""
    lap = np.asarray(laplacian)
    return (np.kron(np.eye(lap.shape[0]), model.a)
            - gain.mu * np.kron(lap, model.b @ gain.k))


def edge_closed_loop(gamma, model: LtiModel, gain: ControllerGain) -> np.ndarray:
    """Closed loop of the reduced edge system, ``I (x) A - mu Gamma (x) B K``."""
    gamma = np.asarray(gamma)
    return (np.kron(np.eye(gamma.shape[0]), model.a)
            - gain.mu * np.kron(gamma, model.b @ gain.k))


def spectrum_distance(a, b) -> float:
    """Largest gap between two eigenvalue multisets under optimal pairing."""
    a = np.ravel(np.asarray(a, dtype=complex))
    b = np.ravel(np.asarray(b, dtype=complex))
    if a.size != b.size:
        raise DimensionMismatch(f"multisets of sizes {a.size} and {b.size}")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols]))


def _residual_modes(model: LtiModel, basis: ModeBasis) -> np.ndarray:
    """``sigma(A)`` with one copy of each targeted eigenvalue removed."""
    remaining = list(np.linalg.eigvals(model.a).astype(complex))
    for lam in np.diag(basis.lambda_diag):
        j = int(np.argmin([abs(r - lam) for r in remaining]))
        remaining.pop(j)
    return np.array(remaining, dtype=complex)


def slowest_nonzero_rate(values, tol: float = 1e-9) -> float:
    """Smallest nonzero ``-Re`` among ``values`` (``inf`` if none)."""
    re = -np.real(np.asarray(values, dtype=complex))
    re = re[np.abs(re) > tol]
    return float(np.min(re)) if re.size else float("inf")


def predicted_spectrum(gain: ControllerGain, spec: LaplacianSpectrum, model: LtiModel,
                       laplacian=None) -> SpectrumReport:
    """Closed-loop eigenvalues from the Laplacian spectrum.

    For reduced and first-order gains the multiset is the union of
    ``sigma(Xi_gamma)``, ``Xi_gamma = Lambda - mu gamma Rt1 Pt``, over
    ``gamma in sigma(L)`` plus every untargeted eigenvalue of ``A`` repeated
    ``N`` times (``N - 1`` times in the edge spectrum).  Full-order gains get
    ``sigma(A - mu gamma B K)`` per ``gamma`` instead (``method="numerical"``).

    Passing ``laplacian`` also fills the directly computed spectrum of
    ``I (x) A - mu L (x) B K`` and the pairing mismatch.
    """
    gammas = np.asarray(spec.eigenvalues)
    n_nodes = gammas.size
    mu = gain.mu
    per_gamma = []
    speed_formula = None
    if gain.basis is not None and gain.p_tilde is not None:
        method = "closed_form"
        basis = gain.basis
        coupling = basis.r_tilde @ gain.p_tilde
        for g in gammas:
            xi = basis.lambda_diag - mu * g * coupling
            per_gamma.append(np.linalg.eigvals(np.atleast_2d(xi)))
        resid = _residual_modes(model, basis)
        mas = np.concatenate(per_gamma + [np.tile(resid, n_nodes)])
        edge = np.concatenate(per_gamma[1:] + [np.tile(resid, n_nodes - 1)])
        if gain.mode is DesignMode.FIRST_ORDER:
            root = np.sqrt(gain.q1_scalar * basis.r1_scalar)
            speed_formula = min(mu * root * spec.lambda_min, slowest_nonzero_rate(resid))
    else:
        method = "numerical"
        bk = model.b @ gain.k
        for g in gammas:
            per_gamma.append(np.linalg.eigvals(model.a - mu * g * bk))
        mas = np.concatenate(per_gamma)
        edge = np.concatenate(per_gamma[1:])
    mas = sort_eigenvalues(mas)
    edge = sort_eigenvalues(edge)
    speed = float(np.min(-edge.real)) if edge.size else float("inf")

    computed = mismatch = None
    if laplacian is not None:
        computed = eig(closed_loop_matrix(laplacian, model, gain))
        mismatch = spectrum_distance(mas, computed)
    return SpectrumReport(method=method, mas_predicted=mas, edge_predicted=edge,
                          consensus_speed=speed, speed_formula=speed_formula,
                          mas_computed=computed, max_mismatch=mismatch)


def optimal_cost(p1, z2_initial) -> float:
    """``sum_i z2_i(0)^T P1 z2_i(0)`` over the ``N - 1`` blocks of ``z2(0)``."""
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    n = p1.shape[0]
    z = np.asarray(z2_initial, dtype=float).ravel()
    if z.size % n:
        raise DimensionMismatch(f"z2(0) of length {z.size} is not a multiple of n = {n}")
    blocks = z.reshape(-1, n)
    return float(np.einsum("ij,jk,ik->", blocks, p1, blocks))
