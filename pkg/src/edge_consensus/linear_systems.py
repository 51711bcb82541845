"""State-space agent models, assumption checks and the CARE solver.

The Riccati equation is written in the form used throughout the package::

    P A + A^* P + Q - P B R B^* P = 0,      gain = R B^* P

i.e. ``R`` is the weight that multiplies ``B B^*`` directly (the inverse of
the usual LQR input weight).  Complex Hermitian data is accepted so the same
solver serves the modal (reduced-order) Riccati equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceFailure, DimensionMismatch, NotDetectable, NotStabilizable

log = logging.getLogger(__name__)

RANK_TOL = 1e-9


@dataclass(frozen=True)
class LtiModel:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.asarray(self.b, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"A must be square, got {a.shape}")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise DimensionMismatch(f"B has shape {b.shape}, expected ({a.shape[0]}, m)")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True)
class AssumptionReport:
    a1_holds: bool
    a2_holds: bool
    spectrum_of_a: np.ndarray
    imaginary_axis_eigs: np.ndarray

    def to_dict(self) -> dict:
        return {
            "a1_holds": self.a1_holds,
            "a2_holds": self.a2_holds,
            "spectrum_of_a": complex_list(self.spectrum_of_a),
            "imaginary_axis_eigs": complex_list(self.imaginary_axis_eigs),
        }


@dataclass(frozen=True)
class RiccatiSolution:
    p: np.ndarray
    residual_norm: float
    gain: np.ndarray


def complex_list(values) -> list:
    """Serialize complex numbers as ``[re, im]`` pairs."""
    return [[float(np.real(v)), float(np.imag(v))] for v in np.ravel(values)]


def sort_eigenvalues(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    return values[np.lexsort((values.imag, values.real))]


def eig(matrix, vectors: bool = False):
    """Eigenvalues ordered by real part, then imaginary part.

    With ``vectors=True`` the matching right eigenvectors are returned as the
    columns of a second array.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"eig needs a square matrix, got shape {m.shape}")
    if vectors:
        w, v = np.linalg.eig(m)
        w = np.asarray(w, dtype=complex)
        order = np.lexsort((w.imag, w.real))
        return w[order], v[:, order]
    w = np.linalg.eigvals(m)
    return sort_eigenvalues(w)


def matrix_rank(m, tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s >= tol * s[0]))


def controllability_matrix(a, b) -> np.ndarray:
    a = np.asarray(a)
    blocks = [np.asarray(b)]
    for _ in range(a.shape[0] - 1):
        blocks.append(a @ blocks[-1])
    return np.hstack(blocks)


def check_assumptions(model: LtiModel, tol: float = 1e-9) -> AssumptionReport:
    """Evaluate A1 (spectrum in the closed left half plane, touching the
    imaginary axis) and A2 (controllability)."""
    spec = eig(model.a)
    re = spec.real
    on_axis = spec[np.abs(re) <= tol]
    a1 = bool(np.max(re) <= tol and on_axis.size > 0)
    a2 = matrix_rank(controllability_matrix(model.a, model.b), tol) == model.n
    return AssumptionReport(a1, a2, spec, on_axis)


def psd_sqrt(q) -> np.ndarray:
    """Hermitian square root of a PSD matrix (negative rounding clipped)."""
    q = np.asarray(q)
    w, v = np.linalg.eigh(0.5 * (q + q.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _non_stable_eigs(a, tol):
    w = np.linalg.eigvals(a)
    return w[w.real >= -tol]


def is_stabilizable(a, b, tol: float = RANK_TOL) -> bool:
    """PBH test: ``[A - lambda I, B]`` has full row rank at every
    eigenvalue with nonnegative real part."""
    a = np.asarray(a)
    n = a.shape[0]
    eye = np.eye(n)
    return all(matrix_rank(np.hstack([a - lam * eye, b]), tol) == n
               for lam in _non_stable_eigs(a, tol))


def is_detectable(c, a, tol: float = RANK_TOL) -> bool:
    """PBH test: ``[A - lambda I; C]`` has full column rank at every
    eigenvalue with nonnegative real part."""
    a = np.asarray(a)
    n = a.shape[0]
    eye = np.eye(n)
    return all(matrix_rank(np.vstack([a - lam * eye, c]), tol) == n
               for lam in _non_stable_eigs(a, tol))


def care_residual(a, b, q, r, p) -> np.ndarray:
    ah = a.conj().T
    g = b @ r @ b.conj().T
    return p @ a + ah @ p + q - p @ g @ p


def _hermitian(p):
    return 0.5 * (p + p.conj().T)


def solve_care(a, b, q, r, tol: float | None = None,
               max_refinements: int = 5) -> RiccatiSolution:
    """Stabilizing solution of ``P A + A^* P + Q - P B R B^* P = 0``.

    The solution is read off the stable invariant subspace of the Hamiltonian
    ``[[A, -B R B^*], [-Q, -A^*]]`` (ordered Schur form) and then polished by
    Newton steps on the Lyapunov equation of the closed loop.

    Parameters
    ----------
    a, b : array_like
        System pair; may be complex.
    q : array_like
        Hermitian PSD state weight.
    r : array_like
        Hermitian PD weight multiplying ``B B^*``.
    tol : float, optional
        Residual bound in Frobenius norm.  By default the bound is relative:
        ``1e-9 * max(1, ||Q|| + 2 ||P|| ||A|| + ||P||^2 ||B R B^*||)``, the
        size of the terms whose cancellation the residual measures.

    Raises
    ------
    NotStabilizable, NotDetectable
        From the PBH tests on ``(A, B)`` and ``(Q^{1/2}, A)``.
    ConvergenceFailure
        If the polished residual stays above ``tol``.
    """
    a = np.atleast_2d(np.asarray(a))
    b = np.asarray(b)
    if b.ndim == 1:
        b = b[:, None]
    q = np.atleast_2d(np.asarray(q))
    r = np.atleast_2d(np.asarray(r))
    n = a.shape[0]
    if a.shape != (n, n) or b.shape[0] != n or q.shape != (n, n) or r.shape != (b.shape[1],) * 2:
        raise DimensionMismatch(
            f"incompatible CARE data A{a.shape} B{b.shape} Q{q.shape} R{r.shape}")
    cplx = any(np.iscomplexobj(x) for x in (a, b, q, r))
    dtype = complex if cplx else float
    a, b, q, r = (np.asarray(x, dtype=dtype) for x in (a, b, q, r))
    q = _hermitian(q)
    r = _hermitian(r)
    rel_tol = tol is None

    if not is_stabilizable(a, b):
        raise NotStabilizable("(A, B) is not stabilizable")
    if not is_detectable(psd_sqrt(q), a):
        raise NotDetectable("(Q^{1/2}, A) is not detectable")

    g = b @ r @ b.conj().T
    ham = np.block([[a, -g], [-q, -a.conj().T]])
    t, z, sdim = sla.schur(ham, output="complex" if cplx else "real", sort="lhp")
    if sdim != n:
        raise ConvergenceFailure(
            f"Hamiltonian has {sdim} stable eigenvalues, expected {n}")
    x1, x2 = z[:n, :n], z[n:, :n]
    p = _hermitian(np.linalg.solve(x1.conj().T, x2.conj().T).conj().T)
    res = float(np.linalg.norm(care_residual(a, b, q, r, p)))
    if rel_tol:
        pn = float(np.linalg.norm(p))
        tol = 1e-9 * max(1.0, float(np.linalg.norm(q)) + 2 * pn * float(np.linalg.norm(a))
                         + pn ** 2 * float(np.linalg.norm(g)))

    for _ in range(max_refinements):
        if res < tol * 1e-3:
            break
        acl = a - g @ p
        cand = sla.solve_continuous_lyapunov(acl.conj().T, -(q + p @ g @ p))
        cand = _hermitian(cand)
        cres = float(np.linalg.norm(care_residual(a, b, q, r, cand)))
        if not cres < res:
            break
        p, res = cand, cres

    if not res < tol:
        raise ConvergenceFailure(f"CARE residual {res:.3e} above tolerance {tol:.3e}", res)
    if not cplx:
        p = np.real(p)
    gain = r @ b.conj().T @ p
    closed = np.linalg.eigvals(a - b @ gain)
    if closed.size and np.max(closed.real) >= 0:
        raise ConvergenceFailure("CARE solution is not stabilizing", res)
    log.debug("CARE solved: n=%d residual=%.3e", n, res)
    return RiccatiSolution(p=p, residual_norm=res, gain=gain)
