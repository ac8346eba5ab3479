"""Lagrange boundary form, dissipativity verdicts and random condition samplers."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
import scipy.linalg as la

from .model import BoundaryConditionSet, DegenerateConditionsError, normalize_conditions
from .quadrature import composite_gauss

TOL_VERDICT = 1e-10
SELF_ADJOINT = "self-adjoint"
DISSIPATIVE = "dissipative"
NOT_DISSIPATIVE = "not-dissipative"
MAX_RESAMPLE = 10


@dataclass(frozen=True)
class LagrangeForm:
    """``Im <D^n u, u> = Y^* H Y`` over ``Y = (D^k u(0))_k ++ (D^k u(1))_k``."""

    n: int
    H: np.ndarray

    def __call__(self, Y) -> float:
        Y = np.asarray(Y)
        return float(np.real(np.conj(Y) @ self.H @ Y))


def lagrange_form(n: int) -> LagrangeForm:
    if n < 1:
        raise ValueError("n must be positive")
    J = np.fliplr(np.eye(n))
    H = 0.5 * la.block_diag(J, -J).astype(complex)
    H.setflags(write=False)
    return LagrangeForm(n, H)


def _poly_D(coef, k):
    """Coefficients (ascending) of ``D^k u = (-i)^k u^(k)``."""
    return (-1j) ** k * np.polynomial.polynomial.polyder(coef, k) if k else np.asarray(coef, dtype=complex)


def boundary_vector(coef, n) -> np.ndarray:
    """``Y(u)`` for the polynomial with ascending coefficients ``coef``."""
    P = np.polynomial.polynomial.polyval
    return np.array([P(e, _poly_D(coef, k)) for e in (0.0, 1.0) for k in range(n)], dtype=complex)


def form_by_quadrature(coef, n) -> float:
    """``Im <D^n u, u>`` by Gauss-Legendre quadrature."""
    x, w = composite_gauss(0.0, 1.0, 4)
    P = np.polynomial.polynomial.polyval
    u = P(x, np.asarray(coef, dtype=complex))
    dnu = P(x, _poly_D(coef, n))
    return float(np.imag(np.sum(w * dnu * np.conj(u))))


def lagrange_residual(n: int, trials: int = 20, seed: int = 0) -> float:
    """Largest ``|Im <D^n u,u> - Y^* H Y|`` over random polynomials of degree <= n + 3."""
    rng = np.random.default_rng(seed)
    form = lagrange_form(n)
    worst = 0.0
    for _ in range(trials):
        deg = int(rng.integers(0, n + 4))
        # damp high coefficients so that derivatives stay O(1)
        coef = (rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)) / np.array(
            [factorial(k) for k in range(deg + 1)], dtype=float) ** 0.5
        worst = max(worst, abs(form_by_quadrature(coef, n) - form(boundary_vector(coef, n))))
    return worst


@dataclass
class DissipativityReport:
    verdict: str
    restricted_eigenvalues: np.ndarray
    margin: float
    anti_dissipative: bool
    warnings: list[str] = field(default_factory=list)


def dissipativity_test(bc: BoundaryConditionSet, tol: float = TOL_VERDICT, essential: bool = False) -> DissipativityReport:
    """Restrict the Lagrange form of ``D^n`` to the kernel of the boundary map.

    ``dissipative`` means ``Im <D^n u, u> >= 0`` on the domain. Lower-order
    tails are part of the domain; ``essential=True`` drops them.
    """
    n = bc.n
    warnings = []
    if essential and bc.has_tails:
        warnings.append("lower-order tails ignored: only the leading blocks are tested")
    U = bc.matrix(with_tails=not essential)
    if U.shape[0] != n or np.linalg.matrix_rank(U) < n:
        raise DegenerateConditionsError("boundary map is rank-deficient")
    K = la.null_space(U)
    M = K.conj().T @ lagrange_form(n).H @ K
    ev = la.eigvalsh(0.5 * (M + M.conj().T))
    if np.all(np.abs(ev) <= tol):
        verdict = SELF_ADJOINT
    elif ev[0] >= -tol:
        verdict = DISSIPATIVE
    else:
        verdict = NOT_DISSIPATIVE
    return DissipativityReport(verdict, ev, float(ev[0]), bool(ev[-1] <= tol), warnings)


# ---------------------------------------------------------------------------
# samplers


def _congruence(n):
    """``E`` with ``H = E^* diag(I_n, -I_n) E``."""
    lam, Q = la.eigh(lagrange_form(n).H)
    order = np.argsort(-lam, kind="stable")
    lam, Q = lam[order], Q[:, order]
    return np.sqrt(np.abs(lam))[:, None] * Q.conj().T


def haar_unitary(n, rng) -> np.ndarray:
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))[None, :]


def conditions_from_contraction(C) -> BoundaryConditionSet:
    """Normalized conditions whose domain is ``E^{-1} {(xi, C xi)}``."""
    C = np.asarray(C, dtype=complex)
    n = C.shape[0]
    E = _congruence(n)
    basis = la.solve(E, np.vstack([np.eye(n), C]))
    U = la.null_space(basis.T).T
    return normalize_conditions(U, n)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_dissipative_bc(n: int, seed, sigma: float | None = None, *, unitary: bool = False):
    """Random dissipative conditions from a contraction ``C`` with ``||C|| = sigma``.

    ``sigma`` defaults to a uniform draw from [0, 1]. Returns ``(bc, sigma)``.
    """
    rng = _rng(seed)
    last = None
    for _ in range(MAX_RESAMPLE):
        s = float(rng.uniform()) if sigma is None else float(sigma)
        if not 0.0 <= s <= 1.0:
            raise ValueError("contraction scale must lie in [0, 1]")
        if unitary:
            C, s = haar_unitary(n, rng), 1.0
        else:
            G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            C = s * G / np.linalg.norm(G, 2)
        try:
            bc = conditions_from_contraction(C)
        except DegenerateConditionsError as exc:
            last = exc
            continue
        rep = dissipativity_test(bc)
        ok = rep.verdict == SELF_ADJOINT if unitary else rep.verdict in (DISSIPATIVE, SELF_ADJOINT)
        if ok:
            return bc, s
        last = RuntimeError(f"sample failed verification: {rep.verdict}")
    raise DegenerateConditionsError(f"sampler gave up after {MAX_RESAMPLE} attempts: {last}")


def sample_selfadjoint_bc(n: int, seed) -> BoundaryConditionSet:
    if n < 2:
        raise ValueError("n must be at least 2")
    return sample_dissipative_bc(n, seed, unitary=True)[0]


def task_seed(seed: int, n: int, index: int) -> np.random.SeedSequence:
    """Per-sample seed, independent of scheduling order."""
    return np.random.SeedSequence([int(seed), int(n), int(index)])
