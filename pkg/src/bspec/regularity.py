"""Regularity determinants and the classification of boundary conditions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .model import BoundaryConditionSet

TOL_THETA = 1e-8
TOL_ROOT = 1e-8

STRONGLY_REGULAR = "strongly-regular"
REGULAR = "regular"
HALF_REGULAR_ONLY = "half-regular-only"
IRREGULAR = "irregular"


def unity_root(n: int, j: int) -> complex:
    """``exp(2 pi i j / n)``, exact on the axes."""
    if not 0 <= j < n:
        raise ValueError(f"root index {j} out of range for n = {n}")
    # exact values at multiples of quarter turns keep 1, i, -1, -i round-off free
    if (4 * j) % n == 0:
        return (1, 1j, -1, -1j)[(4 * j) // n]
    return complex(np.exp(2j * np.pi * j / n))


def unity_roots(n: int) -> np.ndarray:
    return np.array([unity_root(n, j) for j in range(n)])


def power_table(n: int) -> np.ndarray:
    """``V[j, k] = eps_k ** j`` with exponents reduced mod n."""
    eps = unity_roots(n)
    idx = (np.arange(n)[:, None] * np.arange(n)[None, :]) % n
    return eps[idx]


def build_B_column(bc: BoundaryConditionSet, superscript: int, k: int) -> np.ndarray:
    """Stack ``b_j^i * eps_k^j`` over the blocks ``j = 0..n-1``."""
    n = bc.n
    if not 0 <= k < n:
        raise ValueError(f"column index {k} out of range for n = {n}")
    if superscript not in (0, 1):
        raise ValueError("superscript must be 0 or 1")
    V = power_table(n)
    return bc.leading_b(superscript) * V[bc.row_orders, k]


def B_matrix(bc: BoundaryConditionSet, superscript: int) -> np.ndarray:
    """``Q^i``: all columns ``B_k^i``, k = 0..n-1."""
    V = power_table(bc.n)
    return bc.leading_b(superscript)[:, None] * V[bc.row_orders, :]


@dataclass(frozen=True)
class ThetaMatrix:
    entries: np.ndarray
    column_labels: tuple[tuple[int, int], ...]


def theta_matrix(bc: BoundaryConditionSet, p: int, swapped: bool = False) -> ThetaMatrix:
    n = bc.n
    if not 0 <= p <= n:
        raise ValueError(f"p = {p} outside 0..{n}")
    first, second = (1, 0) if swapped else (0, 1)
    Q = {0: B_matrix(bc, 0), 1: B_matrix(bc, 1)}
    labels = tuple((k, first if k < p else second) for k in range(n))
    cols = [Q[s][:, k] for k, s in labels]
    return ThetaMatrix(np.column_stack(cols) if cols else np.zeros((0, 0)), labels)


def theta(bc: BoundaryConditionSet, p: int, swapped: bool = False) -> tuple[complex, ThetaMatrix]:
    """``Theta_p(b0, b1)`` (or ``Theta_p(b1, b0)`` when swapped) and its matrix."""
    tm = theta_matrix(bc, p, swapped)
    if tm.entries.shape[0] != tm.entries.shape[1]:
        return 0j, tm
    return complex(la.det(tm.entries)), tm


def normalized_margin(value: complex, matrix: np.ndarray) -> float:
    """``|det|`` divided by the product of the column norms (Hadamard ratio)."""
    norms = np.linalg.norm(matrix, axis=0)
    denom = float(np.prod(norms))
    if denom == 0.0 or not np.isfinite(denom):
        return 0.0
    return float(abs(value) / denom)


def _F_matrix(bc, s):
    n = bc.n
    q = n // 2
    Q0, Q1 = B_matrix(bc, 0), B_matrix(bc, 1)
    cols = []
    for k in range(n):
        if k == 0:
            cols.append(Q0[:, 0] + s * Q1[:, 0])
        elif k < q:
            cols.append(Q0[:, k])
        elif k == q:
            cols.append(Q1[:, q] + s * Q0[:, q])
        else:
            cols.append(Q1[:, k])
    return np.column_stack(cols)


@dataclass(frozen=True)
class StrongRegularityPolynomial:
    """``F(s) = c2 s^2 + c1 s + c0`` with its roots."""

    c2: complex
    c1: complex
    c0: complex
    roots: tuple[complex, ...]
    simple: tuple[bool, ...]

    def __call__(self, s):
        return self.c2 * s * s + self.c1 * s + self.c0

    @property
    def two_simple_roots(self) -> bool:
        return len(self.roots) == 2 and all(self.simple)


def strong_regularity_polynomial(bc: BoundaryConditionSet) -> StrongRegularityPolynomial:
    n = bc.n
    if n % 2:
        raise ValueError("strong regularity polynomial defined only for even n")
    if sum(bc.ranks) != n:
        raise ValueError("condition set does not have n rows")
    f0, f1, fm1 = (complex(la.det(_F_matrix(bc, s))) for s in (0.0, 1.0, -1.0))
    # exact interpolation at s = 0, 1, -1
    c0 = f0
    c1 = (f1 - fm1) / 2
    c2 = (f1 + fm1) / 2 - f0
    scale = max(abs(c0), abs(c1), abs(c2))
    if scale == 0:
        raise ValueError("identically zero F")
    tiny = 1e-14 * scale
    c2_ = c2 if abs(c2) > tiny else 0j
    c1_ = c1 if abs(c1) > tiny else 0j
    if c2_ == 0:
        roots = (-c0 / c1_,) if c1_ != 0 else ()
        return StrongRegularityPolynomial(c2, c1, c0, roots, tuple(False for _ in roots))
    disc = c1 * c1 - 4 * c2 * c0
    if abs(disc) <= 1e-12 * (abs(c1) ** 2 + 4 * abs(c2 * c0)):
        disc = 0j
    sq = np.sqrt(complex(disc))
    # stable quadratic formula
    w = -c1 - sq if abs(-c1 - sq) >= abs(-c1 + sq) else -c1 + sq
    if w == 0:
        r1 = r2 = 0j
    else:
        r1 = w / (2 * c2)
        r2 = 2 * c0 / w
    tol = TOL_ROOT * (1 + max(abs(r1), abs(r2)))
    distinct = abs(r1 - r2) > tol
    return StrongRegularityPolynomial(c2, c1, c0, (complex(r1), complex(r2)), (distinct, distinct))


@dataclass
class RegularityReport:
    n: int
    q: int
    theta_forward: complex
    theta_swapped: complex
    theta_by_p: dict[int, complex]
    margin_forward: float
    margin_swapped: float
    F_coefficients: tuple[complex, complex, complex] | None
    F_roots: tuple[complex, ...]
    F_simple: tuple[bool, ...]
    classification: str
    regular: bool
    half_regular: bool
    notes: list[str] = field(default_factory=list)

    @property
    def normalized_margins(self) -> dict[str, float]:
        return {"forward": self.margin_forward, "swapped": self.margin_swapped}


def classify(bc: BoundaryConditionSet, tol_theta: float = TOL_THETA) -> RegularityReport:
    """Birkhoff-regularity verdict for normalized conditions.

    Only the leading blocks matter; lower-order tails are ignored.
    """
    n = bc.n
    q = n // 2
    fwd, fwd_m = theta(bc, q)
    swp, swp_m = theta(bc, q, swapped=True)
    m_fwd = normalized_margin(fwd, fwd_m.entries)
    m_swp = normalized_margin(swp, swp_m.entries)
    by_p = {p: theta(bc, p)[0] for p in range(n + 1)}
    notes = []
    F_coeffs, roots, simple = None, (), ()
    if n % 2 == 0:
        regular = m_fwd > tol_theta
        half = regular
        try:
            F = strong_regularity_polynomial(bc)
            F_coeffs, roots, simple = (F.c2, F.c1, F.c0), F.roots, F.simple
            strong = F.two_simple_roots
        except ValueError as exc:
            notes.append(str(exc))
            strong = False
        if not regular:
            label = IRREGULAR
        else:
            label = STRONGLY_REGULAR if strong else REGULAR
    else:
        ok_fwd, ok_swp = m_fwd > tol_theta, m_swp > tol_theta
        regular = ok_fwd and ok_swp
        half = ok_fwd
        if regular:
            label = STRONGLY_REGULAR
        elif ok_fwd or ok_swp:
            label = HALF_REGULAR_ONLY
            if not ok_fwd:
                notes.append("only Theta(b1, b0) is nonzero")
        else:
            label = IRREGULAR
    return RegularityReport(
        n, q, fwd, swp, by_p, m_fwd, m_swp, F_coeffs, roots, simple, label, regular, half, notes
    )


def fourier_factor_residual(bc: BoundaryConditionSet) -> float:
    """Max deviation of ``(1/n) (Q^0 Psi^*, Q^1 Psi^*)`` from the block matrix of leading coefficients."""
    n = bc.n
    Psi = power_table(n)  # symmetric: eps_j^k = eps_k^j
    lhs = np.hstack([B_matrix(bc, 0) @ Psi.conj().T, B_matrix(bc, 1) @ Psi.conj().T]) / n
    return float(np.max(np.abs(lhs - bc.matrix(with_tails=False)))) if lhs.size else 0.0


def shift_constant(bc: BoundaryConditionSet) -> complex:
    """For odd ``n``: ``Theta_{q+1}(b0, b1) / Theta_q(b1, b0)``, unimodular when both vanish or not.

    Rotating the column index by ``q+1`` maps one determinant onto the other,
    so the ratio is a product of roots of unity times a permutation sign.
    """
    n = bc.n
    if n % 2 == 0:
        raise ValueError("defined for odd n")
    q = n // 2
    return theta(bc, q + 1)[0] / theta(bc, q, swapped=True)[0]
