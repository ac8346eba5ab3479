"""Characteristic determinant, characteristic matrix and the Green's function.

Conventions
-----------
Rows of the characteristic matrix ``Delta(rho)`` follow the condition rows of a
normalized set (ascending leading order), columns follow ``z_0..z_{n-1}``.

``CharMatrix.entries`` has column ``t`` equal to the solution of
``Delta A_t = +-(eps_t / 2 pi) [B_t^#]``; in the double-index notation
``a_tk = entries[k, t]`` and the Green's function reads

    G = g0 + (-2 pi i / (n rho^{n-1})) sum_{t,k} a_tk z_k(x) u_t(xi).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

from .model import BoundaryConditionSet, DifferentialExpression
from .quadrature import composite_gauss
from .regularity import theta_matrix, unity_roots
from .spectral import DecayProfile, FundamentalSystem, SpectralPoint, spectral_point

NEAR_EIGENVALUE_TOL = 1e-8


class NearEigenvalueError(ArithmeticError):
    pass


class IrregularLimitError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# characteristic determinant


@dataclass
class CharacteristicData:
    rho: complex
    p: int
    delta_matrix: np.ndarray
    delta_value: complex
    limit_matrix: np.ndarray
    deviation: float
    row_scale: float
    column_scale: float
    scale: float
    bracket_B1: np.ndarray
    bracket_B0: np.ndarray

    @property
    def relative_delta(self) -> float:
        """``|Delta|`` against the cancellation-free bound ``scale``."""
        return abs(self.delta_value) / self.scale if self.scale else 0.0


def _row_powers(bc: BoundaryConditionSet, rho: complex) -> np.ndarray:
    """``R[r, m] = rho^{m - j_r}`` for ``m <= j_r`` and 0 above."""
    n = bc.n
    j = bc.row_orders
    m = np.arange(n)
    expo = m[None, :] - j[:, None]
    R = np.zeros(expo.shape, dtype=complex)
    mask = expo <= 0
    R[mask] = rho ** expo[mask].astype(float)
    R[expo == 0] = 1.0
    return R


def boundary_forms(bc: BoundaryConditionSet, rho: complex):
    """Per-row weights of ``rho^{m-j} D^m y(0)`` and ``rho^{m-j} D^m y(1)``."""
    C0, C1 = bc.coefficient_arrays(with_tails=True)
    R = _row_powers(bc, rho)
    return R * C0, R * C1


def characteristic_data(bc: BoundaryConditionSet, fss: FundamentalSystem) -> CharacteristicData:
    if bc.n != fss.n:
        raise ValueError("order mismatch between conditions and fundamental system")
    W0, W1 = boundary_forms(bc, fss.rho)
    S0 = fss.scaled(0.0)
    S1 = fss.scaled(1.0)
    bb0 = W0 @ S0  # [B_t^0] columns
    bb1 = W1 @ S1  # [B_t^1] columns
    e0 = fss.z_phase(0.0)
    e1 = fss.z_phase(1.0)
    delta = bb0 * e0[None, :] + bb1 * e1[None, :]
    theta_p = theta_matrix(bc, fss.p).entries
    row_scale = float(np.prod(np.linalg.norm(delta, axis=1)))
    return CharacteristicData(
        rho=fss.rho,
        p=fss.p,
        delta_matrix=delta,
        delta_value=complex(la.det(delta)),
        limit_matrix=theta_p,
        deviation=float(np.max(np.abs(delta - theta_p))),
        row_scale=row_scale,
        column_scale=float(np.prod(np.linalg.norm(delta, axis=0))),
        # Hadamard bound before the two boundary contributions are added,
        # so it does not collapse when every column cancels at an eigenvalue
        scale=float(np.prod(np.linalg.norm(bb0, axis=0) * np.abs(e0) + np.linalg.norm(bb1, axis=0) * np.abs(e1))),
        bracket_B1=bb1,
        bracket_B0=bb0,
    )


def delta_matrix(bc, expr, sp: SpectralPoint, profile: DecayProfile | None = None, **fss_kwargs) -> CharacteristicData:
    """Characteristic data at a spectral point (rows scaled by ``rho^{-j}``)."""
    p = None if profile is None else profile.p
    fss = FundamentalSystem(expr, sp.rho, p, **fss_kwargs)
    return characteristic_data(bc, fss)


def characteristic_determinant(bc, expr, rho, p=None, reference_rho=None) -> complex:
    """``Delta(rho)`` with a fixed column split ``p``; analytic in rho for fixed p."""
    fss = FundamentalSystem(expr, rho, p, reference_rho=reference_rho)
    return characteristic_data(bc, fss).delta_value


# ---------------------------------------------------------------------------
# characteristic matrix


def _split_factors(n, p):
    """Diagonal of ``D``: ``+eps_t/2pi`` for t < p, ``-eps_t/2pi`` otherwise."""
    eps = unity_roots(n)
    sign = np.where(np.arange(n) < p, 1.0, -1.0)
    return sign * eps / (2 * np.pi)


def _solve_refined(M, rhs):
    lu = la.lu_factor(M, check_finite=False)
    X = la.lu_solve(lu, rhs)
    X = X + la.lu_solve(lu, rhs - M @ X)
    res = np.linalg.norm(M @ X - rhs, axis=0)
    return X, res


@dataclass
class CharMatrix:
    entries: np.ndarray
    residuals: np.ndarray
    conditioning: float
    rhs: np.ndarray
    data: CharacteristicData

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    def a(self, t, k) -> complex:
        return complex(self.entries[k, t])


def _check_not_eigenvalue(data: CharacteristicData, tol=NEAR_EIGENVALUE_TOL):
    if not abs(data.delta_value) >= tol * data.scale:
        raise NearEigenvalueError(
            f"near-eigenvalue: characteristic matrix unstable (relative |Delta| = {data.relative_delta:.2e})"
        )


def char_matrix_from_data(data: CharacteristicData, tol=NEAR_EIGENVALUE_TOL) -> CharMatrix:
    _check_not_eigenvalue(data, tol)
    n = data.delta_matrix.shape[0]
    d = _split_factors(n, data.p)
    sharp = np.where(np.arange(n)[None, :] < data.p, data.bracket_B1, data.bracket_B0)
    rhs = sharp * d[None, :]
    X, res = _solve_refined(data.delta_matrix, rhs)
    return CharMatrix(X, res, float(np.linalg.cond(data.delta_matrix)), rhs, data)


def char_matrix(bc, expr, sp: SpectralPoint, profile: DecayProfile | None = None, **fss_kwargs) -> CharMatrix:
    """The characteristic matrix ``A(rho)`` by one LU solve per column."""
    return char_matrix_from_data(delta_matrix(bc, expr, sp, profile, **fss_kwargs))


def char_matrix_cramer(data: CharacteristicData) -> np.ndarray:
    """Column-replacement determinant ratios; same matrix as :func:`char_matrix_from_data`."""
    _check_not_eigenvalue(data)
    n = data.delta_matrix.shape[0]
    d = _split_factors(n, data.p)
    out = np.empty((n, n), dtype=complex)
    for t in range(n):
        vec = (data.bracket_B1 if t < data.p else data.bracket_B0)[:, t]
        for k in range(n):
            M = data.delta_matrix.copy()
            M[:, k] = vec
            out[k, t] = d[t] * la.det(M) / data.delta_value
    return out


def char_matrix_limit(bc: BoundaryConditionSet, profile_or_p) -> np.ndarray:
    """``Theta_p(b0, b1)^{-1} Theta_p(b1, b0) D`` for the decay count p."""
    p = profile_or_p.p if isinstance(profile_or_p, DecayProfile) else int(profile_or_p)
    n = bc.n
    fwd = theta_matrix(bc, p).entries
    swp = theta_matrix(bc, p, swapped=True).entries
    norms = np.linalg.norm(fwd, axis=0)
    det = la.det(fwd)
    if np.prod(norms) == 0 or abs(det) <= 1e-8 * np.prod(norms):
        raise IrregularLimitError(f"problem not regular at this p (Theta_{p} is singular)")
    d = _split_factors(n, p)
    X, _ = _solve_refined(fwd, swp * d[None, :])
    return X


# ---------------------------------------------------------------------------
# Green's function


@dataclass(frozen=True)
class GreenEvaluation:
    x: float
    xi: float
    g0_part: complex
    correction_part: complex
    total: complex


class GreenFunction:
    """Green's function of ``l(y) - lam y = f`` with the given boundary conditions.

    Built from one fundamental system at ``rho``; raises
    :class:`NearEigenvalueError` when ``lam`` is (numerically) an eigenvalue.
    """

    def __init__(self, bc: BoundaryConditionSet, expr, lam=None, *, sp: SpectralPoint | None = None,
                 fss: FundamentalSystem | None = None, tol=NEAR_EIGENVALUE_TOL):
        if isinstance(expr, (int, np.integer)):
            expr = DifferentialExpression(int(expr))
        self.bc = bc
        self.expr = expr
        self.n = bc.n
        if fss is None:
            if sp is None:
                sp = spectral_point(lam, bc.n)
            fss = FundamentalSystem(expr, sp.rho)
        self.sp = sp
        self.fss = fss
        self.rho = fss.rho
        self.lam = fss.lam
        self.p = fss.p
        self.data = characteristic_data(bc, fss)
        self.cm = char_matrix_from_data(self.data, tol)
        self.A = self.cm.entries
        self.prefactor = -2j * np.pi / (self.n * self.rho ** (self.n - 1))

    # -- kernels ---------------------------------------------------------

    def g0(self, x, xi, deriv=0) -> np.ndarray:
        """``D_x^deriv g0(x_i, xi_l)`` as an ``len(x) x len(xi)`` matrix; x == xi uses the x > xi side."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        n, rho, eps, p = self.n, self.rho, self.fss.eps, self.p
        Sx = self.fss.scaled(x)[:, deriv, :]  # [i, k]
        T = self.fss.dual_scaled(xi)  # [l, k]
        d = x[:, None] - xi[None, :]
        upper = d >= 0
        out = np.zeros(d.shape, dtype=complex)
        for k in range(n):
            if k < p:
                ph = np.exp(1j * rho * eps[k] * np.where(upper, d, 0.0))
                out += np.where(upper, 1j * Sx[:, k][:, None] * T[:, k][None, :] * ph, 0.0)
            else:
                ph = np.exp(1j * rho * eps[k] * np.where(upper, 0.0, d))
                out += np.where(upper, 0.0, -1j * Sx[:, k][:, None] * T[:, k][None, :] * ph)
        return out * rho ** (deriv - (n - 1))

    def correction(self, x, xi, deriv=0) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        Z = self.fss.z(x, deriv)  # [i, k]
        U = self.fss.u(xi)  # [l, t]
        return self.prefactor * (Z @ self.A @ U.T)

    def kernel(self, x, xi, deriv=0) -> np.ndarray:
        return self.g0(x, xi, deriv) + self.correction(x, xi, deriv)

    def correction_kernel_unscaled(self, x, xi) -> np.ndarray:
        """``P(x, xi) = sum a_tk z_k(x) u_t(xi)`` (no ``-2 pi i / n rho^{n-1}`` factor)."""
        Z = self.fss.z(np.atleast_1d(x))
        U = self.fss.u(np.atleast_1d(xi))
        return Z @ self.A @ U.T

    def evaluate(self, x: float, xi: float) -> GreenEvaluation:
        g = complex(self.g0(x, xi)[0, 0])
        c = complex(self.correction(x, xi)[0, 0])
        return GreenEvaluation(float(x), float(xi), g, c, g + c)

    def ratio(self, x: float, xi: float) -> complex:
        """``G`` as the ratio of the bordered determinant to ``Delta(rho)``."""
        n, rho = self.n, self.rho
        scale = n * rho ** (n - 1) / 1j
        zrow = self.fss.z(np.array([x]))[0]
        g = complex(self.g0(x, xi)[0, 0]) * scale
        W0, W1 = boundary_forms(self.bc, rho)
        d0 = np.array([self.g0(0.0, xi, m)[0, 0] for m in range(n)]) * scale
        d1 = np.array([self.g0(1.0, xi, m)[0, 0] for m in range(n)]) * scale
        # W already carries rho^{m-j}; the derivatives above are plain D^m g
        V = W0 @ (d0 / rho ** np.arange(n)) + W1 @ (d1 / rho ** np.arange(n))
        big = np.zeros((n + 1, n + 1), dtype=complex)
        big[0, :n] = zrow
        big[0, n] = g
        big[1:, :n] = self.data.delta_matrix
        big[1:, n] = V
        num = 1j * la.det(big)
        return complex((-1) ** n * num / (n * rho ** (n - 1) * self.data.delta_value))

    # -- operators ---------------------------------------------------------

    def apply(self, f, x, deriv=0, panels=None) -> np.ndarray:
        """``D^deriv (G f)(x)`` by Gauss-Legendre quadrature split at ``xi = x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if panels is None:
            panels = int(max(4, np.ceil(abs(self.rho) / 4)))
        out = np.empty(x.shape, dtype=complex)
        for i, xv in enumerate(x):
            total = 0j
            for a, b in ((0.0, xv), (xv, 1.0)):
                if b - a <= 0:
                    continue
                nodes, w = composite_gauss(a, b, panels)
                fv = np.asarray(f(nodes), dtype=complex)
                total += np.sum(self.kernel(xv, nodes, deriv)[0] * w * fv)
            out[i] = total
        return out

    def boundary_residuals(self, f, panels=None) -> np.ndarray:
        """``U_r(G f)`` for every condition row (including tails)."""
        n = self.n
        C0, C1 = self.bc.coefficient_arrays(with_tails=True)
        v0 = np.array([self.apply(f, [0.0], m, panels)[0] for m in range(n)])
        v1 = np.array([self.apply(f, [1.0], m, panels)[0] for m in range(n)])
        return C0 @ v0 + C1 @ v1

    def nystrom(self, m, kernel="full"):
        """Weighted Nystrom matrix ``sqrt(w_i) K(x_i, x_l) sqrt(w_l)`` on a composite Gauss rule."""
        panels = int(np.ceil(m / 16))
        x, w = composite_gauss(0.0, 1.0, panels)
        if kernel == "full":
            K = self.kernel(x, x)
        elif kernel == "g0":
            K = self.g0(x, x)
        elif kernel == "P":
            K = self.correction_kernel_unscaled(x, x)
        else:
            raise ValueError(f"unknown kernel {kernel!r}")
        sw = np.sqrt(w)
        return sw[:, None] * K * sw[None, :], x, w

    def operator_norm(self, m=None, kernel="full") -> float:
        if m is None:
            m = default_nodes(self.rho)
        K, _, _ = self.nystrom(m, kernel)
        return largest_singular_value(K)


def default_nodes(rho) -> int:
    return int(max(64, np.ceil(8 * abs(rho))))


def largest_singular_value(K) -> float:
    # the top of the spectrum is clustered for resolvent kernels, which stalls
    # Lanczos; dense SVD is faster up to a few thousand nodes
    if K.shape[0] <= 4096:
        return float(la.svdvals(K, check_finite=False)[0])
    s = spla.svds(K, k=1, return_singular_vectors=False, tol=1e-10, random_state=0)
    return float(s[0])


def g0_eval(expr, sp: SpectralPoint, profile: DecayProfile | None, x: float, xi: float, deriv=0) -> complex:
    """The particular-solution kernel ``g0(x, xi)`` alone."""
    p = None if profile is None else profile.p
    fss = FundamentalSystem(expr, sp.rho, p)
    n, rho, eps = fss.n, fss.rho, fss.eps
    Sx = fss.scaled(x)[deriv]
    T = fss.dual_scaled(xi)
    idx = range(fss.p) if x >= xi else range(fss.p, n)
    sign = 1j if x >= xi else -1j
    val = sum(Sx[k] * T[k] * np.exp(1j * rho * eps[k] * (x - xi)) for k in idx)
    return complex(sign * val * rho ** (deriv - (n - 1)))


def green_eval(bc, expr, sp: SpectralPoint, x: float, xi: float) -> GreenEvaluation:
    return GreenFunction(bc, expr, sp=sp).evaluate(x, xi)


def resolvent_norm_estimate(bc, expr, lam, m=None) -> float:
    """Largest singular value of the Nystrom discretization of the Green's kernel."""
    gf = GreenFunction(bc, expr, lam)
    return gf.operator_norm(m)
