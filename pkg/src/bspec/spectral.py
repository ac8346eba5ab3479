"""The rho-plane: branch, sectors, decay counts and Birkhoff fundamental systems.

A fundamental system is stored in the scaled form

    S[m, k](x) = rho^{-m} D^m y_k(x) exp(-i rho eps_k x),

which is O(1) for all x and rho, so no exponential ever has to be formed
outside of a bounded combination. For ``p_k == 0`` the system is the pure
exponential one and ``S[m, k] = eps_k^m`` exactly.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .quadrature import barycentric_matrix, chebyshev, chebyshev_tail, composite_gauss
from .regularity import power_table, unity_roots

R0_DEFAULT = 10.0
DECAY_MARGIN = 1e-6
EXACT = "exact-exponential"
NUMERIC = "numeric-collocation"


class FSSError(RuntimeError):
    pass


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# branch and sectors


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    rho: complex
    sector: int
    n: int

    @property
    def arg_rho(self) -> float:
        return float(np.angle(self.rho)) % (2 * np.pi)


def spectral_point(lam: complex, n: int) -> SpectralPoint:
    """``rho = lam^{1/n}`` on the branch ``0 <= arg lam < 2 pi``."""
    lam = complex(lam)
    if lam == 0:
        raise ValueError("lambda = 0 has no sector")
    arg = float(np.angle(lam))
    if arg < 0:
        arg += 2 * np.pi
    if arg >= 2 * np.pi:
        arg = 0.0
    arg_rho = arg / n
    rho = abs(lam) ** (1.0 / n) * complex(np.cos(arg_rho), np.sin(arg_rho))
    sector = min(int(np.floor(arg_rho * n / np.pi)), 1)
    return SpectralPoint(lam, rho, sector, n)


def point_on_ray(arg_lambda: float, modulus_rho: float, n: int) -> SpectralPoint:
    """The spectral point with ``|rho| = modulus_rho`` on the ray ``arg lam = arg_lambda``."""
    return spectral_point(modulus_rho**n * np.exp(1j * arg_lambda), n)


def decay_margins(rho: complex, n: int) -> np.ndarray:
    """``Im(rho eps_k) / |rho|`` for k = 0..n-1."""
    return np.imag(rho * unity_roots(n)) / abs(rho)


def decay_count(rho: complex, n: int, delta: float = DECAY_MARGIN) -> int:
    return int(np.sum(decay_margins(rho, n) > delta))


def table_p(sector: int, n: int) -> int:
    """The tabulated value for the sector and the parity of ``n``."""
    q = n // 2
    if sector == 0:
        return q - 1 if n % 2 == 0 else q
    return q - 1


@dataclass
class DecayProfile:
    p: int
    margins: np.ndarray
    table_p: int | None
    prefix_ok: bool
    neutral: bool
    warnings: list[str] = field(default_factory=list)


def decay_profile(sp: SpectralPoint, delta: float = DECAY_MARGIN) -> DecayProfile:
    """Count the decaying exponentials at ``sp`` and compare with the table."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    margins = decay_margins(sp.rho, sp.n)
    decaying = margins > delta
    p = int(decaying.sum())
    prefix_ok = bool(np.all(decaying[:p])) and not bool(np.any(decaying[p:]))
    neutral = bool(np.any(np.abs(margins) <= max(delta, 1e-14)))
    tp = table_p(sp.sector, sp.n)
    notes = []
    if neutral:
        notes.append("neutral exponential present")
    if p != tp + 1:
        notes.append(f"decay count p = {p} differs from tabulated value + 1 = {tp + 1}")
    return DecayProfile(p, margins, tp, prefix_ok, neutral, notes)


# ---------------------------------------------------------------------------
# fundamental systems


class FundamentalSystem:
    """Birkhoff fundamental system ``y_0..y_{n-1}`` at a fixed ``rho``.

    Parameters
    ----------
    expr : DifferentialExpression or int
        The expression, or just ``n`` for the bare ``D^n``.
    rho : complex
        Spectral parameter, ``lam = rho**n``. Need not lie on the principal branch.
    p : int, optional
        Number of columns treated as decaying when forming ``z`` and ``u``.
        Defaults to the decay count at ``rho``.
    reference_rho : complex, optional
        Direction used to split modes into left- and right-anchored groups
        for the numeric backend. Keep it fixed to get a system analytic in rho.
    """

    def __init__(self, expr, rho, p=None, *, reference_rho=None, delta=DECAY_MARGIN,
                 r0=R0_DEFAULT, tol=1e-12, max_nodes=1536):
        if isinstance(expr, (int, np.integer)):
            self.n = int(expr)
            self.expr = None
        else:
            self.n = expr.n
            self.expr = expr
        if self.n < 1:
            raise ValueError("n must be positive")
        self.rho = complex(rho)
        if self.rho == 0:
            raise FSSError("rho = 0: exponential system degenerates")
        self.lam = self.rho**self.n
        self.eps = unity_roots(self.n)
        self.p = decay_count(self.rho, self.n, delta) if p is None else int(p)
        self.reference_rho = self.rho if reference_rho is None else complex(reference_rho)
        self.r0 = r0
        self._V = power_table(self.n)
        if self.expr is None or self.expr.is_essential:
            self.backend = EXACT
            self._nodes = None
        else:
            self.backend = NUMERIC
            self._solve(tol, max_nodes)

    # -- construction of the numeric system -------------------------------

    def _solve(self, tol, max_nodes):
        n, rho, eps = self.n, self.rho, self.eps
        N = int(min(max_nodes, 24 + 8 * np.ceil(0.15 * abs(rho))))
        while True:
            x, w, D = chebyshev(N)
            coeffs = self.expr.coefficient_values(x)  # (n-1, N+1)
            if not np.all(np.isfinite(coeffs)):
                raise FSSError("coefficient not finite at a collocation node")
            k = np.arange(n - 1)
            # s[m, i] = sum_k p_k(x_i) rho^{k-n} eps_m^k
            s = np.einsum("ki,k,mk->mi", coeffs, rho ** (k - n).astype(float), self._V[: n - 1, :].T)
            E = -1j * rho * (eps[:, None, None] / n) * s[None, :, :]  # E[l, m, i]
            values = np.empty((n, n, N + 1), dtype=complex)  # [mode l, column j, node]
            for j in range(n):
                values[:, j, :] = self._collocate(j, x, D, E)
            tail = chebyshev_tail(values)
            if tail <= tol or N >= max_nodes:
                break
            N = min(max_nodes, 2 * N)
        if not np.all(np.isfinite(values)):
            raise FSSError("collocation produced non-finite values")
        if tail > 1e3 * tol:
            warnings.warn(f"fundamental system under-resolved (Chebyshev tail {tail:.1e} at N = {N})", RuntimeWarning)
        self._nodes, self._weights = x, w
        self._modes = values
        self.resolution = (N, tail)

    def _collocate(self, j, x, D, E):
        n, eps = self.n, self.eps
        M = len(x)
        rel = np.imag(self.reference_rho * eps)
        left = rel >= rel[j] - 1e-12 * abs(self.reference_rho)
        A = np.zeros((n * M, n * M), dtype=complex)
        rhs = np.zeros(n * M, dtype=complex)
        for l in range(n):
            rows = slice(l * M, (l + 1) * M)
            A[rows, rows] = D - 1j * self.rho * (eps[l] - eps[j]) * np.eye(M)
            for m in range(n):
                A[rows, m * M:(m + 1) * M] -= np.diag(E[l, m])
            r = l * M if left[l] else l * M + M - 1
            A[r, :] = 0.0
            A[r, r] = 1.0
            rhs[r] = 1.0 if l == j else 0.0
        lu = la.lu_factor(A, check_finite=False)
        sol = la.lu_solve(lu, rhs)
        # one step of iterative refinement
        sol += la.lu_solve(lu, rhs - A @ sol)
        return sol.reshape(n, M)

    # -- evaluation -------------------------------------------------------

    @property
    def asymptotic(self) -> bool:
        """Whether ``|rho|`` is beyond ``R0`` so that asymptotic bounds apply."""
        return abs(self.rho) >= self.r0

    def scaled(self, x) -> np.ndarray:
        """``S[..., m, k]`` at points ``x`` (any shape)."""
        x = np.asarray(x, dtype=float)
        n = self.n
        if np.any((x < -1e-12) | (x > 1 + 1e-12)):
            raise ValueError("x must lie in [0, 1]")
        if self.backend == EXACT:
            return np.broadcast_to(self._V, x.shape + (n, n)).copy()
        B = barycentric_matrix(self._nodes, self._weights, x.ravel())
        c = np.einsum("xi,lji->xlj", B, self._modes)
        S = np.einsum("ml,xlj->xmj", self._V, c)
        return S.reshape(x.shape + (n, n))

    def phases(self, x) -> np.ndarray:
        """``exp(i rho eps_k x)`` with shape ``x.shape + (n,)``."""
        x = np.asarray(x, dtype=float)
        return np.exp(1j * self.rho * self.eps * x[..., None])

    def matrix(self, x) -> np.ndarray:
        """``M(x)[k, j] = D^k y_j(x)``."""
        x = np.asarray(x, dtype=float)
        S = self.scaled(x)
        rpow = self.rho ** np.arange(self.n)
        return rpow[:, None] * S * self.phases(x)[..., None, :]

    def dual_scaled(self, x) -> np.ndarray:
        """``T[..., k]`` with ``ytilde_k(x) = rho^{-(n-1)} exp(-i rho eps_k x) T_k(x)``."""
        S = self.scaled(x)
        e = np.zeros(self.n, dtype=complex)
        e[-1] = 1.0
        flat = S.reshape(-1, self.n, self.n)
        try:
            T = np.linalg.solve(flat, np.broadcast_to(e, (flat.shape[0], self.n))[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise FSSError("singular derivative matrix") from exc
        return T.reshape(S.shape[:-1])

    def dual(self, x) -> np.ndarray:
        """``ytilde_k(x)``: the last column of ``M(x)^{-1}``, as a row per x."""
        x = np.asarray(x, dtype=float)
        T = self.dual_scaled(x)
        return T * np.exp(-1j * self.rho * self.eps * x[..., None]) * self.rho ** (-(self.n - 1))

    def z_phase(self, x) -> np.ndarray:
        """Exponential factor of ``z_k``: ``exp(i rho eps_k x)`` or ``exp(i rho eps_k (x - 1))``."""
        x = np.asarray(x, dtype=float)[..., None]
        shift = (np.arange(self.n) >= self.p).astype(float)
        return np.exp(1j * self.rho * self.eps * (x - shift))

    def u_phase(self, xi) -> np.ndarray:
        """Exponential factor of ``u_t``: ``exp(i rho eps_t (1 - xi))`` or ``exp(-i rho eps_t xi)``."""
        xi = np.asarray(xi, dtype=float)[..., None]
        shift = (np.arange(self.n) < self.p).astype(float)
        return np.exp(1j * self.rho * self.eps * (shift - xi))

    def z(self, x, deriv=0) -> np.ndarray:
        """``D^deriv z_k(x)``, shape ``x.shape + (n,)``."""
        S = self.scaled(x)
        return self.rho**deriv * S[..., deriv, :] * self.z_phase(x)

    def z_all(self, x) -> np.ndarray:
        """``D^m z_k(x)`` for all m, shape ``x.shape + (n, n)`` indexed ``[m, k]``."""
        S = self.scaled(x)
        rpow = self.rho ** np.arange(self.n)
        return rpow[:, None] * S * self.z_phase(x)[..., None, :]

    def u(self, xi) -> np.ndarray:
        """``u_t(xi)``, shape ``xi.shape + (n,)``."""
        T = self.dual_scaled(xi)
        return self.n * self.eps ** (self.n - 1) * T * self.u_phase(xi)

    def bracket_deviation(self, x) -> float:
        """``max |M[k, j] / ((rho eps_j)^k e^{i rho eps_j x}) - 1|`` over k, j and the points."""
        S = self.scaled(np.atleast_1d(x))
        return float(np.max(np.abs(S / self._V - 1.0)))

    def dual_bracket_deviation(self, x) -> float:
        """Same for ``ytilde_j n (rho eps_j)^{n-1} e^{i rho eps_j x}``."""
        T = self.dual_scaled(np.atleast_1d(x))
        return float(np.max(np.abs(self.n * self.eps ** (self.n - 1) * T - 1.0)))

    def wronskian(self, x) -> np.ndarray:
        """``det M(x)``, constant in x for expressions without a ``D^{n-1}`` term."""
        x = np.asarray(x, dtype=float)
        S = self.scaled(x)
        ph = np.prod(self.phases(x), axis=-1)
        return self.rho ** (self.n * (self.n - 1) / 2) * np.linalg.det(S) * ph


def fss_evaluate(expr, sp: SpectralPoint, x, **kwargs) -> np.ndarray:
    """``M(x)[k, j] = D^k y_j(x)`` for the Birkhoff system at ``sp``."""
    return FundamentalSystem(expr, sp.rho, **kwargs).matrix(x)


def dual_fss_evaluate(fss: FundamentalSystem, x) -> np.ndarray:
    return fss.dual(x)


def rescaled_systems(fss: FundamentalSystem, profile: DecayProfile | None, x):
    """Values ``(z_k(x), u_k(x))`` of the bounded systems."""
    if profile is not None:
        if not profile.prefix_ok:
            raise ValueError("decaying indices do not form a prefix")
        if profile.p != fss.p:
            raise ValueError(f"profile p = {profile.p} does not match system p = {fss.p}")
    return fss.z(x), fss.u(x)


def gram_condition(fss: FundamentalSystem, profile: DecayProfile | None = None, nodes: int | None = None) -> float:
    """Spectral condition number of the normalized Gram matrix of ``z_0..z_{n-1}`` in L2(0, 1)."""
    if profile is not None and profile.p != fss.p:
        raise ValueError("profile does not match the system")
    r = abs(fss.rho)
    required = int(np.ceil(20 * r / (2 * np.pi))) + 64
    if nodes is None:
        nodes = required
    if nodes < required:
        raise QuadratureError(f"{nodes} nodes under-resolve |rho| = {r:.3g}; need {required}")
    panels = int(np.ceil(nodes / 16))
    x, w = composite_gauss(0.0, 1.0, panels)
    Z = fss.z(x)
    G = (Z * w[:, None]).T @ Z.conj()
    d = np.sqrt(np.real(np.diag(G)))
    G = G / np.outer(d, d)
    ev = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    if ev[0] <= 0:
        return float("inf")
    return float(ev[-1] / ev[0])
