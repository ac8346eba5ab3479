"""Direct shooting solver for ``l(y) - lam y = f`` with homogeneous boundary conditions.

Independent of the Birkhoff machinery: integrates the first-order system for
``Y = (y, Dy, ..., D^{n-1} y)`` from ``x = 0`` and fixes the free constants
from the boundary conditions. Only meant for moderate ``|lam|``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import BoundaryConditionSet, DifferentialExpression


class SingularBoundarySystem(ArithmeticError):
    pass


@dataclass(frozen=True)
class GridFunction:
    """Samples ``values[m, i] = D^m y(x_i)``."""

    x: np.ndarray
    values: np.ndarray

    def __call__(self, x, deriv=0):
        return np.interp(x, self.x, self.values[deriv].real) + 1j * np.interp(x, self.x, self.values[deriv].imag)


def _companion(expr: DifferentialExpression, lam, x):
    n = expr.n
    C = np.zeros((n, n), dtype=complex)
    C[np.arange(n - 1), np.arange(1, n)] = 1.0
    p = expr.coefficient_values(x)
    C[n - 1, : n - 1] = -p
    C[n - 1, 0] += lam
    return C


def monodromy(expr, lam, rtol=1e-12, atol=1e-14) -> np.ndarray:
    """``Phi(1)`` for the unit Cauchy data ``Phi(0) = I``."""
    if isinstance(expr, (int, np.integer)):
        expr = DifferentialExpression(int(expr))
    n = expr.n
    lam = complex(lam)

    def rhs(t, v):
        return (1j * (_companion(expr, lam, t) @ v.reshape(n, n))).ravel()

    sol = solve_ivp(rhs, (0.0, 1.0), np.eye(n, dtype=complex).ravel(), method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    return sol.y[:, -1].reshape(n, n)


def shooting_determinant(bc: BoundaryConditionSet, expr, lam) -> complex:
    """``det(U0 + U1 Phi(1))``; vanishes exactly at the eigenvalues."""
    n = bc.n
    U = bc.matrix(with_tails=True)
    return complex(np.linalg.det(U[:, :n] + U[:, n:] @ monodromy(expr, lam)))


def solve_bvp_direct(bc: BoundaryConditionSet, expr, lam, f, x=None, rtol=1e-12, atol=1e-14) -> GridFunction:
    """Solve ``l(y) = lam y + f`` subject to ``U(y) = 0`` on a grid.

    ``f`` is a vectorized callable on [0, 1]. The default grid has 201 points.
    """
    if isinstance(expr, (int, np.integer)):
        expr = DifferentialExpression(int(expr))
    n = expr.n
    if bc.n != n:
        raise ValueError("order mismatch between conditions and expression")
    x = np.linspace(0.0, 1.0, 201) if x is None else np.asarray(x, dtype=float)
    lam = complex(lam)

    def rhs(t, v):
        Y = v.reshape(n, n + 1)
        dY = 1j * (_companion(expr, lam, t) @ Y)
        dY[n - 1, n] += 1j * complex(np.asarray(f(np.array([t])))[0])
        return dY.ravel()

    # columns 0..n-1: unit Cauchy data; column n: particular solution with zero data
    start = np.hstack([np.eye(n), np.zeros((n, 1))]).astype(complex)
    sol = solve_ivp(rhs, (0.0, 1.0), start.ravel(), method="DOP853", rtol=rtol, atol=atol,
                    t_eval=np.union1d(x, [1.0]), dense_output=False)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    traj = sol.y.reshape(n, n + 1, -1)
    end = traj[:, :, -1]
    U = bc.matrix(with_tails=True)
    U0, U1 = U[:, :n], U[:, n:]
    M = U0 + U1 @ end[:, :n]
    b = -U1 @ end[:, n]
    if np.linalg.matrix_rank(M, tol=1e-12 * max(1.0, np.abs(M).max())) < n:
        raise SingularBoundarySystem("boundary system is singular (lam is an eigenvalue?)")
    c = np.linalg.solve(M, b)
    grid = sol.t
    keep = np.isin(grid, x)
    values = np.einsum("mkx,k->mx", traj[:, :n, :], c) + traj[:, n, :]
    return GridFunction(grid[keep], values[:, keep])
