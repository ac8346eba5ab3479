"""Quadrature and Chebyshev helpers shared by the solvers."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft


@lru_cache(maxsize=32)
def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_gauss(a, b, panels, order=16):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    x, w = _gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def panels_for(rate, minimum=4, per_unit=0.25):
    """Panel count resolving ``exp(rate * x)`` behaviour on [0, 1] with 16-point panels."""
    return int(max(minimum, np.ceil(per_unit * rate)))


@lru_cache(maxsize=16)
def chebyshev(N):
    """Chebyshev-Lobatto points on [0, 1] (ascending), barycentric weights and d/dx matrix."""
    i = np.arange(N + 1)
    x = 0.5 * (1.0 - np.cos(np.pi * i / N))
    w = (-1.0) ** i
    w[0] *= 0.5
    w[-1] *= 0.5
    # Trefethen's formula via the complement-difference identity avoids cancellation
    theta = np.pi * i / N
    dx = np.sin(0.5 * (theta[:, None] + theta[None, :])) * np.sin(0.5 * (theta[:, None] - theta[None, :]))
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    for a in (x, w, D):
        a.setflags(write=False)
    return x, w, D


def barycentric_matrix(nodes, weights, x):
    """Matrix ``B`` with ``f(x) = B @ f(nodes)`` for the barycentric interpolant."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = x[:, None] - nodes[None, :]
    exact = diff == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        W = weights[None, :] / diff
    hit = exact.any(axis=1)
    W[hit] = 0.0
    W[exact] = 1.0
    W /= W.sum(axis=1, keepdims=True)
    return W


def chebyshev_tail(values):
    """Relative size of the trailing Chebyshev coefficients of samples at Lobatto points."""
    vals = np.asarray(values)
    N = vals.shape[-1] - 1
    coef = scipy.fft.dct(vals, type=1, axis=-1) / N
    mag = np.abs(coef)
    scale = max(float(mag.max()), 1e-300)
    tail = float(mag[..., -max(4, N // 16):].max())
    return tail / scale
