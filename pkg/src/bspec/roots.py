"""Zeros of the characteristic determinant in the rho-plane by the argument principle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .green import characteristic_data
from .spectral import FundamentalSystem, decay_count

MAX_PERTURB = 5
CLUSTER_TOL = 1e-6


class WindingMismatch(ArithmeticError):
    pass


class ZeroOnContour(ArithmeticError):
    pass


@dataclass(frozen=True)
class Eigenvalue:
    rho: complex
    lam: complex
    multiplicity: int


@dataclass(frozen=True)
class Rect:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("empty rectangle")

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    @property
    def size(self) -> float:
        return max(self.re_max - self.re_min, self.im_max - self.im_min)

    def contains(self, z, pad=0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad) and (self.im_min - pad <= z.imag <= self.im_max + pad)

    def corners(self):
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def split(self, fr=0.5, fi=0.5):
        rm = self.re_min + fr * (self.re_max - self.re_min)
        im = self.im_min + fi * (self.im_max - self.im_min)
        return [Rect(self.re_min, rm, self.im_min, im), Rect(rm, self.re_max, self.im_min, im),
                Rect(rm, self.re_max, im, self.im_max), Rect(self.re_min, rm, im, self.im_max)]


def exclude_square(rect: Rect, r: float) -> list[Rect]:
    """Pieces of ``rect`` outside the open square ``|Re|, |Im| < r``."""
    if r <= 0 or rect.re_min >= r or rect.re_max <= -r or rect.im_min >= r or rect.im_max <= -r:
        return [rect]
    out = []
    if rect.re_min < -r:
        out.append(Rect(rect.re_min, -r, rect.im_min, rect.im_max))
    if rect.re_max > r:
        out.append(Rect(r, rect.re_max, rect.im_min, rect.im_max))
    lo, hi = max(rect.re_min, -r), min(rect.re_max, r)
    if rect.im_max > r:
        out.append(Rect(lo, hi, r, rect.im_max))
    if rect.im_min < -r:
        out.append(Rect(lo, hi, rect.im_min, -r))
    return out


class CharacteristicFunction:
    """``rho -> Delta(rho)`` with a frozen column split, hence analytic."""

    def __init__(self, bc, expr, reference_rho):
        self.bc = bc
        self.expr = expr if expr is not None else bc.n
        self.reference_rho = complex(reference_rho)
        self.p = decay_count(self.reference_rho, bc.n)
        self.calls = 0

    def __call__(self, rho):
        self.calls += 1
        fss = FundamentalSystem(self.expr, rho, self.p, reference_rho=self.reference_rho)
        d = characteristic_data(self.bc, fss)
        return d.delta_value, d.scale


def _edge_phase(F, a, b, zero_tol, samples=16, max_depth=40):
    """Accumulated change of ``arg F`` from a to b with adaptive bisection."""
    ts = np.linspace(0.0, 1.0, samples + 1)
    vals = []
    for t in ts:
        v, s = F(a + t * (b - a))
        if abs(v) <= zero_tol * s:
            raise ZeroOnContour(a + t * (b - a))
        vals.append(v)
    total = 0.0
    stack = [(ts[i], vals[i], ts[i + 1], vals[i + 1], 0) for i in range(samples)][::-1]
    while stack:
        t0, v0, t1, v1, depth = stack.pop()
        ratio = v1 / v0
        dphi = np.angle(ratio)
        if (abs(dphi) > np.pi / 4 or abs(np.log(abs(ratio))) > 1.0) and depth < max_depth:
            tm = 0.5 * (t0 + t1)
            vm, s = F(a + tm * (b - a))
            if abs(vm) <= zero_tol * s:
                raise ZeroOnContour(a + tm * (b - a))
            stack.append((tm, vm, t1, v1, depth + 1))
            stack.append((t0, v0, tm, vm, depth + 1))
            continue
        total += dphi
    return total


def winding_number(F, rect: Rect, zero_tol=1e-12) -> int:
    c = rect.corners()
    total = sum(_edge_phase(F, c[i], c[(i + 1) % 4], zero_tol) for i in range(4))
    w = total / (2 * np.pi)
    if abs(w - round(w)) > 0.05:
        raise WindingMismatch(f"non-integer winding {w:.4f}")
    return int(round(w))


def _newton(F, z0, m=1, tol=1e-10, maxit=80):
    """Newton on ``Delta`` with a central-difference derivative.

    Iterates until the step stalls, then accepts if ``|Delta| <= tol * scale``.
    """
    z = complex(z0)
    best = None
    for _ in range(maxit):
        v, s = F(z)
        if best is None or abs(v) / s < best[1]:
            best = (z, abs(v) / s)
        h = 1e-6 * max(1.0, abs(z))
        dv = (F(z + h)[0] - F(z - h)[0]) / (2 * h)
        if dv == 0 or not np.isfinite(dv):
            break
        step = m * v / dv
        z -= step
        if abs(step) <= 1e-14 * max(1.0, abs(z)):
            break
    v, s = F(z)
    if abs(v) / s < best[1]:
        best = (z, abs(v) / s)
    return best[0], best[1] <= tol


def _isolate(F, rect: Rect, w: int, out: list, depth=0, min_size=1e-7):
    if w == 0:
        return
    if w == 1 or rect.size < min_size * (1 + abs(rect.center)):
        z, ok = _newton(F, rect.center, m=w)
        if ok and rect.contains(z, pad=1e-9 * (1 + abs(z))):
            out.append((z, w))
            return
        if rect.size < min_size * (1 + abs(rect.center)):
            raise WindingMismatch(f"could not refine {w} zero(s) near {rect.center}")
    last = None
    for attempt in range(MAX_PERTURB):
        off = 0.5 + 0.0137 * attempt * (-1) ** attempt
        kids = rect.split(off, 0.5 - 0.0091 * attempt * (-1) ** attempt)
        try:
            ws = [winding_number(F, k) for k in kids]
        except ZeroOnContour as exc:
            last = exc
            continue
        if sum(ws) != w:
            raise WindingMismatch(f"winding mismatch after subdivision: {sum(ws)} != {w}")
        for k, wk in zip(kids, ws):
            _isolate(F, k, wk, out, depth + 1, min_size)
        return
    raise ZeroOnContour(f"zero on subdivision contour near {last}")


def _merge(found, tol, combine):
    merged = []
    for z, m in sorted(found, key=lambda t: (t[0].real, t[0].imag)):
        for i, (y, k) in enumerate(merged):
            if abs(y - z) <= tol * (1 + abs(z)):
                merged[i] = ((y * k + z * m) / (k + m), combine(k, m))
                break
        else:
            merged.append((z, m))
    return merged


def eigenvalues_in(bc, expr, rect, exclude_radius=1.0) -> list[Eigenvalue]:
    """Zeros of ``Delta`` in a rho-plane rectangle ``(re_min, re_max, im_min, im_max)``.

    The square ``|Re rho|, |Im rho| < exclude_radius`` is cut out. Each zero is
    reported with ``lam = rho**n`` and the multiplicity given by the winding number.
    """
    rect = rect if isinstance(rect, Rect) else Rect(*map(float, rect))
    n = bc.n
    found = []
    for piece in exclude_square(rect, exclude_radius):
        local = []
        ref = piece.center if piece.center != 0 else complex(0, max(exclude_radius, 1.0))
        F = CharacteristicFunction(bc, expr, ref)
        w = None
        cur = piece
        for attempt in range(MAX_PERTURB):
            try:
                w = winding_number(F, cur)
                break
            except ZeroOnContour:
                grow = 1e-3 * (attempt + 1) * piece.size
                cur = Rect(piece.re_min - grow, piece.re_max + 0.7 * grow, piece.im_min - 0.3 * grow, piece.im_max + grow)
        if w is None:
            raise ZeroOnContour("zero on contour persisted after perturbation")
        _isolate(F, cur, w, local)
        # round-off splits a multiple zero into a tight cluster of simple ones
        found.extend(_merge(local, CLUSTER_TOL, lambda a, b: a + b))
    # zeros on a shared edge of two pieces are seen twice
    found = _merge(found, 1e-8, max)
    return [Eigenvalue(complex(z), complex(z) ** n, m) for z, m in found]
