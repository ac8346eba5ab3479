import json

import numpy as np
import pytest

from bspec.direct import shooting_determinant
from bspec.green import characteristic_determinant
from bspec.model import normalize_conditions, parse_problem
from bspec.roots import (
    CharacteristicFunction,
    Rect,
    ZeroOnContour,
    eigenvalues_in,
    exclude_square,
    winding_number,
)


def test_rect_validation_and_split():
    with pytest.raises(ValueError):
        Rect(1, 0, 0, 1)
    r = Rect(0, 2, -1, 1)
    assert r.center == 1 and len(r.split()) == 4
    assert r.contains(1 + 0.5j) and not r.contains(3)


def test_exclude_square_covers_rest():
    pieces = exclude_square(Rect(-3, 3, -3, 3), 1.0)
    area = sum((p.re_max - p.re_min) * (p.im_max - p.im_min) for p in pieces)
    assert area == pytest.approx(36 - 4)
    assert not any(p.contains(0.5 + 0.5j) and p.contains(-0.5 - 0.5j) for p in pieces)


def test_winding_counts_polynomial_zeros():
    F = lambda z: ((z - 0.3) * (z + 0.2j) ** 2, 1.0)  # noqa: E731
    assert winding_number(F, Rect(-1, 1, -1, 1)) == 3
    assert winding_number(F, Rect(0.1, 1, -0.1, 0.1)) == 1
    with pytest.raises(ZeroOnContour):
        winding_number(F, Rect(0.3, 1, -1, 1))


def test_dirichlet_eigenvalues(dirichlet):
    eig = eigenvalues_in(dirichlet, 2, (0.5, 16.5, -1, 1))
    lam = sorted(e.lam.real for e in eig)
    expected = [(k * np.pi) ** 2 for k in range(1, 6)]
    np.testing.assert_allclose(lam, expected, rtol=1e-8)
    assert all(e.multiplicity == 1 for e in eig)


def test_dirichlet_zero_count_in_square(dirichlet):
    # rho = k pi for k = +-1..+-6 inside [-20, 20]^2
    eig = eigenvalues_in(dirichlet, 2, (-20, 20, -20, 20))
    assert len(eig) == 12


def test_cauchy_has_no_eigenvalues(cauchy0):
    assert eigenvalues_in(cauchy0, 2, (-20, 20, -20, 20)) == []


def test_periodic_double_root(periodic):
    eig = eigenvalues_in(periodic, 2, (5, 7, -1, 1))
    assert len(eig) == 1
    assert eig[0].rho == pytest.approx(2 * np.pi, abs=1e-6)
    assert eig[0].multiplicity == 2


def test_characteristic_function_scale(dirichlet):
    F = CharacteristicFunction(dirichlet, 2, 3.0)
    val, scale = F(np.pi)
    assert abs(val) <= 1e-14 * scale
    assert val == pytest.approx(characteristic_determinant(dirichlet, 2, np.pi, p=1), abs=1e-14)


def test_potential_problem_against_shooting(problems_dir):
    expr, raw = parse_problem(json.loads((problems_dir / "potential4.json").read_text()))
    bc = normalize_conditions(raw, expr.n)
    eig = eigenvalues_in(bc, expr, (2, 5, -0.5, 0.5))
    assert eig
    for e in eig:
        here = abs(shooting_determinant(bc, expr, e.lam))
        near = abs(shooting_determinant(bc, expr, e.lam * 1.01))
        assert here <= 1e-9 * near
