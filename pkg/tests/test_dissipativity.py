import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bspec.dissipativity import (
    DISSIPATIVE,
    NOT_DISSIPATIVE,
    SELF_ADJOINT,
    boundary_vector,
    conditions_from_contraction,
    dissipativity_test,
    form_by_quadrature,
    haar_unitary,
    lagrange_form,
    lagrange_residual,
    sample_dissipative_bc,
    sample_selfadjoint_bc,
    task_seed,
)
from bspec.model import normalize_conditions
from bspec.regularity import IRREGULAR, classify

from conftest import rows


def robin(c):
    """u(0) = 0, Du(1) = c u(1)."""
    return normalize_conditions(rows([1, 0, 0, 0], [0, 0, -c, 1]), 2)


def test_form_closed_form_second_order():
    H = lagrange_form(2).H
    expected = 0.5 * np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, -1, 0]])
    np.testing.assert_array_equal(H, expected)
    assert not H.flags.writeable
    with pytest.raises(ValueError):
        lagrange_form(0)


@pytest.mark.parametrize("n", range(1, 9))
def test_form_matches_quadrature(n):
    assert lagrange_residual(n, trials=20, seed=n) <= 1e-11


def test_first_order_form():
    # Im <Du, u> = (|u(0)|^2 - |u(1)|^2) / 2
    coef = np.array([1 + 1j, -2, 0.5j])
    Y = boundary_vector(coef, 1)
    assert lagrange_form(1)(Y) == pytest.approx(0.5 * (abs(Y[0]) ** 2 - abs(Y[1]) ** 2))
    assert form_by_quadrature(coef, 1) == pytest.approx(lagrange_form(1)(Y), abs=1e-13)


def test_dirichlet_self_adjoint(dirichlet):
    rep = dissipativity_test(dirichlet)
    assert rep.verdict == SELF_ADJOINT and rep.anti_dissipative


def test_cauchy_indefinite(cauchy0):
    rep = dissipativity_test(cauchy0)
    assert rep.verdict == NOT_DISSIPATIVE and not rep.anti_dissipative
    np.testing.assert_allclose(rep.restricted_eigenvalues, [-0.5, 0.5], atol=1e-12)


@pytest.mark.parametrize("c, verdict", [(-1.0, DISSIPATIVE), (-0.2 + 3j, DISSIPATIVE), (3j, SELF_ADJOINT),
                                        (0.5, NOT_DISSIPATIVE), (1j, SELF_ADJOINT)])
def test_robin_sign(c, verdict):
    rep = dissipativity_test(robin(c))
    assert rep.verdict == verdict


def test_robin_orientation_by_quadrature():
    # u = x + a x^2 with Du(1) = -u(1); Im <D^2 u, u> must be >= 0
    a = -(1 - 1j) / (1 - 2j)
    coef = np.array([0, 1, a])
    Y = boundary_vector(coef, 2)
    assert Y[3] == pytest.approx(-Y[2])
    q = form_by_quadrature(coef, 2)
    assert q >= 0 and q == pytest.approx(abs(Y[2]) ** 2, rel=1e-12)
    rep = dissipativity_test(robin(-1.0))
    np.testing.assert_allclose(rep.restricted_eigenvalues, [0, 0.5], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.sampled_from([2, 3, 4]), seed=st.integers(0, 10**6))
def test_verdict_invariant_under_row_mixing(n, seed):
    bc, _ = sample_dissipative_bc(n, seed)
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    mixed = normalize_conditions(M @ bc.matrix(), n)
    assert dissipativity_test(mixed).verdict == dissipativity_test(bc).verdict


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_sampler_soundness(n):
    for i in range(10):
        bc, sigma = sample_dissipative_bc(n, task_seed(0, n, i))
        assert 0 <= sigma <= 1
        assert dissipativity_test(bc).verdict in (DISSIPATIVE, SELF_ADJOINT)
        sa = sample_selfadjoint_bc(n, task_seed(0, n, i))
        assert dissipativity_test(sa).verdict == SELF_ADJOINT


def test_zero_contraction_is_strictly_dissipative():
    bc, sigma = sample_dissipative_bc(4, 0, sigma=0.0)
    rep = dissipativity_test(bc)
    assert sigma == 0 and rep.verdict == DISSIPATIVE
    assert rep.margin > 1e-3


def test_sampler_is_deterministic():
    a, _ = sample_dissipative_bc(4, task_seed(1, 4, 7))
    b, _ = sample_dissipative_bc(4, task_seed(1, 4, 7))
    np.testing.assert_array_equal(a.matrix(), b.matrix())
    with pytest.raises(ValueError):
        sample_dissipative_bc(2, 0, sigma=1.5)


def test_haar_unitary():
    Q = haar_unitary(5, np.random.default_rng(0))
    np.testing.assert_allclose(Q @ Q.conj().T, np.eye(5), atol=1e-13)
    bc = conditions_from_contraction(Q)
    assert dissipativity_test(bc).verdict == SELF_ADJOINT


@pytest.mark.parametrize("n", [2, 4])
def test_selfadjoint_samples_are_regular(n):
    for i in range(50):
        assert classify(sample_selfadjoint_bc(n, task_seed(2, n, i))).classification != IRREGULAR


def test_essential_flag_warns():
    bc = sample_selfadjoint_bc(4, task_seed(1, 4, 0))
    assert bc.has_tails
    rep = dissipativity_test(bc, essential=True)
    assert rep.warnings and "tails" in rep.warnings[0]
    assert not dissipativity_test(bc).warnings


@pytest.mark.parametrize("n", [2, 3, 5])
def test_form_vanishes_on_equal_end_values(n):
    rng = np.random.default_rng(n)
    v = rng.standard_normal(n)
    assert lagrange_form(n)(np.concatenate([v, v])) == pytest.approx(0.0, abs=1e-14)


def test_scalar_unitary_coupling_is_self_adjoint():
    bc = conditions_from_contraction(np.exp(0.7j) * np.eye(2))
    assert dissipativity_test(bc).verdict == SELF_ADJOINT
