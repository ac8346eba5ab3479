"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import time

import numpy as np

from bspec.direct import solve_bvp_direct
from bspec.dissipativity import (
    DISSIPATIVE,
    SELF_ADJOINT,
    dissipativity_test,
    sample_dissipative_bc,
    sample_selfadjoint_bc,
    task_seed,
)
from bspec.green import (
    GreenFunction,
    char_matrix,
    char_matrix_limit,
    delta_matrix,
    resolvent_norm_estimate,
)
from bspec.model import Coefficient, DifferentialExpression, essential_part, normalize_conditions, parse_problem
from bspec.regularity import (
    IRREGULAR,
    REGULAR,
    STRONGLY_REGULAR,
    classify,
    fourier_factor_residual,
    strong_regularity_polynomial,
    theta,
)
from bspec.roots import eigenvalues_in
from bspec.spectral import FundamentalSystem, decay_profile, gram_condition, point_on_ray

from conftest import PROBLEMS, random_conditions

RAY = 3 * np.pi / 2
GRID = (20.0, 40.0, 80.0, 160.0, 320.0)


def load(name):
    expr, raw = parse_problem(json.loads((PROBLEMS / f"{name}.json").read_text()))
    return expr, normalize_conditions(raw, expr.n)


def selfadjoint_samples():
    return [sample_selfadjoint_bc(4, task_seed(1, 4, i)) for i in range(5)]


def test_criterion_01_dirichlet_regularity(verdict):
    t0 = time.perf_counter()
    _, bc = load("dirichlet")
    rep = classify(bc)
    F = strong_regularity_polynomial(bc)
    dis = dissipativity_test(bc)
    elapsed = time.perf_counter() - t0
    roots = sorted(F.roots, key=lambda z: z.real)
    ok = (
        abs(rep.theta_forward - 1) <= 1e-12
        and rep.classification == STRONGLY_REGULAR
        and F.two_simple_roots
        and abs(roots[0] + 1) <= 1e-12
        and abs(roots[1] - 1) <= 1e-12
        and dis.verdict == SELF_ADJOINT
        and elapsed < 1.0
    )
    verdict(1, ok, f"Theta={rep.theta_forward:.3g} {rep.classification} F roots={roots} "
                   f"{dis.verdict} ({elapsed:.2f}s)")
    assert ok


def test_criterion_02_dirichlet_eigenvalues(verdict):
    t0 = time.perf_counter()
    _, bc = load("dirichlet")
    found = eigenvalues_in(bc, None, (-20, 20, -20, 20))
    # principal branch 0 <= arg rho < pi
    principal = [e for e in found if e.rho.imag > -1e-9 and not (e.rho.imag < 1e-9 and e.rho.real < 0)]
    lam = sorted((e.lam for e in principal), key=abs)[:5]
    expected = [(k * np.pi) ** 2 for k in range(1, 6)]
    err = max(abs(a - b) / b for a, b in zip(lam, expected)) if len(lam) == 5 else np.inf
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-8 and elapsed < 5.0
    verdict(2, ok, f"max relative error {err:.2e} over k = 1..5 ({elapsed:.2f}s)")
    assert ok


def test_criterion_03_characteristic_matrix_limit(verdict):
    t0 = time.perf_counter()
    lines = []
    all_ok = True
    problems = [("dirichlet", 2, load("dirichlet")[1])]
    problems += [(f"self-adjoint n=4 #{i}", 4, bc) for i, bc in enumerate(selfadjoint_samples())]
    for label, n, bc in problems:
        limit = char_matrix_limit(bc, decay_profile(point_on_ray(RAY, GRID[0], n)))
        ref = np.linalg.norm(limit)
        dev = [np.linalg.norm(char_matrix(bc, n, point_on_ray(RAY, r, n)).entries - limit) for r in GRID]
        monotone = all(b <= a for a, b in zip(dev, dev[1:]))
        ratio = dev[-1] / ref
        ok = monotone and ratio <= 1e-2
        all_ok &= ok
        lines.append(f"{label}: {'ok' if ok else 'FAIL'} monotone={monotone} ratio@320={ratio:.2e}")
    elapsed = time.perf_counter() - t0
    all_ok &= elapsed < 120
    verdict(3, all_ok, "; ".join(lines) + f" ({elapsed:.2f}s)")
    assert all_ok


def test_criterion_04_delta_deviation(verdict):
    problems = [("dirichlet", load("dirichlet")[1]), ("periodic", load("periodic")[1])]
    for i, bc in enumerate(selfadjoint_samples()):
        problems.append((f"essential #{i}", essential_part(DifferentialExpression(4), bc)[1]))
    worst = -np.inf
    for _, bc in problems:
        n = bc.n
        for r in GRID[1:]:
            sp = point_on_ray(RAY, r, n)
            data = delta_matrix(bc, n, sp)
            im = np.abs(np.imag(sp.rho * FundamentalSystem(n, sp.rho).eps))
            bound = np.exp(-0.5 * im[im > 1e-9 * r].min())
            worst = max(worst, np.log10(max(data.deviation, 1e-300)) - np.log10(bound))
    ok = worst <= 0
    verdict(4, ok, f"{len(problems)} essential problems, max log10(deviation / bound) = {worst:.1f}")
    assert ok


def _campaign(sampler):
    stats = {}
    for n in (2, 4):
        margins, irregular = [], 0
        for i in range(200):
            rep = classify(sampler(n, task_seed(1, n, i)))
            irregular += rep.classification == IRREGULAR
            margins.append(rep.margin_forward)
        stats[n] = (irregular, min(margins))
    return stats


def test_criterion_05_krein_campaign(verdict):
    t0 = time.perf_counter()
    stats = _campaign(lambda n, s: sample_dissipative_bc(n, s)[0])
    elapsed = time.perf_counter() - t0
    ok = all(irr == 0 and m > 1e-8 for irr, m in stats.values()) and elapsed < 60
    verdict(5, ok, " ".join(f"n={n}: irregular={irr} min margin={m:.3g}" for n, (irr, m) in stats.items())
            + f" ({elapsed:.2f}s)")
    assert ok


def test_criterion_06_selfadjoint_campaign(verdict):
    t0 = time.perf_counter()
    stats = _campaign(sample_selfadjoint_bc)
    elapsed = time.perf_counter() - t0
    ok = all(irr == 0 for irr, _ in stats.values()) and elapsed < 60
    verdict(6, ok, " ".join(f"n={n}: irregular={irr}" for n, (irr, _) in stats.items()) + f" ({elapsed:.2f}s)")
    assert ok


def test_criterion_07_resolvent_bound(verdict):
    t0 = time.perf_counter()
    lams = (-1j, -4j, -16j, -3 - 8j)
    worst = 0.0
    for k in range(20):
        n = 2 if k < 10 else 4
        bc, _ = sample_dissipative_bc(n, task_seed(7, n, k))
        assert dissipativity_test(bc).verdict in (DISSIPATIVE, SELF_ADJOINT)
        for lam in lams:
            worst = max(worst, resolvent_norm_estimate(bc, n, lam) * abs(lam.imag))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.05 and elapsed < 120
    verdict(7, ok, f"max |Im lambda| * ||R|| = {worst:.4f} over 20 problems x 4 points ({elapsed:.2f}s)")
    assert ok


def test_criterion_08_green_cross_validation(verdict):
    rng = np.random.default_rng(8)
    worst_err = worst_bc = 0.0
    x = np.linspace(0, 1, 17)
    for k in range(10):
        n = 2 if k < 5 else 4
        bc = random_conditions(n, 800 + k)
        assert classify(bc).regular
        coeffs = [Coefficient.from_poly(rng.standard_normal(3) + 1j * rng.standard_normal(3)) for _ in range(n - 1)]
        expr = DifferentialExpression(n, coeffs)
        lam = complex(rng.uniform(-30, 30), rng.uniform(-30, 30))
        a, b, w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        f = lambda t, a=a, b=b, w=w: a * np.cos(3 * w.real * t) + b * np.exp(t)  # noqa: E731
        gf = GreenFunction(bc, expr, lam)
        y = gf.apply(f, x)
        ref = solve_bvp_direct(bc, expr, lam, f, x).values[0]
        l2 = lambda v: np.sqrt(np.mean(np.abs(v) ** 2))  # noqa: E731
        # relative to both the solution and the data, whichever is stricter
        worst_err = max(worst_err, l2(y - ref) / min(l2(ref), l2(f(x))))
        worst_bc = max(worst_bc, np.max(np.abs(gf.boundary_residuals(f))))
    ok = worst_err <= 1e-6 and worst_bc <= 1e-8
    verdict(8, ok, f"max relative L2 error {worst_err:.2e}, max |U_j(Gf)| {worst_bc:.2e}")
    assert ok


def test_criterion_09_almost_orthogonality(verdict):
    worst = 0.0
    for n in (2, 3, 4):
        for t in (0.1, 0.3, 0.5, 0.7, 0.9):
            arg_rho = (1 + t) * np.pi / n
            for r in GRID:
                fss = FundamentalSystem(n, r * np.exp(1j * arg_rho))
                worst = max(worst, gram_condition(fss))
    ok = worst <= 100
    verdict(9, ok, f"max Gram condition number {worst:.2f} (n = 2, 3, 4; |rho| in [20, 320])")
    assert ok


def test_criterion_10_algebraic_identities(verdict):
    problems = [load(name) for name in ("dirichlet", "periodic", "cauchy0", "potential4")]
    problems += [(DifferentialExpression(4), bc) for bc in selfadjoint_samples()]
    problems += [(DifferentialExpression(n), random_conditions(n, 900 + n)) for n in (2, 3, 4, 5, 6)]
    fres = max(fourier_factor_residual(bc) for _, bc in problems)
    worst = 0.0
    for expr, bc in problems:
        for r in (7.3, 40.0):
            cm = char_matrix(bc, expr, point_on_ray(1.0, r, bc.n))
            rel = cm.residuals / np.maximum(np.linalg.norm(cm.rhs, axis=0), 1e-300)
            worst = max(worst, float(np.max(rel)) / cm.conditioning)
    ok = fres <= 1e-12 and worst <= 1e-10
    verdict(10, ok, f"Fourier factor residual {fres:.1e}; max solve residual / conditioning {worst:.1e}")
    assert ok


def test_criterion_11_degenerate_detection(verdict):
    _, bc = load("cauchy0")
    rep = classify(bc)
    eig = eigenvalues_in(bc, None, (-20, 20, -20, 20))
    ok = abs(rep.theta_forward) <= 1e-12 and rep.classification == IRREGULAR and eig == []
    verdict(11, ok, f"Theta={abs(rep.theta_forward):.1e} {rep.classification}, {len(eig)} zeros in |rho| <= 20")
    assert ok


def test_criterion_12_periodic(verdict):
    _, bc = load("periodic")
    rep = classify(bc)
    F = strong_regularity_polynomial(bc)
    s = np.linspace(-3, 3, 13)
    ferr = np.max(np.abs(F(s) - 2 * (1 - s) ** 2))
    ok = (abs(theta(bc, 1)[0] - 2) <= 1e-12 and ferr <= 1e-12 and rep.classification == REGULAR
          and rep.regular and not F.two_simple_roots)
    verdict(12, ok, f"Theta={rep.theta_forward:.3g} max|F - 2(1-s)^2|={ferr:.1e} roots={F.roots} "
                    f"{rep.classification}")
    assert ok
