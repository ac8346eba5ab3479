"""Command-line front end.

Exit codes: 0 success, 1 bad input, 2 irregular problem (analyze, ray-sweep),
3 irregular sample found by verify-krein.
"""
from __future__ import annotations

import argparse
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .dissipativity import (
    dissipativity_test,
    sample_dissipative_bc,
    sample_selfadjoint_bc,
    task_seed,
)
from .green import (
    GreenFunction,
    IrregularLimitError,
    NearEigenvalueError,
    char_matrix_from_data,
    char_matrix_limit,
    characteristic_data,
)
from .model import ProblemError, normalize_conditions, parse_problem, problem_document, validate
from .regularity import IRREGULAR, TOL_THETA, classify, fourier_factor_residual, normalized_margin, theta
from .roots import eigenvalues_in
from .serialize import csv_text, dumps
from .spectral import FundamentalSystem, decay_profile, gram_condition, point_on_ray

EXIT_OK, EXIT_INPUT, EXIT_IRREGULAR, EXIT_COUNTEREXAMPLE = 0, 1, 2, 3
DEFAULT_GRID = "20,40,80,160,320"


class UsageError(Exception):
    pass


def workers() -> int:
    env = os.environ.get("BSPEC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"BSPEC_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def pmap(func, items):
    items = list(items)
    nw = min(workers(), len(items)) or 1
    if nw == 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(func, items))


_PI = re.compile(r"^\s*([+-]?[\d.]*)\s*\*?\s*pi\s*(?:/\s*([\d.]+))?\s*$")


def parse_angle(text: str) -> float:
    """A float, or a multiple of pi such as ``3pi/2``."""
    m = _PI.match(text.lower())
    if m:
        num = m.group(1)
        k = float(num) if num not in ("", "+", "-") else (-1.0 if num == "-" else 1.0)
        return k * np.pi / (float(m.group(2)) if m.group(2) else 1.0)
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"cannot parse angle {text!r}") from None


def parse_floats(text: str, count=None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"expected {count} numbers, got {len(vals)}")
    return vals


def parse_complex(text: str) -> complex:
    parts = parse_floats(text)
    if len(parts) == 1:
        return complex(parts[0])
    if len(parts) == 2:
        return complex(parts[0], parts[1])
    raise UsageError(f"complex value must be 're' or 're,im', got {text!r}")


def parse_orders(text: str) -> list[int]:
    try:
        orders = sorted({int(v) for v in text.split(",") if v.strip()})
    except ValueError:
        raise UsageError(f"orders must be integers, got {text!r}") from None
    if not orders or min(orders) < 2:
        raise UsageError("orders must be integers >= 2")
    return orders


def load_problem(path):
    if path == "-":
        text = sys.stdin.read()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ProblemError(f"cannot read {path}: {exc.strerror}") from None
    expr, raw = parse_problem(text)
    bc = normalize_conditions(raw, expr.n)
    rep = validate(bc)
    if not rep.ok:
        raise ProblemError("; ".join(rep.failures))
    return expr, bc


def emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# report builders


def regularity_document(bc, tol_theta):
    rep = classify(bc, tol_theta)
    F = None
    if rep.F_coefficients is not None:
        F = {"c2": rep.F_coefficients[0], "c1": rep.F_coefficients[1], "c0": rep.F_coefficients[2],
             "roots": list(rep.F_roots), "simple": list(rep.F_simple)}
    return rep, {
        "classification": rep.classification,
        "regular": rep.regular,
        "half_regular": rep.half_regular,
        "q": rep.q,
        "theta_forward": rep.theta_forward,
        "theta_swapped": rep.theta_swapped,
        "margin_forward": rep.margin_forward,
        "margin_swapped": rep.margin_swapped,
        "F": F,
        "fourier_residual": fourier_factor_residual(bc),
        "notes": rep.notes,
    }


def theta_rows(bc):
    rows = []
    for p in range(bc.n + 1):
        f, fm = theta(bc, p)
        s, sm = theta(bc, p, swapped=True)
        rows.append({"p": p, "forward": f, "swapped": s,
                     "margin_forward": normalized_margin(f, fm.entries),
                     "margin_swapped": normalized_margin(s, sm.entries)})
    return rows


def problem_summary(expr, bc):
    return {"n": bc.n, "ranks": list(bc.ranks), "row_orders": bc.row_orders.tolist(),
            "has_tails": bc.has_tails, "essential_expression": expr.is_essential}


def dissipativity_document(bc):
    rep = dissipativity_test(bc)
    return rep, {"verdict": rep.verdict, "restricted_eigenvalues": rep.restricted_eigenvalues,
                 "margin": rep.margin, "anti_dissipative": rep.anti_dissipative, "warnings": rep.warnings}


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args):
    expr, bc = load_problem(args.problem)
    rep, reg = regularity_document(bc, args.tol_theta)
    _, dis = dissipativity_document(bc)
    doc = {"version": __version__, "problem": problem_summary(expr, bc), "regularity": reg,
           "theta_table": theta_rows(bc), "dissipativity": dis}
    emit(dumps(doc), args.out)
    return EXIT_IRREGULAR if rep.classification == IRREGULAR else EXIT_OK


def cmd_theta(args):
    _, bc = load_problem(args.problem)
    rows = theta_rows(bc)
    if args.format == "csv":
        header = ["p", "forward_re", "forward_im", "swapped_re", "swapped_im", "margin_forward", "margin_swapped"]
        body = [[r["p"], r["forward"].real, r["forward"].imag, r["swapped"].real, r["swapped"].imag,
                 r["margin_forward"], r["margin_swapped"]] for r in rows]
        emit(csv_text(header, body), args.out)
    else:
        emit(dumps({"version": __version__, "n": bc.n, "theta": rows}), args.out)
    return EXIT_OK


def fitted_order(radii, errors):
    """Slope of ``-log(err)`` against ``log|rho|`` over rows with a positive error."""
    pts = [(np.log(r), np.log(e)) for r, e in zip(radii, errors) if e is not None and e > 0 and np.isfinite(e)]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    return float(-np.polyfit(x, y, 1)[0])


def sweep_point(expr, bc, arg_lambda, radius, A_inf, resolvent):
    sp = point_on_ray(arg_lambda, radius, bc.n)
    fss = FundamentalSystem(expr, sp.rho)
    data = characteristic_data(bc, fss)
    row = {"abs_rho": float(radius), "arg_rho": float(np.angle(sp.rho)), "p": fss.p,
           "status": "ok", "A": None, "a_deviation": None, "delta_deviation": data.deviation,
           "gram_condition": gram_condition(fss), "resolvent": None}
    try:
        cm = char_matrix_from_data(data)
    except NearEigenvalueError:
        row["status"] = "near-eigenvalue"
        return row
    row["A"] = cm.entries
    row["a_deviation"] = float(np.linalg.norm(cm.entries - A_inf))
    if resolvent:
        row["resolvent"] = GreenFunction(bc, expr, fss=fss).operator_norm()
    return row


def cmd_ray_sweep(args):
    expr, bc = load_problem(args.problem)
    arg_lambda = parse_angle(args.arg_lambda)
    grid = parse_floats(args.rho_grid)
    if not grid or any(r <= 0 for r in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("--rho-grid must be positive and strictly increasing")
    rep = classify(bc, args.tol_theta)
    profile = decay_profile(point_on_ray(arg_lambda, grid[0], bc.n))
    if rep.classification == IRREGULAR:
        print("error: problem is irregular; the limit matrix is undefined", file=sys.stderr)
        return EXIT_IRREGULAR
    try:
        A_inf = char_matrix_limit(bc, profile)
    except IrregularLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IRREGULAR
    rows = pmap(lambda r: sweep_point(expr, bc, arg_lambda, r, A_inf, not args.no_resolvent), grid)
    order = fitted_order([r["abs_rho"] for r in rows], [r["a_deviation"] for r in rows])
    summary = {"arg_lambda": arg_lambda, "p": profile.p, "A_limit_norm": float(np.linalg.norm(A_inf)),
               "fitted_order": order, "points": len(rows)}
    if args.format == "json":
        emit(dumps({"version": __version__, "A_limit": A_inf, "rows": rows, "summary": summary}), args.out)
        return EXIT_OK
    n = bc.n
    header = ["abs_rho", "arg_rho"]
    for k in range(n):
        for t in range(n):
            header += [f"A_{k}{t}_re", f"A_{k}{t}_im"]
    header += ["a_deviation", "delta_deviation", "gram_condition", "resolvent", "status"]
    body = []
    for r in rows:
        line = [r["abs_rho"], r["arg_rho"]]
        A = r["A"]
        for k in range(n):
            for t in range(n):
                line += ["", ""] if A is None else [float(A[k, t].real), float(A[k, t].imag)]
        line += ["" if r[c] is None else r[c] for c in ("a_deviation", "delta_deviation", "gram_condition", "resolvent")]
        line.append(r["status"])
        body.append(line)
    fo = "none" if order is None else f"{order:.17g}"
    emit(csv_text(header, body, [f"summary fitted_order={fo} p={profile.p} arg_lambda={arg_lambda:.17g}"]), args.out)
    return EXIT_OK


def principal(rho: complex, n: int) -> bool:
    """Whether ``rho`` lies on the branch ``0 <= arg rho < 2 pi / n``."""
    arg = float(np.angle(rho))
    tol = 1e-9
    if arg < -tol:
        arg += 2 * np.pi
    arg = max(arg, 0.0)
    return arg < 2 * np.pi / n - tol


def cmd_eig(args):
    expr, bc = load_problem(args.problem)
    rect = parse_floats(args.rect, 4)
    found = eigenvalues_in(bc, expr, rect, args.exclude_radius)
    if not args.all_branches:
        found = [e for e in found if principal(e.rho, bc.n)]
    found.sort(key=lambda e: (round(abs(e.lam), 9), np.angle(e.lam)))
    items = [{"rho": e.rho, "lambda": e.lam, "multiplicity": e.multiplicity} for e in found]
    if args.format == "csv":
        body = [[e.rho.real, e.rho.imag, e.lam.real, e.lam.imag, e.multiplicity] for e in found]
        emit(csv_text(["rho_re", "rho_im", "lambda_re", "lambda_im", "multiplicity"], body), args.out)
    else:
        emit(dumps(items), args.out)
    return EXIT_OK


def cmd_green(args):
    expr, bc = load_problem(args.problem)
    lam = parse_complex(args.lam)
    gf = GreenFunction(bc, expr, lam)
    xs = parse_floats(args.x) if args.x else list(np.linspace(0.0, 1.0, args.points))
    xis = parse_floats(args.xi) if args.xi else list(np.linspace(0.0, 1.0, args.points))
    evals = [gf.evaluate(x, xi) for x in xs for xi in xis]
    if args.format == "csv":
        body = [[e.x, e.xi, e.g0_part.real, e.g0_part.imag, e.correction_part.real, e.correction_part.imag,
                 e.total.real, e.total.imag] for e in evals]
        header = ["x", "xi", "g0_re", "g0_im", "correction_re", "correction_im", "G_re", "G_im"]
        emit(csv_text(header, body), args.out)
    else:
        doc = {"version": __version__, "lambda": lam, "rho": gf.rho, "p": gf.p, "A": gf.A,
               "values": [{"x": e.x, "xi": e.xi, "g0": e.g0_part, "correction": e.correction_part, "G": e.total}
                          for e in evals]}
        emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_dissip(args):
    if args.action == "test":
        if not args.problem:
            raise UsageError("dissip test needs a problem file")
        expr, bc = load_problem(args.problem)
        _, dis = dissipativity_document(bc)
        emit(dumps({"version": __version__, "problem": problem_summary(expr, bc), "dissipativity": dis}), args.out)
        return EXIT_OK
    orders = parse_orders(args.orders)
    mode = "self-adjoint" if args.self_adjoint else "dissipative"

    def draw(task):
        n, idx = task
        ss = task_seed(args.seed, n, idx)
        if args.self_adjoint:
            bc, sigma = sample_selfadjoint_bc(n, ss), 1.0
        else:
            bc, sigma = sample_dissipative_bc(n, ss, args.sigma)
        return problem_document(bc, meta={"seed": args.seed, "index": idx, "sigma": sigma, "mode": mode})

    tasks = [(n, i) for n in orders for i in range(args.samples)]
    emit(dumps(pmap(draw, tasks)), args.out)
    return EXIT_OK


def _krein_task(seed, n, idx, mode, tol_theta):
    ss = task_seed(seed, n, idx)
    if mode == "self-adjoint":
        bc, sigma = sample_selfadjoint_bc(n, ss), 1.0
    else:
        bc, sigma = sample_dissipative_bc(n, ss)
    rep = classify(bc, tol_theta)
    margin = min(rep.margin_forward, rep.margin_swapped) if n % 2 else rep.margin_forward
    return {"n": n, "index": idx, "sigma": sigma, "classification": rep.classification,
            "margin": margin, "ranks": "-".join(map(str, bc.ranks)), "bc": bc}


def cmd_verify_krein(args):
    orders = parse_orders(args.orders)
    if any(n % 2 for n in orders) and not args.allow_odd:
        raise UsageError("orders must be even (pass --allow-odd to explore odd orders)")
    tasks = [(n, i) for n in orders for i in range(args.samples)]
    results = pmap(lambda t: _krein_task(args.seed, t[0], t[1], args.mode, args.tol_theta), tasks)
    results.sort(key=lambda r: (r["n"], r["index"]))
    edges = np.arange(-16.0, 1.0, 1.0)
    per_order = []
    bad = []
    for n in orders:
        rs = [r for r in results if r["n"] == n]
        margins = np.array([r["margin"] for r in rs])
        logm = np.log10(np.clip(margins, 1e-300, None))
        counts, _ = np.histogram(np.clip(logm, edges[0], edges[-1]), bins=edges)
        classes, patterns = {}, {}
        for r in rs:
            classes[r["classification"]] = classes.get(r["classification"], 0) + 1
            patterns[r["ranks"]] = patterns.get(r["ranks"], 0) + 1
        irregular = [r for r in rs if r["classification"] == IRREGULAR]
        bad.extend(irregular)
        per_order.append({
            "n": n, "samples": len(rs), "irregular": len(irregular),
            "classifications": dict(sorted(classes.items())),
            "rank_patterns": dict(sorted(patterns.items())),
            "min_margin": float(margins.min()) if len(rs) else None,
            "histogram": {"log10_edges": edges, "counts": counts},
        })
    summary = {"version": __version__, "mode": args.mode, "seed": args.seed, "samples_per_order": args.samples,
               "tol_theta": args.tol_theta, "orders": per_order,
               "total_irregular": sum(o["irregular"] for o in per_order)}
    if bad:
        dump = [problem_document(r["bc"], meta={"seed": args.seed, "index": r["index"], "sigma": r["sigma"],
                                                  "mode": args.mode}) for r in bad]
        summary["counterexamples"] = dump
        emit(dumps(summary), args.out)
        sys.stderr.write("irregular sample(s) found:\n" + dumps(dump))
        return EXIT_COUNTEREXAMPLE
    emit(dumps(summary), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bspec", description="Birkhoff regularity and spectral tools for two-point problems")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, problem=True, fmt=False):
        if problem:
            p.add_argument("problem", help="problem document (JSON), '-' for stdin")
        p.add_argument("--out", help="write output to this file instead of stdout")
        if fmt:
            p.add_argument("--format", choices=("json", "csv"), default=fmt)

    p = sub.add_parser("analyze", help="regularity, Theta table and dissipativity report")
    common(p)
    p.add_argument("--tol-theta", type=float, default=TOL_THETA)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("theta", help="Theta_p determinants for p = 0..n")
    common(p, fmt="json")
    p.set_defaults(func=cmd_theta)

    p = sub.add_parser("ray-sweep", help="characteristic matrix along a ray arg(lambda) = const")
    common(p, fmt="csv")
    p.add_argument("--arg-lambda", default="3pi/2")
    p.add_argument("--rho-grid", default=DEFAULT_GRID)
    p.add_argument("--tol-theta", type=float, default=TOL_THETA)
    p.add_argument("--no-resolvent", action="store_true", help="skip the resolvent norm column")
    p.set_defaults(func=cmd_ray_sweep)

    p = sub.add_parser("eig", help="eigenvalues from zeros of the characteristic determinant")
    common(p, fmt="json")
    p.add_argument("--rect", default="-20,20,-20,20", help="re_min,re_max,im_min,im_max in the rho-plane")
    p.add_argument("--exclude-radius", type=float, default=1.0)
    p.add_argument("--all-branches", action="store_true", help="keep every rho, not just 0 <= arg rho < 2pi/n")
    p.set_defaults(func=cmd_eig)

    p = sub.add_parser("green", help="Green's function values")
    common(p, fmt="json")
    p.add_argument("--lambda", dest="lam", required=True, help="re or re,im")
    p.add_argument("--x", help="comma-separated x values")
    p.add_argument("--xi", help="comma-separated xi values")
    p.add_argument("--points", type=int, default=5, help="grid size when --x/--xi are omitted")
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("dissip", help="dissipativity test or random dissipative conditions")
    p.add_argument("action", choices=("test", "sample"))
    p.add_argument("problem", nargs="?")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--orders", default="2")
    p.add_argument("--sigma", type=float, default=None, help="contraction norm (default: uniform in [0, 1])")
    p.add_argument("--self-adjoint", action="store_true")
    p.set_defaults(func=cmd_dissip)

    p = sub.add_parser("verify-krein", help="seeded campaign: dissipative conditions must be regular")
    common(p, problem=False)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--orders", default="2,4")
    p.add_argument("--mode", choices=("dissipative", "self-adjoint"), default="dissipative")
    p.add_argument("--tol-theta", type=float, default=TOL_THETA)
    p.add_argument("--allow-odd", action="store_true")
    p.set_defaults(func=cmd_verify_krein)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "samples", 1) is not None and getattr(args, "samples", 1) < 0:
        ap.error("--samples must be non-negative")
    try:
        return args.func(args)
    except (ProblemError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NearEigenvalueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
