"""Differential expressions and two-point boundary conditions.

Derivatives are always ``D = -i d/dx``. A boundary vector collects the values
``(D^0 y(0), ..., D^{n-1} y(0), D^0 y(1), ..., D^{n-1} y(1))`` so a single
condition is a row of length ``2n``; column ``end * n + order`` holds the
coefficient of ``D^order y(end)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

RANK_TOL = 1e-10


class ProblemError(ValueError):
    """Malformed or inconsistent problem data.

    ``location`` is a dotted path into the problem document when the error
    comes from parsing, otherwise ``None``.
    """

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class DegenerateConditionsError(ProblemError):
    pass


# ---------------------------------------------------------------------------
# differential expression


@dataclass(frozen=True)
class Coefficient:
    """One coefficient function ``p_k`` on [0, 1].

    ``kind`` is one of ``"zero"``, ``"callable"``, ``"grid"`` or ``"poly"``.
    Grids are sampled values interpolated linearly, polys hold ascending
    power coefficients.
    """

    kind: str = "zero"
    func: Callable | None = None
    x: np.ndarray | None = None
    values: np.ndarray | None = None
    poly: np.ndarray | None = None

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def from_callable(cls, func):
        return cls("callable", func=func)

    @classmethod
    def from_grid(cls, x, values):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=complex)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2:
            raise ProblemError("grid coefficient needs matching 1-d x and value arrays of length >= 2")
        order = np.argsort(x)
        x, values = x[order], values[order]
        if np.any(np.diff(x) <= 0):
            raise ProblemError("grid abscissae must be distinct")
        if x[0] > 0 or x[-1] < 1:
            raise ProblemError("grid must cover [0, 1]")
        return cls("grid", x=_frozen(x), values=_frozen(values))

    @classmethod
    def from_poly(cls, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
        return cls("poly", poly=_frozen(c))

    @property
    def is_zero(self) -> bool:
        if self.kind == "zero":
            return True
        if self.kind == "grid":
            return not np.any(self.values)
        if self.kind == "poly":
            return not np.any(self.poly)
        return False

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros(x.shape, dtype=complex)
        if self.kind == "callable":
            return np.broadcast_to(np.asarray(self.func(x), dtype=complex), x.shape).copy()
        if self.kind == "grid":
            return np.interp(x, self.x, self.values.real) + 1j * np.interp(x, self.x, self.values.imag)
        return np.polynomial.polynomial.polyval(x, self.poly)


@dataclass(frozen=True)
class DifferentialExpression:
    """``l(y) = D^n y + sum_{k<=n-2} p_k(x) D^k y`` on [0, 1]."""

    n: int
    coefficients: tuple[Coefficient, ...] = ()

    def __post_init__(self):
        if self.n < 2:
            raise ProblemError("order n must be at least 2")
        coeffs = tuple(self.coefficients)
        if not coeffs:
            coeffs = tuple(Coefficient.zero() for _ in range(self.n - 1))
        if len(coeffs) != self.n - 1:
            raise ProblemError(f"expected {self.n - 1} coefficients p_0..p_{self.n - 2}, got {len(coeffs)}")
        coeffs = tuple(c if isinstance(c, Coefficient) else _coerce_coefficient(c) for c in coeffs)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def pure(cls, n):
        return cls(n)

    @property
    def is_essential(self) -> bool:
        return all(c.is_zero for c in self.coefficients)

    def coefficient_values(self, x) -> np.ndarray:
        """Array of shape ``(n-1,) + x.shape`` with ``p_k(x)``."""
        x = np.asarray(x, dtype=float)
        return np.array([c(x) for c in self.coefficients])

    def check_finite(self, points=257):
        grid = np.linspace(0.0, 1.0, points)
        vals = self.coefficient_values(grid)
        bad = [k for k in range(self.n - 1) if not np.all(np.isfinite(vals[k]))]
        if bad:
            raise ProblemError(f"coefficient p_{bad[0]} is not finite on [0, 1]")


def _coerce_coefficient(c):
    if c is None or (np.isscalar(c) and c == 0):
        return Coefficient.zero()
    if callable(c):
        return Coefficient.from_callable(c)
    if np.isscalar(c):
        return Coefficient.from_poly([c])
    raise ProblemError(f"cannot interpret coefficient {c!r}")


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class RawCondition:
    """A condition ``sum coef * D^order y(end) = 0`` before normalization."""

    terms: tuple[tuple[int, int, complex], ...]

    def __post_init__(self):
        terms = tuple((int(e), int(j), complex(c)) for e, j, c in self.terms)
        for e, j, _ in terms:
            if e not in (0, 1):
                raise ProblemError(f"end must be 0 or 1, got {e}")
            if j < 0:
                raise ProblemError(f"order must be non-negative, got {j}")
        if not any(c != 0 for _, _, c in terms):
            raise ProblemError("condition has no nonzero coefficient")
        object.__setattr__(self, "terms", terms)

    def row(self, n) -> np.ndarray:
        r = np.zeros(2 * n, dtype=complex)
        for e, j, c in self.terms:
            if j >= n:
                raise ProblemError(f"order {j} exceeds n-1 = {n - 1}")
            r[e * n + j] += c
        return r

    @classmethod
    def from_row(cls, row):
        row = np.asarray(row, dtype=complex)
        n = row.size // 2
        terms = [(idx // n, idx % n, row[idx]) for idx in range(2 * n) if row[idx] != 0]
        return cls(tuple(terms))


@dataclass(frozen=True)
class ConditionBlock:
    """The ``r_j`` conditions whose highest derivative order is ``j``.

    ``b0``/``b1`` are the leading coefficients of ``D^j y(0)``/``D^j y(1)``;
    ``tail0``/``tail1`` have shape ``(r_j, j)`` and hold the lower orders.
    """

    order: int
    b0: np.ndarray
    b1: np.ndarray
    tail0: np.ndarray
    tail1: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.b0, dtype=complex)).size
        b0 = _frozen(np.atleast_1d(np.asarray(self.b0, dtype=complex)).reshape(r))
        b1 = _frozen(np.atleast_1d(np.asarray(self.b1, dtype=complex)).reshape(r))
        t0 = np.zeros((r, self.order), dtype=complex) if self.tail0 is None else np.asarray(self.tail0, dtype=complex)
        t1 = np.zeros((r, self.order), dtype=complex) if self.tail1 is None else np.asarray(self.tail1, dtype=complex)
        object.__setattr__(self, "b0", b0)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "tail0", _frozen(t0.reshape(r, self.order)))
        object.__setattr__(self, "tail1", _frozen(t1.reshape(r, self.order)))

    @property
    def rank(self) -> int:
        return self.b0.size

    @property
    def has_tail(self) -> bool:
        return bool(np.any(self.tail0) or np.any(self.tail1))

    def leading(self) -> np.ndarray:
        """The ``r_j x 2`` matrix ``(b_j^0 b_j^1)``."""
        return np.column_stack([self.b0, self.b1])


@dataclass(frozen=True)
class BoundaryConditionSet:
    """Normalized two-point boundary conditions, grouped by leading order.

    ``blocks[j]`` is the order-``j`` block (possibly empty). Construction does
    not enforce the normal-form invariants; use :func:`validate`.
    """

    n: int
    blocks: tuple[ConditionBlock, ...]

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if len(blocks) != self.n:
            raise ProblemError(f"expected {self.n} blocks, got {len(blocks)}")
        for j, blk in enumerate(blocks):
            if blk.order != j:
                raise ProblemError(f"block {j} carries order {blk.order}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_leading(cls, n, leading: dict):
        """Build from ``{order: (b0, b1)}`` without tails; missing orders are empty."""
        blocks = []
        for j in range(n):
            b0, b1 = leading.get(j, ([], []))
            blocks.append(ConditionBlock(j, b0, b1, None, None))
        return cls(n, tuple(blocks))

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(b.rank for b in self.blocks)

    @property
    def row_orders(self) -> np.ndarray:
        """Leading order of each condition row, rows sorted by ascending order."""
        return np.repeat(np.arange(self.n), self.ranks)

    @property
    def has_tails(self) -> bool:
        return any(b.has_tail for b in self.blocks)

    def leading_b(self, superscript: int) -> np.ndarray:
        """All ``b_j^i`` stacked in row order (length ``sum r_j``)."""
        parts = [b.b0 if superscript == 0 else b.b1 for b in self.blocks]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)

    def matrix(self, with_tails=True) -> np.ndarray:
        """The ``(sum r_j) x 2n`` condition matrix in boundary-vector columns."""
        n = self.n
        rows = []
        for blk in self.blocks:
            for r in range(blk.rank):
                row = np.zeros(2 * n, dtype=complex)
                row[blk.order] = blk.b0[r]
                row[n + blk.order] = blk.b1[r]
                if with_tails:
                    row[: blk.order] = blk.tail0[r]
                    row[n : n + blk.order] = blk.tail1[r]
                rows.append(row)
        if not rows:
            return np.zeros((0, 2 * n), dtype=complex)
        return np.array(rows)

    def coefficient_arrays(self, with_tails=True):
        """Per-row coefficients of ``D^m y(0)`` and ``D^m y(1)``, each ``(rows, n)``."""
        U = self.matrix(with_tails)
        return U[:, : self.n], U[:, self.n :]

    def raw_conditions(self) -> list[RawCondition]:
        return [RawCondition.from_row(row) for row in self.matrix()]


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# normalization


def normalize_conditions(raw: Sequence[RawCondition] | np.ndarray, n: int | None = None) -> BoundaryConditionSet:
    """Reduce ``n`` raw conditions to the normalized block form.

    Orders are processed from ``n-1`` down to ``0``. At each order the
    remaining rows are eliminated with complete pivoting on the two leading
    columns (``D^j y(0)``, ``D^j y(1)``); the pivot rows form the order-``j``
    block. A rank-two block is reduced to the identity, a rank-one row is
    scaled so that its largest leading coefficient equals 1.

    ``raw`` may also be a ``rows x 2n`` array, in which case ``n`` is inferred.
    """
    if isinstance(raw, np.ndarray):
        U = np.array(raw, dtype=complex)
        if n is None:
            n = U.shape[1] // 2
    else:
        raw = list(raw)
        if n is None:
            n = len(raw)
        U = np.array([c.row(n) for c in raw], dtype=complex).reshape(len(raw), 2 * n)
    if U.shape != (n, 2 * n):
        raise ProblemError(f"need exactly n = {n} conditions on 2n = {2 * n} boundary values, got shape {U.shape}")

    sv = np.linalg.svd(U, compute_uv=False)
    tol = RANK_TOL * (sv[0] if sv.size else 1.0)
    if sv.size == 0 or sv[0] == 0 or np.sum(sv > tol) < n:
        raise DegenerateConditionsError("degenerate condition set: conditions are linearly dependent")

    active = list(range(n))
    blocks: list[ConditionBlock | None] = [None] * n
    for j in range(n - 1, -1, -1):
        cols = [j, n + j]
        chosen = []
        for _ in range(2):
            cand = [i for i in active if i not in chosen]
            if not cand:
                break
            sub = np.abs(U[np.ix_(cand, cols)])
            pos = int(np.argmax(sub))
            i_piv, c_piv = cand[pos // 2], cols[pos % 2]
            if sub.flat[pos] <= tol:
                break
            piv = U[i_piv, c_piv]
            for i in active:
                if i != i_piv and U[i, c_piv] != 0:
                    U[i] -= (U[i, c_piv] / piv) * U[i_piv]
                    U[i, c_piv] = 0
            chosen.append(i_piv)
        for i in active:
            if i not in chosen:
                U[i, cols] = 0
        rows = _canonical_block(U, chosen, cols)
        for i, row in zip(chosen, rows):
            U[i] = row
        blocks[j] = ConditionBlock(
            j,
            [U[i, j] for i in _order_rows(U, chosen, cols)],
            [U[i, n + j] for i in _order_rows(U, chosen, cols)],
            [U[i, :j] for i in _order_rows(U, chosen, cols)],
            [U[i, n : n + j] for i in _order_rows(U, chosen, cols)],
        )
        active = [i for i in active if i not in chosen]

    return BoundaryConditionSet(n, tuple(blocks))


def _canonical_block(U, chosen, cols):
    if len(chosen) == 2:
        lead = U[np.ix_(chosen, cols)]
        return np.linalg.solve(lead, U[chosen])
    if len(chosen) == 1:
        row = U[chosen[0]]
        lead = row[cols]
        return [row / lead[np.argmax(np.abs(lead))]]
    return []


def _order_rows(U, chosen, cols):
    # rank-two blocks: row with the unit entry at end 0 comes first
    if len(chosen) == 2:
        return sorted(chosen, key=lambda i: int(np.argmax(np.abs(U[i, cols]))))
    return list(chosen)


def essential_part(expr: DifferentialExpression, bc: BoundaryConditionSet):
    """Drop all coefficients ``p_k`` and all lower-order condition tails."""
    blocks = tuple(ConditionBlock(b.order, b.b0, b.b1, None, None) for b in bc.blocks)
    return DifferentialExpression(expr.n), BoundaryConditionSet(bc.n, blocks)


@dataclass
class ValidationReport:
    rank_sum: int
    block_ranks: tuple[int, ...]
    numerical_ranks: tuple[int, ...]
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def validate(bc: BoundaryConditionSet) -> ValidationReport:
    """Check the normal-form invariants; failures are collected, not raised."""
    failures = []
    numerical = []
    for blk in bc.blocks:
        if blk.rank == 0:
            numerical.append(0)
            continue
        sv = np.linalg.svd(blk.leading(), compute_uv=False)
        rank = int(np.sum(sv > RANK_TOL))
        numerical.append(rank)
        if rank != blk.rank:
            failures.append(f"rank deficiency in order {blk.order}")
        if blk.rank == 2 and not np.allclose(blk.leading(), np.eye(2), atol=RANK_TOL):
            failures.append(f"order {blk.order} block of rank 2 is not the identity")
        if blk.rank > 2:
            failures.append(f"order {blk.order} block has rank {blk.rank} > 2")
    total = sum(bc.ranks)
    if total != bc.n:
        failures.append(f"rank sum {total} != n = {bc.n}")
    return ValidationReport(total, bc.ranks, tuple(numerical), failures)


def same_row_space(U1, U2, tol=1e-9) -> bool:
    """Whether two condition matrices impose the same constraints."""
    from scipy.linalg import null_space

    U1 = np.asarray(U1, dtype=complex)
    U2 = np.asarray(U2, dtype=complex)
    K1 = null_space(U1, rcond=RANK_TOL)
    K2 = null_space(U2, rcond=RANK_TOL)
    if K1.shape != K2.shape:
        return False
    scale1 = np.linalg.norm(U1, 2)
    scale2 = np.linalg.norm(U2, 2)
    return bool(
        np.linalg.norm(U1 @ K2) <= tol * scale1 and np.linalg.norm(U2 @ K1) <= tol * scale2
    )


# ---------------------------------------------------------------------------
# problem documents


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ProblemError(f"duplicate field {key!r}")
        out[key] = value
    return out


def decode_complex(value, location="") -> complex:
    if isinstance(value, dict):
        extra = set(value) - {"re", "im"}
        if extra or "re" not in value:
            raise ProblemError("complex number must be {re, im}", location)
        return complex(_number(value["re"], location + ".re"), _number(value.get("im", 0.0), location + ".im"))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_number(value[0], location + "[0]"), _number(value[1], location + "[1]"))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    raise ProblemError("complex number must be {re, im} or [re, im]", location)


def _number(v, location):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProblemError("expected a number", location)
    return float(v)


def _integer(v, location):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ProblemError("expected an integer", location)
    return v


def parse_problem(document) -> tuple[DifferentialExpression, list[RawCondition]]:
    """Decode a problem document (JSON text, bytes or an already loaded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document, object_pairs_hook=_reject_duplicates)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"malformed JSON: {exc.msg} at line {exc.lineno} column {exc.colno}") from exc
    if not isinstance(document, dict):
        raise ProblemError("problem document must be a JSON object")
    unknown = set(document) - {"n", "coefficients", "conditions", "meta"}
    if unknown:
        raise ProblemError(f"unknown field {sorted(unknown)[0]!r}")
    if "n" not in document:
        raise ProblemError("missing field 'n'")
    n = _integer(document["n"], "n")
    if n < 2:
        raise ProblemError("n must be at least 2", "n")

    coeffs = _parse_coefficients(document.get("coefficients", "zero"), n)
    expr = DifferentialExpression(n, coeffs)

    conds = document.get("conditions")
    if not isinstance(conds, list):
        raise ProblemError("'conditions' must be a list", "conditions")
    raw = []
    for ci, cond in enumerate(conds):
        loc = f"conditions[{ci}]"
        if isinstance(cond, dict):
            if set(cond) - {"terms"}:
                raise ProblemError(f"unknown field {sorted(set(cond) - {'terms'})[0]!r}", loc)
            terms_doc = cond.get("terms")
        else:
            terms_doc = cond
        if not isinstance(terms_doc, list) or not terms_doc:
            raise ProblemError("condition needs a nonempty list of terms", loc)
        terms = []
        for ti, term in enumerate(terms_doc):
            tloc = f"{loc}.terms[{ti}]"
            terms.append(_parse_term(term, n, tloc))
        try:
            raw.append(RawCondition(tuple(terms)))
        except ProblemError as exc:
            raise ProblemError(str(exc), loc) from None
    return expr, raw


def _parse_term(term, n, loc):
    if isinstance(term, dict):
        allowed = {"end", "order", "re", "im", "coef"}
        if set(term) - allowed:
            raise ProblemError(f"unknown field {sorted(set(term) - allowed)[0]!r}", loc)
        for key in ("end", "order"):
            if key not in term:
                raise ProblemError(f"missing field {key!r}", loc)
        end = _integer(term["end"], loc + ".end")
        order = _integer(term["order"], loc + ".order")
        if "coef" in term:
            if "re" in term or "im" in term:
                raise ProblemError("give either coef or re/im", loc)
            coef = decode_complex(term["coef"], loc + ".coef")
        else:
            coef = complex(_number(term.get("re", 0.0), loc + ".re"), _number(term.get("im", 0.0), loc + ".im"))
    elif isinstance(term, list) and len(term) in (3, 4):
        end = _integer(term[0], loc + "[0]")
        order = _integer(term[1], loc + "[1]")
        coef = decode_complex(term[2], loc + "[2]") if len(term) == 3 else complex(
            _number(term[2], loc + "[2]"), _number(term[3], loc + "[3]")
        )
    else:
        raise ProblemError("term must be an object {end, order, re, im} or a list", loc)
    if end not in (0, 1):
        raise ProblemError("end must be 0 or 1", loc + ".end")
    if order < 0:
        raise ProblemError("order must be non-negative", loc + ".order")
    if order >= n:
        raise ProblemError(f"order exceeds n-1 = {n - 1}", loc + ".order")
    return end, order, coef


def _parse_coefficients(doc, n):
    if doc == "zero" or doc is None:
        return ()
    if isinstance(doc, dict):
        if set(doc) != {"poly"}:
            raise ProblemError("coefficient object must have exactly the field 'poly'", "coefficients")
        polys = doc["poly"]
        if not isinstance(polys, list) or len(polys) != n - 1:
            raise ProblemError(f"'poly' must list {n - 1} coefficient polynomials", "coefficients.poly")
        out = []
        for k, poly in enumerate(polys):
            loc = f"coefficients.poly[{k}]"
            if not isinstance(poly, list):
                raise ProblemError("polynomial must be a list of complex coefficients", loc)
            out.append(Coefficient.from_poly([decode_complex(c, f"{loc}[{i}]") for i, c in enumerate(poly)] or [0]))
        return tuple(out)
    if isinstance(doc, list):
        if len(doc) != n - 1:
            raise ProblemError(f"expected {n - 1} coefficient grids", "coefficients")
        out = []
        for k, grid in enumerate(doc):
            loc = f"coefficients[{k}]"
            if grid == "zero" or grid is None:
                out.append(Coefficient.zero())
                continue
            if not isinstance(grid, list) or not all(isinstance(s, list) and len(s) == 3 for s in grid):
                raise ProblemError("grid must be a list of [x, re, im] samples", loc)
            xs = [_number(s[0], f"{loc}[{i}][0]") for i, s in enumerate(grid)]
            vals = [complex(_number(s[1], f"{loc}[{i}][1]"), _number(s[2], f"{loc}[{i}][2]")) for i, s in enumerate(grid)]
            try:
                out.append(Coefficient.from_grid(xs, vals))
            except ProblemError as exc:
                raise ProblemError(str(exc), loc) from None
        return tuple(out)
    raise ProblemError("coefficients must be 'zero', a list of grids or {'poly': [...]}", "coefficients")


def problem_document(bc: BoundaryConditionSet | Sequence[RawCondition], n: int | None = None, meta=None) -> dict:
    """Serialize conditions (essential expression) to a problem document."""
    if isinstance(bc, BoundaryConditionSet):
        n = bc.n
        rows = bc.matrix()
    else:
        rows = np.array([c.row(n) for c in bc])
    conditions = []
    for row in rows:
        terms = [
            {"end": idx // n, "order": idx % n, "re": float(row[idx].real), "im": float(row[idx].imag)}
            for idx in range(2 * n)
            if row[idx] != 0
        ]
        conditions.append({"terms": terms})
    doc = {"n": n, "coefficients": "zero", "conditions": conditions}
    if meta is not None:
        doc["meta"] = meta
    return doc
