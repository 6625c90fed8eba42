"""Parametric affine expressions and cell partitions of the clock space.

An expression is  sum_x alpha_x * x + beta + gamma * p  with rational
coefficients (beta may be an infinity sentinel), where p is the formal
perturbation parameter, always taken positive and arbitrarily small.

A partition is described by a set of (scale-normalized, finite) expressions.
A cell is an assignment of a sign in {<, =, >} to every expression whose
solution set inside R_{>=0}^X is nonempty for every sufficiently small
positive p; the cell's eta is the supremum of the feasible p-interval.
Every partition implicitly contains the axis expressions (x) and the ceiling
expressions (x - M), so the box structure is always part of the arrangement.

All arithmetic is exact: Fractions at the interface, cleared-denominator
integers inside the Fourier-Motzkin elimination.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Iterable, Optional, Sequence, Union

from .model import INF, NEG_INF, ExtRat, frac_str

SIGN_LT = "<"
SIGN_EQ = "="
SIGN_GT = ">"

# row kinds for the elimination: equality, non-strict (>= 0), strict (> 0)
EQ, GE, GT = 0, 1, 2


class DiagonalInput(ValueError):
    """diag_intersection was given a diagonal expression."""


class SolverInternalError(AssertionError):
    """An internal invariant failed; maps to CLI exit code 3."""


@dataclass(frozen=True)
class ClockSpace:
    """The clock names and the common bound M; fixes expression arity."""

    clock_names: tuple[str, ...]
    bound: int

    @property
    def n(self) -> int:
        return len(self.clock_names)


class ParamExpr:
    """sum alpha_x * x + beta + gamma * p; immutable."""

    __slots__ = ("alpha", "beta", "gamma")

    def __init__(self, alpha: Sequence[ExtRat], beta: ExtRat, gamma: ExtRat = 0):
        if beta in (INF, NEG_INF):
            if any(a != 0 for a in alpha) or gamma != 0:
                raise SolverInternalError("infinite expressions must be pure constants")
            self.alpha = tuple(Fraction(0) for _ in alpha)
            self.beta = beta
            self.gamma = Fraction(0)
        else:
            self.alpha = tuple(Fraction(a) for a in alpha)
            self.beta = Fraction(beta)
            self.gamma = Fraction(gamma)

    # -- structure ---------------------------------------------------------

    def is_finite(self) -> bool:
        return self.beta not in (INF, NEG_INF)

    def coeff_sum(self) -> Fraction:
        return sum(self.alpha, Fraction(0))

    def is_diagonal(self) -> bool:
        return self.is_finite() and self.coeff_sum() == 0

    def is_valuation_free(self) -> bool:
        return all(a == 0 for a in self.alpha)

    def is_zero(self) -> bool:
        return self.is_finite() and self.is_valuation_free() and self.beta == 0 and self.gamma == 0

    def key(self):
        return (self.alpha, self.beta, self.gamma)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamExpr) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    # -- evaluation and arithmetic ----------------------------------------

    def evaluate(self, v: Sequence[Fraction], p: Fraction) -> ExtRat:
        if not self.is_finite():
            return self.beta
        return sum((a * x for a, x in zip(self.alpha, v)), Fraction(0)) + self.beta + self.gamma * p

    def add(self, other: "ParamExpr") -> "ParamExpr":
        if not self.is_finite() or not other.is_finite():
            if self.is_finite():
                return other
            if other.is_finite():
                return self
            if self.beta != other.beta:
                raise SolverInternalError("formed (+inf) + (-inf)")
            return self
        return ParamExpr(
            tuple(a + b for a, b in zip(self.alpha, other.alpha)),
            self.beta + other.beta,
            self.gamma + other.gamma,
        )

    def add_const(self, c: ExtRat) -> "ParamExpr":
        if c in (INF, NEG_INF) or not self.is_finite():
            if self.is_finite():
                return ParamExpr(tuple(Fraction(0) for _ in self.alpha), c)
            if c in (INF, NEG_INF) and c != self.beta:
                raise SolverInternalError("formed (+inf) + (-inf)")
            return self
        return ParamExpr(self.alpha, self.beta + Fraction(c), self.gamma)

    def sub(self, other: "ParamExpr") -> "ParamExpr":
        return self.add(other.scale(-1))

    def scale(self, factor: ExtRat) -> "ParamExpr":
        if not self.is_finite():
            if factor == 0:
                raise SolverInternalError("scaled an infinity by zero")
            return self if factor > 0 else ParamExpr(self.alpha, INF if self.beta == NEG_INF else NEG_INF)
        f = Fraction(factor)
        return ParamExpr(tuple(a * f for a in self.alpha), self.beta * f, self.gamma * f)

    def unreset(self, resets: Iterable[int]) -> "ParamExpr":
        """Zero the coefficients of the reset clocks (composition with Y := 0)."""
        rs = set(resets)
        return ParamExpr(
            tuple(Fraction(0) if i in rs else a for i, a in enumerate(self.alpha)),
            self.beta,
            self.gamma,
        )

    def shift_2p(self) -> "ParamExpr":
        """Compose with v -> v + 2p*1: adds 2 * coeff_sum to gamma."""
        if not self.is_finite():
            return self
        return ParamExpr(self.alpha, self.beta, self.gamma + 2 * self.coeff_sum())

    def at_p0(self) -> "ParamExpr":
        if not self.is_finite():
            return self
        return ParamExpr(self.alpha, self.beta, 0)

    # -- normalization -----------------------------------------------------

    def normalize(self) -> tuple["ParamExpr", int]:
        """Scale to content-reduced integers, first nonzero of
        (alpha..., gamma, beta) positive. Returns (normalized, flip) with
        flip in {+1, -1}; flip = -1 means the sign of values is reversed."""
        if not self.is_finite():
            raise SolverInternalError("cannot normalize an infinite expression")
        nums = list(self.alpha) + [self.gamma, self.beta]
        if all(x == 0 for x in nums):
            return ParamExpr(self.alpha, 0, 0), 1
        from math import lcm

        denom = 1
        for x in nums:
            denom = lcm(denom, x.denominator)
        ints = [int(x * denom) for x in nums]
        content = 0
        for x in ints:
            content = gcd(content, abs(x))
        ints = [x // content for x in ints]
        first = next(x for x in ints if x != 0)
        flip = 1
        if first < 0:
            ints = [-x for x in ints]
            flip = -1
        n = len(self.alpha)
        return ParamExpr(tuple(Fraction(x) for x in ints[:n]), ints[n + 1], ints[n]), flip

    def int_coeffs(self) -> tuple[int, ...]:
        """Cleared-denominator integer vector (alpha..., gamma, beta)."""
        from math import lcm

        nums = list(self.alpha) + [self.gamma, self.beta]
        denom = 1
        for x in nums:
            denom = lcm(denom, x.denominator)
        return tuple(int(x * denom) for x in nums)

    # -- printing ----------------------------------------------------------

    def text(self, clock_names: Sequence[str]) -> str:
        if self.beta == INF:
            return "+inf"
        if self.beta == NEG_INF:
            return "-inf"
        terms: list[tuple[Fraction, str]] = []
        for a, name in zip(self.alpha, clock_names):
            if a != 0:
                terms.append((a, name))
        if self.beta != 0:
            terms.append((self.beta, ""))
        if self.gamma != 0:
            terms.append((self.gamma, "p"))
        if not terms:
            return "0"
        # lead with the first positive term so the rendering starts cleanly
        if terms[0][0] < 0:
            j = next((k for k, (c, _) in enumerate(terms) if c > 0), None)
            if j is not None:
                terms = [terms[j]] + terms[:j] + terms[j + 1 :]
        parts = []
        for i, (coef, var) in enumerate(terms):
            mag = abs(coef)
            if not var:
                body = str(mag)
            elif mag == 1:
                body = var
            elif mag.denominator == 1:
                body = f"{mag}{var}"
            elif mag.numerator == 1:
                body = f"{var}/{mag.denominator}"
            else:
                body = f"{mag.numerator}{var}/{mag.denominator}"
            if i == 0:
                parts.append(body if coef > 0 else f"-{body}")
            else:
                parts.append(("+ " if coef > 0 else "- ") + body)
        return " ".join(parts)

    def __repr__(self) -> str:
        names = [f"x{i + 1}" for i in range(len(self.alpha))]
        return f"<{self.text(names)}>"


def const_expr(space: ClockSpace, value: ExtRat) -> ParamExpr:
    return ParamExpr(tuple(Fraction(0) for _ in range(space.n)), value)


def axis_expr(space: ClockSpace, i: int) -> ParamExpr:
    alpha = [Fraction(0)] * space.n
    alpha[i] = Fraction(1)
    return ParamExpr(tuple(alpha), 0)


def ceiling_expr(space: ClockSpace, i: int) -> ParamExpr:
    """The ceiling border M - x, stored in normalized direction x - M."""
    alpha = [Fraction(0)] * space.n
    alpha[i] = Fraction(1)
    return ParamExpr(tuple(alpha), -space.bound)


def always_exprs(space: ClockSpace) -> list[ParamExpr]:
    out = []
    for i in range(space.n):
        out.append(axis_expr(space, i))
        out.append(ceiling_expr(space, i))
    return out


def diag_intersection(e: ParamExpr, e2: ParamExpr) -> ParamExpr:
    """The diagonal expression through the intersection of two non-diagonal
    hyperplanes:  sum (A a'_x - A' a_x) x + (A b' - A' b) + (A c' - A' c) p."""
    for arg in (e, e2):
        if not arg.is_finite():
            raise DiagonalInput("diag_intersection needs finite expressions")
        if arg.is_diagonal():
            raise DiagonalInput("diag_intersection needs non-diagonal expressions")
    A, A2 = e.coeff_sum(), e2.coeff_sum()
    alpha = tuple(A * b - A2 * a for a, b in zip(e.alpha, e2.alpha))
    raw = ParamExpr(alpha, A * e2.beta - A2 * e.beta, A * e2.gamma - A2 * e.gamma)
    lead = next((a for a in raw.alpha if a != 0), None)
    if lead is None:
        return raw  # coincident hyperplanes: the zero expression
    inv = 1 / lead  # monic in the first participating clock
    return ParamExpr(
        tuple(a * inv for a in raw.alpha), raw.beta * inv, raw.gamma * inv
    )


# ---------------------------------------------------------------------------
# exact Fourier-Motzkin over integers


def _reduce_row(coeffs: tuple[int, ...], kind: int) -> tuple[tuple[int, ...], int]:
    content = 0
    for x in coeffs:
        content = gcd(content, abs(x))
    if content > 1:
        coeffs = tuple(x // content for x in coeffs)
    return coeffs, kind


def _row_from(expr: ParamExpr, sign: str, n: int) -> tuple[tuple[int, ...], int]:
    ints = expr.int_coeffs()  # (alpha..., gamma, beta)
    if sign == SIGN_LT:
        ints = tuple(-x for x in ints)
    kind = EQ if sign == SIGN_EQ else GT
    return _reduce_row(ints, kind)


def _const_feasible(coeffs: tuple[int, ...], kind: int) -> Optional[bool]:
    """For a row with no clock and no p coefficient, decide it; None if
    the row still involves a variable."""
    if any(c != 0 for c in coeffs[:-1]):
        return None
    c = coeffs[-1]
    if kind == EQ:
        return c == 0
    if kind == GE:
        return c >= 0
    return c > 0


@lru_cache(maxsize=200000)
def _eliminate_clocks(rows: frozenset, n_clocks: int) -> Optional[frozenset]:
    """Eliminate all clock variables from integer rows over
    (x_1..x_n, p, const); returns rows over (p, const) or None if infeasible.
    Row layout: (coeffs, kind)."""
    work = set(rows)

    # substitute out equalities that involve a clock; once a clock is pinned
    # by an equality and eliminated everywhere else, the equality itself is
    # consumed (the pinned clock exists for any p, its domain row was
    # substituted along with the rest)
    while True:
        pivot = None
        for coeffs, kind in work:
            if kind == EQ:
                for j in range(n_clocks):
                    if coeffs[j] != 0:
                        pivot = (coeffs, j)
                        break
                if pivot:
                    break
        if pivot is None:
            break
        pc, j = pivot
        work.discard((pc, EQ))
        pj = pc[j]
        sign_pj = 1 if pj > 0 else -1
        abs_pj = abs(pj)
        out = set()
        for coeffs, kind in work:
            rj = coeffs[j]
            if rj == 0:
                out.add((coeffs, kind))
                continue
            newc = tuple(c * abs_pj - q * (rj * sign_pj) for c, q in zip(coeffs, pc))
            row = _reduce_row(newc, kind)
            ok = _const_feasible(*row)
            if ok is False:
                return None
            if ok is None:
                out.add(row)
        work = out

    for j in range(n_clocks):
        lowers = []
        uppers = []
        keep = set()
        for coeffs, kind in work:
            cj = coeffs[j]
            if cj == 0:
                keep.add((coeffs, kind))
            elif cj > 0:
                lowers.append((coeffs, kind))
            else:
                uppers.append((coeffs, kind))
        for lc, lk in lowers:
            for uc, uk in uppers:
                a, b = lc[j], uc[j]  # a > 0, b < 0
                newc = tuple(lx * (-b) + ux * a for lx, ux in zip(lc, uc))
                kind = GT if (lk == GT or uk == GT) else GE
                row = _reduce_row(newc, kind)
                ok = _const_feasible(*row)
                if ok is False:
                    return None
                if ok is None:
                    keep.add(row)
        work = keep

    return frozenset(work)


@dataclass(frozen=True)
class PInterval:
    """A rational interval of feasible p values (already clipped to p > 0)."""

    lo: Fraction
    lo_open: bool
    hi: ExtRat
    hi_open: bool

    @property
    def zero_attached(self) -> bool:
        return self.lo == 0 and self.lo_open

    @property
    def sup(self) -> ExtRat:
        return self.hi

    def contains(self, p: Fraction) -> bool:
        if p < self.lo or (p == self.lo and self.lo_open):
            return False
        if self.hi != INF and (p > self.hi or (p == self.hi and self.hi_open)):
            return False
        return True


def _interval_from_p_rows(p_rows: Iterable[tuple[tuple[int, ...], int]]) -> Optional[PInterval]:
    lo, lo_open = Fraction(0), True
    hi: ExtRat = INF
    hi_open = True
    for coeffs, kind in p_rows:
        g, c = coeffs[-2], coeffs[-1]
        if g == 0:
            ok = _const_feasible(coeffs, kind)
            if ok is False:
                return None
            continue
        r = Fraction(-c, g)
        if kind == EQ:
            if r < lo or (r == lo and lo_open):
                return None
            if hi != INF and (r > hi or (r == hi and hi_open)):
                return None
            lo, lo_open, hi, hi_open = r, False, r, False
        elif g > 0:  # p > r (strict) or p >= r
            strict = kind == GT
            if r > lo or (r == lo and strict and not lo_open):
                lo, lo_open = r, strict
        else:  # g < 0: p < r or p <= r
            strict = kind == GT
            if hi == INF or r < hi or (r == hi and strict and not hi_open):
                hi, hi_open = r, strict
    if hi != INF:
        if lo > hi:
            return None
        if lo == hi and (lo_open or hi_open):
            return None
    return PInterval(lo, lo_open, hi, hi_open)


Constraint = tuple[ParamExpr, str]


def project_to_p(space: ClockSpace, constraints: Iterable[Constraint]) -> Optional[PInterval]:
    """The exact set {p > 0 : exists v satisfying all constraints}, as one
    rational interval (linear constraints give a single interval) or None.
    The caller is responsible for including domain constraints (x >= 0)."""
    rows = set()
    for expr, sign in constraints:
        if not expr.is_finite():
            raise SolverInternalError("project_to_p needs finite expressions")
        row = _row_from(expr, sign, space.n)
        ok = _const_feasible(*row)
        if ok is False:
            return None
        if ok is None:
            rows.add(row)
    p_rows = _eliminate_clocks(frozenset(rows), space.n)
    if p_rows is None:
        return None
    return _interval_from_p_rows(p_rows)


def domain_rows(space: ClockSpace) -> list[tuple[tuple[int, ...], int]]:
    out = []
    for i in range(space.n):
        coeffs = [0] * (space.n + 2)
        coeffs[i] = 1
        out.append((tuple(coeffs), GE))
    return out


def project_with_domain(space: ClockSpace, constraints: Iterable[Constraint]) -> Optional[PInterval]:
    rows = set(domain_rows(space))
    for expr, sign in constraints:
        row = _row_from(expr, sign, space.n)
        ok = _const_feasible(*row)
        if ok is False:
            return None
        if ok is None:
            rows.add(row)
    p_rows = _eliminate_clocks(frozenset(rows), space.n)
    if p_rows is None:
        return None
    return _interval_from_p_rows(p_rows)


# ---------------------------------------------------------------------------
# explicit feasible points (witness generation, by back-substitution)


def feasible_point(
    space: ClockSpace, constraints: Iterable[Constraint], p: Fraction
) -> Optional[tuple[Fraction, ...]]:
    """An exact point of R_{>=0}^X satisfying the constraints at the given p,
    or None. Strict constraints are honored strictly."""
    n = space.n
    rows: list[tuple[tuple[Fraction, ...], int]] = []
    for i in range(n):
        coeffs = [Fraction(0)] * (n + 1)
        coeffs[i] = Fraction(1)
        rows.append((tuple(coeffs), GE))
    for expr, sign in constraints:
        if not expr.is_finite():
            raise SolverInternalError("feasible_point needs finite expressions")
        vec = list(expr.alpha) + [expr.beta + expr.gamma * p]
        if sign == SIGN_LT:
            vec = [-x for x in vec]
        rows.append((tuple(vec), EQ if sign == SIGN_EQ else GT))

    # eliminate equalities by substitution, recording pivots
    subs: list[tuple[int, tuple[Fraction, ...]]] = []
    active = rows
    while True:
        pivot = None
        for coeffs, kind in active:
            if kind == EQ:
                for j in range(n):
                    if coeffs[j] != 0:
                        pivot = (coeffs, j)
                        break
                if pivot:
                    break
        if pivot is None:
            break
        pc, j = pivot
        subs.append((j, pc))
        nxt = []
        for coeffs, kind in active:
            if coeffs is pc and kind == EQ:
                continue
            rj = coeffs[j]
            if rj == 0:
                nxt.append((coeffs, kind))
                continue
            factor = rj / pc[j]
            newc = tuple(c - factor * q for c, q in zip(coeffs, pc))
            if all(x == 0 for x in newc[:n]):
                cval = newc[-1]
                if kind == EQ and cval != 0:
                    return None
                if kind == GE and cval < 0:
                    return None
                if kind == GT and cval <= 0:
                    return None
                continue
            nxt.append((newc, kind))
        active = nxt

    # Fourier-Motzkin layers
    layers: list[tuple[int, list, list]] = []
    remaining = [j for j in range(n) if not any(j == s[0] for s in subs)]
    for j in remaining:
        lowers, uppers, keep = [], [], []
        for coeffs, kind in active:
            cj = coeffs[j]
            if cj == 0:
                keep.append((coeffs, kind))
            elif cj > 0:
                lowers.append((coeffs, kind))
            else:
                uppers.append((coeffs, kind))
        layers.append((j, lowers, uppers))
        for lc, lk in lowers:
            for uc, uk in uppers:
                a, b = lc[j], uc[j]
                newc = tuple(lx * (-b) + ux * a for lx, ux in zip(lc, uc))
                kind = GT if (lk == GT or uk == GT) else GE
                if all(x == 0 for x in newc[:n]):
                    cval = newc[-1]
                    if kind == GE and cval < 0:
                        return None
                    if kind == GT and cval <= 0:
                        return None
                    continue
                keep.append((newc, kind))
        active = keep

    for coeffs, kind in active:
        cval = coeffs[-1]
        if kind == EQ and cval != 0:
            return None
        if kind == GE and cval < 0:
            return None
        if kind == GT and cval <= 0:
            return None

    # back-substitute through the layers in reverse
    values: dict[int, Fraction] = {}

    def eval_rest(coeffs) -> Fraction:
        # j is never assigned yet when this runs, so summing over the
        # assigned variables skips it automatically
        total = coeffs[-1]
        for j2, val in values.items():
            total += coeffs[j2] * val
        return total

    for j, lowers, uppers in reversed(layers):
        lo: ExtRat = NEG_INF
        lo_strict = False
        hi: ExtRat = INF
        hi_strict = False
        for coeffs, kind in lowers:  # coeffs[j] > 0: x_j >(=) -rest/cj
            bound = -eval_rest(coeffs) / coeffs[j]
            if bound > lo or (bound == lo and kind == GT):
                lo, lo_strict = bound, kind == GT
        for coeffs, kind in uppers:
            bound = -eval_rest(coeffs) / coeffs[j]
            if bound < hi or (bound == hi and kind == GT):
                hi, hi_strict = bound, kind == GT
        if lo == NEG_INF and hi == INF:
            values[j] = Fraction(0)
        elif lo == NEG_INF:
            values[j] = hi - 1
        elif hi == INF:
            values[j] = lo + 1 if lo_strict else lo
        else:
            if lo > hi or (lo == hi and (lo_strict or hi_strict)):
                return None
            values[j] = lo if lo == hi else (lo + hi) / 2
    for j, pc in reversed(subs):
        rest = pc[-1] + sum(pc[j2] * values[j2] for j2 in range(n) if j2 != j and pc[j2] != 0)
        values[j] = -rest / pc[j]

    point = tuple(values.get(j, Fraction(0)) for j in range(n))
    return point


# ---------------------------------------------------------------------------
# cell enumeration by exact arrangement sampling


def _pstar(exprs: Sequence[ParamExpr]) -> Fraction:
    """A positive rational strictly below every positive critical value of
    the arrangement (critical values come from <= 3-row integer
    combinations, so their magnitude is bounded away from 0)."""
    C = 1
    for e in exprs:
        for x in e.int_coeffs():
            C = max(C, abs(x))
    return Fraction(1, 8 * C**4 + 8)


def _sample_points_1d(lines: list[tuple[Fraction, Fraction]]) -> list[tuple[Fraction, ...]]:
    roots = sorted({-c / a for a, c in lines if a != 0})
    pts: list[Fraction] = []
    if not roots:
        pts = [Fraction(0), Fraction(1)]
    else:
        pts.extend(roots)
        pts.append(roots[0] - 1)
        pts.append(roots[-1] + 1)
        for r1, r2 in zip(roots, roots[1:]):
            pts.append((r1 + r2) / 2)
    return [(x,) for x in pts if x >= 0]


def _reduce_hom(x: int, y: int, d: int) -> tuple[int, int, int]:
    """Canonical homogeneous coordinates (x/d, y/d) with d > 0, gcd 1."""
    if d < 0:
        x, y, d = -x, -y, -d
    g = gcd(gcd(x, y), d)
    if g > 1:
        x, y, d = x // g, y // g, d // g
    return x, y, d


def _sample_points_2d(
    lines: list[tuple[int, int, int]]
) -> list[tuple[int, int, int]]:
    """Vertices, on-line samples and side offsets of a 2D line arrangement,
    in homogeneous integer coordinates (x, y, den); together they realize
    every sign vector that has points in the closed positive quadrant (the
    axes are among the lines)."""
    m = len(lines)
    verts: list[list[tuple[int, int, int]]] = [[] for _ in range(m)]
    points: set[tuple[int, int, int]] = set()
    for i in range(m):
        a1, a2, c = lines[i]
        for j in range(i + 1, m):
            b1, b2, d = lines[j]
            det = a1 * b2 - a2 * b1
            if det == 0:
                continue
            pt = _reduce_hom(-c * b2 + d * a2, -a1 * d + b1 * c, det)
            verts[i].append(pt)
            verts[j].append(pt)
            points.add(pt)

    on_line: list[tuple[int, tuple[int, int, int]]] = []
    for i in range(m):
        a1, a2, c = lines[i]
        if a1 == 0 and a2 == 0:
            continue  # constant row: no locus, its sign is fixed pointwise
        d1, d2 = -a2, a1  # direction along the line
        if verts[i]:
            keyed = sorted(
                {(Fraction(d1 * X + d2 * Y, D), (X, Y, D)) for X, Y, D in set(verts[i])}
            )
            params = [k for k, _ in keyed]
            pts = [pt for _, pt in keyed]
            norm2 = d1 * d1 + d2 * d2
            samples = [pts[0], pts[-1]]
            X, Y, D = pts[0]
            samples.append(_reduce_hom(X * norm2 - d1 * D, Y * norm2 - d2 * D, D * norm2))
            X, Y, D = pts[-1]
            samples.append(_reduce_hom(X * norm2 + d1 * D, Y * norm2 + d2 * D, D * norm2))
            for k in range(len(pts) - 1):
                if params[k] != params[k + 1]:
                    X1, Y1, D1 = pts[k]
                    X2, Y2, D2 = pts[k + 1]
                    samples.append(
                        _reduce_hom(X1 * D2 + X2 * D1, Y1 * D2 + Y2 * D1, 2 * D1 * D2)
                    )
        else:
            if a2 != 0:
                base = _reduce_hom(0, -c, a2)
            else:
                base = _reduce_hom(-c, 0, a1)
            X, Y, D = base
            samples = [base, _reduce_hom(X + d1 * D, Y + d2 * D, D)]
        for q in samples:
            on_line.append((i, q))
            points.add(q)

    # offsets to both sides of each on-line sample, small enough to stay
    # inside the neighboring faces; the offset bound eps = en/ed starts at 1
    for i, (X, Y, D) in on_line:
        a1, a2, _ = lines[i]
        en, ed = 1, 1
        for j in range(m):
            if j == i:
                continue
            b1, b2, d = lines[j]
            vn = b1 * X + b2 * Y + d * D  # line j at the point, times den
            if vn == 0:
                continue
            rate = abs(b1 * a1 + b2 * a2)
            cn, cd = abs(vn), 2 * D * (rate + 1)
            if en * cd > cn * ed:
                en, ed = cn, cd
        points.add(_reduce_hom(X * ed + a1 * en * D, Y * ed + a2 * en * D, D * ed))
        points.add(_reduce_hom(X * ed - a1 * en * D, Y * ed - a2 * en * D, D * ed))

    if not points:
        points.add((0, 0, 1))  # every row is constant: one sample suffices
    return [pt for pt in points if pt[0] >= 0 and pt[1] >= 0]


# line arrangements recur heavily across operator applications; the realized
# sign vectors are a pure function of the integer lines (and, for the
# eliminating fallback, of the expressions), so they are memoized globally
_realized_cache: dict = {}


def realized_vectors(
    space: ClockSpace, exprs: tuple[ParamExpr, ...], pstar: Fraction
) -> list[str]:
    """All sign vectors realized in the closed quadrant at p = pstar."""
    if space.n > 2:
        key = (space.n, space.bound, pstar, tuple(e.key() for e in exprs))
        hit = _realized_cache.get(key)
        if hit is None:
            hit = _realized_cache[key] = _dfs_vectors(space, exprs)
        return list(hit)

    # clear denominators at p = pstar: rows (alpha..., gamma, beta) become
    # integer lines (pd*alpha..., beta*pd + gamma*pn)
    pn, pd = pstar.numerator, pstar.denominator
    lines = []
    for e in exprs:
        row = e.int_coeffs()
        lines.append(tuple(pd * a for a in row[:-2]) + (row[-1] * pd + row[-2] * pn,))
    key = (space.n, tuple(lines))
    hit = _realized_cache.get(key)
    if hit is not None:
        return list(hit)

    if space.n == 1:
        pts1 = _sample_points_1d([(Fraction(A), Fraction(C)) for A, C in lines])
        pts = [(x.numerator, x.denominator) for (x,) in pts1]
    else:
        pts = _sample_points_2d(lines)
    seen = set()
    for pt in pts:
        sig = []
        for L in lines:
            # homogeneous dot product: coords pair with coefficients, the
            # denominator with the constant term
            v = 0
            for a, xnum in zip(L, pt):
                v += a * xnum
            sig.append(SIGN_GT if v > 0 else SIGN_LT if v < 0 else SIGN_EQ)
        seen.add("".join(sig))
    out = sorted(seen)
    _realized_cache[key] = out
    return list(out)


def _dfs_vectors(space: ClockSpace, exprs: tuple[ParamExpr, ...]) -> list[str]:
    """Fallback sign-vector enumeration with incremental infeasibility
    pruning; exponential, used only beyond two clocks."""
    out: list[str] = []
    prefix: list[str] = []

    def feasible_prefix() -> bool:
        cons = list(zip(exprs[: len(prefix)], prefix))
        iv = project_with_domain(space, cons)
        return iv is not None and iv.zero_attached

    def rec(i: int) -> None:
        if i == len(exprs):
            out.append("".join(prefix))
            return
        for sign in (SIGN_LT, SIGN_EQ, SIGN_GT):
            prefix.append(sign)
            if feasible_prefix():
                rec(i + 1)
            prefix.pop()

    rec(0)
    return sorted(out)


# ---------------------------------------------------------------------------
# partitions


class Partition:
    """An ordered expression list with its nonempty cells and eta bounds."""

    def __init__(
        self,
        space: ClockSpace,
        exprs: tuple[ParamExpr, ...],
        eta: Fraction,
        cells: tuple[str, ...],
        cell_eta: dict[str, Fraction],
    ):
        self.space = space
        self.exprs = exprs
        self.eta = eta
        self.cells = cells
        self.cell_eta = cell_eta
        self._index: dict = {}
        for i, e in enumerate(exprs):
            self._index[e.key()] = (i, 1)
        for i, e in enumerate(exprs):
            neg = e.scale(-1)
            if neg.key() not in self._index:
                self._index[neg.key()] = (i, -1)
        self._witness_cache: dict = {}
        self._find_cache: dict = {}

    def find_member(self, e: ParamExpr) -> Optional[tuple[int, int]]:
        """Locate e among the members up to positive scaling; returns
        (index, flip) where flip = -1 if stored with the opposite sign."""
        if not e.is_finite():
            return None
        ck = e.key()
        if ck in self._find_cache:
            return self._find_cache[ck]
        norm, flip = e.normalize()
        hit = self._index.get(norm.key())
        res = None if hit is None else (hit[0], flip * hit[1])
        self._find_cache[ck] = res
        return res

    def signs_at(self, v: Sequence[Fraction], p: Fraction) -> str:
        sig = []
        for e in self.exprs:
            val = e.evaluate(v, p)
            sig.append(SIGN_GT if val > 0 else SIGN_LT if val < 0 else SIGN_EQ)
        return "".join(sig)

    def cell_of(self, v: Sequence[Fraction], p: Fraction) -> str:
        sig = self.signs_at(v, p)
        if sig not in self.cell_eta:
            raise SolverInternalError(f"no cell for sign vector {sig}")
        return sig

    def constraints_of(self, cell: str) -> list[Constraint]:
        return [(e, s) for e, s in zip(self.exprs, cell)]

    def witness(self, cell: str, p: Fraction) -> tuple[Fraction, ...]:
        key = (cell, p)
        if key not in self._witness_cache:
            pt = feasible_point(self.space, self.constraints_of(cell), p)
            if pt is None:
                raise InfeasibleAtP(f"cell {cell} empty at p = {p}")
            self._witness_cache[key] = pt
        return self._witness_cache[key]

    def to_json(self) -> dict:
        return {
            "exprs": [e.text(self.space.clock_names) for e in self.exprs],
            "eta": frac_str(self.eta),
            "cells": [
                {"signs": c, "eta": frac_str(self.cell_eta[c])} for c in self.cells
            ],
        }


class InfeasibleAtP(ValueError):
    """Witness requested at a p beyond the cell's feasible interval."""


def cell_status(
    space: ClockSpace, exprs: Sequence[ParamExpr], signs: str
) -> Optional[ExtRat]:
    """None when the sign vector is not a cell; otherwise the supremum of
    its feasible p-interval (INF when unbounded)."""
    iv = project_with_domain(space, list(zip(exprs, signs)))
    if iv is None or not iv.zero_attached:
        return None
    return iv.sup


def _dedup_normalize(exprs: Iterable[ParamExpr]) -> list[ParamExpr]:
    out: list[ParamExpr] = []
    seen = set()
    for e in exprs:
        if not e.is_finite() or e.is_valuation_free():
            continue  # constants carry no border information
        norm, _ = e.normalize()
        if norm.key() in seen:
            continue
        seen.add(norm.key())
        out.append(norm)
    return out


def base_exprs(space: ClockSpace, exprs: Iterable[ParamExpr] = ()) -> tuple[ParamExpr, ...]:
    """Axes and ceilings first, then the given expressions, normalized and
    deduplicated."""
    return tuple(_dedup_normalize(list(always_exprs(space)) + list(exprs)))


def enumerate_cells(
    space: ClockSpace,
    exprs: Iterable[ParamExpr],
    eta_cap: Fraction = Fraction(1),
) -> Partition:
    """Classify all small-p-nonempty sign vectors over the expressions
    (axes/ceilings auto-inserted) and compute all eta bounds."""
    members = base_exprs(space, exprs)
    cells = raw_cells(space, members)
    cell_eta: dict[str, Fraction] = {}
    eta = Fraction(eta_cap)
    for c in cells:
        sup = cell_sup(space, members, c)
        bound = eta_cap if sup == INF else min(Fraction(sup), eta_cap)
        cell_eta[c] = bound
        eta = min(eta, bound)
    return Partition(space, members, eta, tuple(cells), cell_eta)


def raw_cells(space: ClockSpace, members: tuple[ParamExpr, ...]) -> list[str]:
    """The sign vectors realized for all sufficiently small p > 0."""
    return realized_vectors(space, members, _pstar(members))


def cell_sup(space: ClockSpace, members: tuple[ParamExpr, ...], cell: str) -> ExtRat:
    iv = project_with_domain(space, list(zip(members, cell)))
    if iv is None or not iv.zero_attached:
        raise SolverInternalError(f"sign vector {cell} is not a cell")
    return iv.sup


def refine_atomic(P: Partition) -> Partition:
    """Close the expression set under pairwise diagonal intersection of its
    non-diagonal members; the result is atomic (every cell has at most two
    non-diagonal borders)."""
    nd = [e for e in P.exprs if not e.is_diagonal()]
    extra: list[ParamExpr] = []
    for i in range(len(nd)):
        for j in range(i + 1, len(nd)):
            d = diag_intersection(nd[i], nd[j])
            if not d.is_valuation_free():
                extra.append(d)
    return enumerate_cells(P.space, list(P.exprs) + extra, P.eta)


def intersect_partitions(P1: Partition, P2: Partition) -> Partition:
    if P1.space != P2.space:
        raise ValueError("partitions live on different clock spaces")
    return enumerate_cells(P1.space, list(P1.exprs) + list(P2.exprs), min(P1.eta, P2.eta))


def cell_witness(P: Partition, cell: str, p: Fraction) -> tuple[Fraction, ...]:
    if cell not in P.cell_eta:
        raise ValueError(f"unknown cell {cell}")
    if p > P.cell_eta[cell]:
        raise InfeasibleAtP(f"p = {p} exceeds the cell bound {P.cell_eta[cell]}")
    return P.witness(cell, p)


def restrict_signs(child: Partition, parent_exprs: Sequence[ParamExpr], cell: str) -> str:
    """Project a cell of a finer partition onto the sign vector of a subset
    of member expressions (up to scaling)."""
    out = []
    for e in parent_exprs:
        hit = child.find_member(e)
        if hit is None:
            raise SolverInternalError("parent expression missing from child partition")
        idx, flip = hit
        s = cell[idx]
        if flip < 0:
            s = SIGN_GT if s == SIGN_LT else SIGN_LT if s == SIGN_GT else SIGN_EQ
        out.append(s)
    return "".join(out)


def border_count(P: Partition, cell: str, diagonal: Optional[bool] = None) -> int:
    """Number of member expressions that genuinely border the cell (their
    removal changes the cell's solution set for small p); optionally count
    only (non-)diagonal ones."""
    count = 0
    for i, e in enumerate(P.exprs):
        if diagonal is not None and e.is_diagonal() != diagonal:
            continue
        sign = cell[i]
        others = [(f, s) for k, (f, s) in enumerate(zip(P.exprs, cell)) if k != i]
        if sign == SIGN_EQ:
            # dropping an equality always enlarges the set unless implied
            iv = project_with_domain(P.space, others + [(e, SIGN_GT)])
            iv2 = project_with_domain(P.space, others + [(e, SIGN_LT)])
            if (iv is not None and iv.zero_attached) or (iv2 is not None and iv2.zero_attached):
                count += 1
            continue
        flipped = SIGN_LT if sign == SIGN_GT else SIGN_GT
        for alt in (SIGN_EQ, flipped):
            iv = project_with_domain(P.space, others + [(e, alt)])
            if iv is not None and iv.zero_attached:
                count += 1
                break
    return count


def check_atomic(P: Partition) -> bool:
    return all(border_count(P, c, diagonal=False) <= 2 for c in P.cells)
