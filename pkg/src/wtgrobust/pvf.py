"""Piecewise parametric value functions and the one-step value operator.

A PVF attaches to every cell of a partition a finite parametric affine
expression or an infinite constant. The one-step operator for a location
combines, over its outgoing transitions, the composition

    unreset -> guard restriction -> (perturb ->) pre

where perturb is the opponent's sup over an [0, 2p] shift (present for
controller locations under the conservative rule: a delay is usable only
if the guard also survives the shift, which the sup encodes through the
+inf outside-guard sentinel), and pre optimizes over the delay t >= 0.

pre and perturb walk the delay ray symbolically: with the partition closed
under pairwise diagonal intersections, the order in which the ray crosses
the member hyperplanes is constant on every cell and readable off the
diagonal signs, so candidate values (cell pieces transported to crossing
points by an exact jump formula) can be collected per cell and compared by
introducing their pairwise differences as new borders.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .model import INF, NEG_INF, MAX, MIN, TARGET, ExtRat, Guard, Transition, WTG, frac_str
from .algebra import (
    SIGN_EQ,
    SIGN_GT,
    SIGN_LT,
    ClockSpace,
    ParamExpr,
    Partition,
    SolverInternalError,
    base_exprs,
    cell_sup,
    const_expr,
    diag_intersection,
    enumerate_cells,
    raw_cells,
    restrict_signs,
)


class PerturbationTooLarge(ValueError):
    """Evaluation requested beyond the PVF's validity bound."""


class NotAtomic(ValueError):
    """pre/perturb need a partition closed under diagonal intersections."""


MANDATORY_ETA_CAP = Fraction(1)


def _flip_sign(s: str) -> str:
    return SIGN_GT if s == SIGN_LT else SIGN_LT if s == SIGN_GT else SIGN_EQ


def _small_p_sign(beta: Fraction, gamma: Fraction) -> str:
    """Sign of beta + gamma*p for all sufficiently small p > 0."""
    if beta != 0:
        return SIGN_GT if beta > 0 else SIGN_LT
    if gamma != 0:
        return SIGN_GT if gamma > 0 else SIGN_LT
    return SIGN_EQ


def _sign_flip_root(beta: Fraction, gamma: Fraction) -> Optional[Fraction]:
    """The positive p where beta + gamma*p changes sign, if any."""
    if beta == 0 or gamma == 0:
        return None
    r = -Fraction(beta) / Fraction(gamma)
    return r if r > 0 else None


class PVF:
    """A parametric value function: partition plus one piece per cell."""

    def __init__(self, partition: Partition, pieces: dict[str, ParamExpr]):
        if set(pieces) != set(partition.cells):
            raise SolverInternalError("pieces do not match the partition cells")
        self.partition = partition
        self.pieces = pieces

    @property
    def space(self) -> ClockSpace:
        return self.partition.space

    @property
    def eta(self) -> Fraction:
        return self.partition.eta

    def evaluate(self, v: Sequence[Fraction], p: Fraction) -> ExtRat:
        if p <= 0:
            raise ValueError("perturbation must be positive")
        if p > self.eta:
            raise PerturbationTooLarge(f"p = {p} exceeds the bound {self.eta}")
        sig = self.partition.signs_at(v, p)
        piece = self.pieces.get(sig)
        if piece is None:
            # p sits on a coincidence of borders that only degenerates at
            # the far end of the validity interval
            raise PerturbationTooLarge(
                f"partition degenerates for this valuation at p = {p}"
            )
        return piece.evaluate(v, p)

    def add_const(self, w: ExtRat) -> "PVF":
        if w == 0:
            return self
        return PVF(self.partition, {c: e.add_const(w) for c, e in self.pieces.items()})

    def is_constant(self, value: ExtRat) -> bool:
        if value in (INF, NEG_INF):
            return all(not e.is_finite() and e.beta == value for e in self.pieces.values())
        return all(
            e.is_finite() and e.is_valuation_free() and e.beta == value and e.gamma == 0
            for e in self.pieces.values()
        )

    def to_json(self) -> dict:
        names = self.space.clock_names
        return {
            "eta": frac_str(self.eta),
            "exprs": [e.text(names) for e in self.partition.exprs],
            "cells": [
                {"signs": c, "piece": self.pieces[c].text(names)}
                for c in self.partition.cells
            ],
        }


def constant_pvf(space: ClockSpace, value: ExtRat, eta: Fraction = MANDATORY_ETA_CAP) -> PVF:
    part = enumerate_cells(space, [], eta)
    piece = const_expr(space, value)
    return PVF(part, {c: piece for c in part.cells})


def initial_values(game: WTG) -> dict[str, PVF]:
    """Iteration seed: 0 on targets, +inf elsewhere."""
    space = ClockSpace(game.clocks, game.bound)
    out = {}
    for loc in game.locations:
        out[loc.name] = constant_pvf(space, 0 if loc.owner == TARGET else INF)
    return out


# ---------------------------------------------------------------------------
# construction helper: enumerate, assign pieces, prune, then bound


def _prune(
    space: ClockSpace,
    members: tuple[ParamExpr, ...],
    cells: list[str],
    pieces: dict[str, ParamExpr],
) -> tuple[tuple[ParamExpr, ...], list[str], dict[str, ParamExpr]]:
    """Drop members whose sign never changes the piece; merge their cells.
    Axes and ceilings are structural and always kept."""
    mandatory = {e.key() for e in base_exprs(space, [])}
    members_l = list(members)
    cells_l = list(cells)
    changed = True
    while changed:
        changed = False
        for i in range(len(members_l)):
            if members_l[i].key() in mandatory:
                continue
            groups: dict[str, list[str]] = {}
            for c in cells_l:
                groups.setdefault(c[:i] + c[i + 1 :], []).append(c)
            if all(
                all(pieces[g[0]] == pieces[c2] for c2 in g[1:]) for g in groups.values()
            ):
                new_pieces = {}
                for reduced, grp in groups.items():
                    new_pieces[reduced] = pieces[grp[0]]
                members_l.pop(i)
                cells_l = sorted(groups)
                pieces = new_pieces
                changed = True
                break
    return tuple(members_l), cells_l, pieces


def _finish(
    space: ClockSpace,
    members: tuple[ParamExpr, ...],
    cells: list[str],
    pieces: dict[str, ParamExpr],
    eta_cap: Fraction,
) -> PVF:
    members, cells, pieces = _prune(space, members, cells, pieces)
    cell_eta: dict[str, Fraction] = {}
    eta = Fraction(eta_cap)
    for c in cells:
        sup = cell_sup(space, members, c)
        bound = eta_cap if sup == INF else min(Fraction(sup), eta_cap)
        cell_eta[c] = bound
        eta = min(eta, bound)
    part = Partition(space, members, eta, tuple(cells), cell_eta)
    return PVF(part, pieces)


@dataclass
class _Refined:
    """A raw re-enumeration of a PVF over a superset of its members."""

    space: ClockSpace
    members: tuple[ParamExpr, ...]
    cells: list[str]
    pieces: dict[str, ParamExpr]


def _refine(V: PVF, extra: Iterable[ParamExpr]) -> _Refined:
    space = V.space
    members = base_exprs(space, list(V.partition.exprs) + list(extra))
    cells = raw_cells(space, members)
    pieces = {}
    child = Partition(space, members, V.eta, tuple(cells), {c: V.eta for c in cells})
    for c in cells:
        parent = restrict_signs(child, V.partition.exprs, c)
        piece = V.pieces.get(parent)
        if piece is None:
            raise SolverInternalError("refinement left the source partition")
        pieces[c] = piece
    return _Refined(space, members, cells, pieces)


# ---------------------------------------------------------------------------
# piece comparison and selection


class _Caps:
    """Collects upper bounds on p below which symbolic sign decisions are
    stable (constant-vs-constant comparisons that flip at a positive root)."""

    def __init__(self, start: Fraction):
        self.value = Fraction(start)

    def note(self, root: Optional[Fraction]) -> None:
        if root is not None and root < self.value:
            # keep decisions valid on (0, root]; the flip happens strictly
            # beyond the root only for the strict inequality side, and at
            # the root the comparison degenerates, so cap just below is not
            # needed: at p = root the difference is 0 and either choice ties
            self.value = min(self.value, root)


def _diff_exprs(cands: Sequence[ParamExpr], caps: _Caps) -> list[ParamExpr]:
    """Pairwise differences of finite candidates that depend on the
    valuation; constant differences only cap the validity bound."""
    out = []
    for i in range(len(cands)):
        if not cands[i].is_finite():
            continue
        for j in range(i + 1, len(cands)):
            if not cands[j].is_finite():
                continue
            d = cands[i].sub(cands[j])
            if d.is_valuation_free():
                caps.note(_sign_flip_root(d.beta, d.gamma))
            elif not d.is_zero():
                out.append(d)
    return out


def _pick(
    cands: Sequence[ParamExpr],
    sign_of: Callable[[ParamExpr], str],
    choose: str,
) -> ParamExpr:
    """Tournament selection; ties keep the earliest candidate."""
    best = cands[0]
    for cand in cands[1:]:
        if best is cand or best == cand:
            continue
        if not best.is_finite() or not cand.is_finite():
            b = best.beta if not best.is_finite() else None
            c = cand.beta if not cand.is_finite() else None
            if b == c:
                continue
            if choose == "min":
                take = (c == NEG_INF) or (b == INF)
            else:
                take = (c == INF) or (b == NEG_INF)
            if take:
                best = cand
            continue
        d = best.sub(cand)
        if d.is_valuation_free():
            s = _small_p_sign(d.beta, d.gamma)
        else:
            s = sign_of(d)
        if s == SIGN_EQ:
            continue
        if (choose == "min" and s == SIGN_GT) or (choose == "max" and s == SIGN_LT):
            best = cand
    return best


def _select(
    space: ClockSpace,
    refined: _Refined,
    cands_by_cell: dict[str, list[ParamExpr]],
    choose: str,
    caps: _Caps,
) -> PVF:
    """Split the refined cells by candidate differences and pick the
    optimum piece on every final cell."""
    diffs: list[ParamExpr] = []
    for c in refined.cells:
        diffs.extend(_diff_exprs(cands_by_cell[c], caps))
    members = base_exprs(space, list(refined.members) + diffs)
    cells = raw_cells(space, members)
    helper = Partition(space, members, caps.value, tuple(cells), {c: caps.value for c in cells})

    proj = []
    for e in refined.members:
        hit = helper.find_member(e)
        if hit is None:
            raise SolverInternalError("refined member missing from selection members")
        proj.append(hit)

    pieces = {}
    for c in cells:
        parent = "".join(
            c[idx] if flip > 0 else _flip_sign(c[idx]) for idx, flip in proj
        )
        cands = cands_by_cell.get(parent)
        if cands is None:
            raise SolverInternalError("selection cell outside the refined partition")

        def sign_of(expr: ParamExpr, _c=c, _h=helper) -> str:
            hit = _h.find_member(expr)
            if hit is None:
                raise SolverInternalError("difference expression not a member")
            idx, flip = hit
            s = _c[idx]
            return _flip_sign(s) if flip < 0 else s

        pieces[c] = _pick(cands, sign_of, choose)
    return _finish(space, members, cells, pieces, caps.value)


# ---------------------------------------------------------------------------
# elementary operators


def op_unreset(V: PVF, resets: Iterable[int]) -> PVF:
    """Compose with the reset map: W(v) = V(v[Y := 0])."""
    rs = sorted(set(resets))
    if not rs:
        return V
    space = V.space
    mapped = [e.unreset(rs) for e in V.partition.exprs]
    members = base_exprs(space, mapped)
    cells = raw_cells(space, members)
    helper = Partition(space, members, V.eta, tuple(cells), {c: V.eta for c in cells})
    pieces = {}
    for c in cells:
        src = []
        for e in V.partition.exprs:
            u = e.unreset(rs)
            if u.is_valuation_free():
                src.append(_small_p_sign(u.beta, u.gamma))
            else:
                hit = helper.find_member(u)
                if hit is None:
                    raise SolverInternalError("unreset image missing from members")
                idx, flip = hit
                s = c[idx]
                src.append(_flip_sign(s) if flip < 0 else s)
        key = "".join(src)
        piece = V.pieces.get(key)
        if piece is None:
            raise SolverInternalError("unreset image is not a source cell")
        pieces[c] = piece.unreset(rs)
    caps = _Caps(V.eta)
    for e in V.partition.exprs:
        u = e.unreset(rs)
        if u.is_valuation_free():
            caps.note(_sign_flip_root(u.beta, u.gamma))
    return _finish(space, members, cells, pieces, caps.value)


def op_guard(V: PVF, guard: Guard, outside: ExtRat) -> PVF:
    """Restrict to the guard region; the sentinel value (+inf against a
    minimizer, -inf against a maximizer) rules the complement."""
    space = V.space
    atom_exprs = []
    for atom in guard.atoms:
        alpha = [Fraction(0)] * space.n
        alpha[atom.clock] = Fraction(1)
        atom_exprs.append(ParamExpr(tuple(alpha), -atom.bound))
    refined = _refine(V, atom_exprs)
    helper = Partition(
        space, refined.members, V.eta, tuple(refined.cells), {c: V.eta for c in refined.cells}
    )
    sentinel = const_expr(space, outside)
    pieces = {}
    for c in refined.cells:
        ok = True
        for atom, e in zip(guard.atoms, atom_exprs):
            hit = helper.find_member(e)
            idx, flip = hit
            s = c[idx]
            if flip < 0:
                s = _flip_sign(s)
            if atom.op == "<":
                ok = s == SIGN_LT
            elif atom.op == "<=":
                ok = s in (SIGN_LT, SIGN_EQ)
            elif atom.op == ">":
                ok = s == SIGN_GT
            elif atom.op == ">=":
                ok = s in (SIGN_GT, SIGN_EQ)
            else:
                ok = s == SIGN_EQ
            if not ok:
                break
        pieces[c] = refined.pieces[c] if ok else sentinel
    return _finish(space, refined.members, refined.cells, pieces, V.eta)


def combine(choose: str, pvfs: Sequence[PVF]) -> PVF:
    """Pointwise min or max of several PVFs over their common refinement."""
    if not pvfs:
        raise ValueError("combine needs at least one function")
    if len(pvfs) == 1:
        return pvfs[0]
    space = pvfs[0].space
    all_exprs: list[ParamExpr] = []
    for V in pvfs:
        all_exprs.extend(V.partition.exprs)
    members = base_exprs(space, all_exprs)
    cells = raw_cells(space, members)
    helper = Partition(space, members, Fraction(1), tuple(cells), {c: Fraction(1) for c in cells})
    cands_by_cell = {}
    for c in cells:
        cands = []
        for V in pvfs:
            parent = restrict_signs(helper, V.partition.exprs, c)
            piece = V.pieces.get(parent)
            if piece is None:
                raise SolverInternalError("combine cell outside an input partition")
            cands.append(piece)
        cands_by_cell[c] = cands
    caps = _Caps(min(V.eta for V in pvfs))
    refined = _Refined(space, members, cells, {})
    return _select(space, refined, cands_by_cell, choose, caps)


def op_min(U: PVF, V: PVF) -> PVF:
    return combine("min", [U, V])


def op_max(U: PVF, V: PVF) -> PVF:
    return combine("max", [U, V])


# ---------------------------------------------------------------------------
# delay operators: ray walk machinery


def _closure_diagonals(members: Sequence[ParamExpr]) -> list[ParamExpr]:
    nd = [e for e in members if not e.is_diagonal()]
    out = []
    for i in range(len(nd)):
        for j in range(i + 1, len(nd)):
            d = diag_intersection(nd[i], nd[j])
            if not d.is_valuation_free():
                out.append(d)
    return out


def _check_closed(part: Partition) -> None:
    nd = [e for e in part.exprs if not e.is_diagonal()]
    for i in range(len(nd)):
        for j in range(i + 1, len(nd)):
            d = diag_intersection(nd[i], nd[j])
            if not d.is_valuation_free() and part.find_member(d) is None:
                raise NotAtomic("partition is not closed under diagonal intersections")


def _jump(piece: ParamExpr, border: ParamExpr, rate: int) -> ParamExpr:
    """Transport a piece to the ray/border crossing point: the value of
    t*rate + piece(v + t) at the t solving border(v + t) = 0."""
    if not piece.is_finite():
        return piece
    A = border.coeff_sum()
    if A == 0:
        raise SolverInternalError("jump across a diagonal border")
    factor = (piece.coeff_sum() + rate) / A
    return piece.sub(border.scale(factor))


class _Walker:
    """Shared state for walking the delay ray from a cell of a refined,
    diagonally closed enumeration."""

    def __init__(self, ref: _Refined, caps: _Caps):
        self.ref = ref
        self.caps = caps
        self.helper = Partition(
            ref.space, ref.members, Fraction(1), tuple(ref.cells),
            {c: Fraction(1) for c in ref.cells},
        )
        self.cell_set = set(ref.cells)
        self.nd_idx = [i for i, e in enumerate(ref.members) if not e.is_diagonal()]
        self._order_cache: dict = {}
        self._member_cache: dict = {}

    def _locate(self, e: ParamExpr):
        key = e.key()
        if key not in self._member_cache:
            self._member_cache[key] = self.helper.find_member(e)
        return self._member_cache[key]

    def member_sign(self, cell: str, e: ParamExpr) -> str:
        hit = self._locate(e)
        if hit is None:
            raise SolverInternalError("expression missing during ray walk")
        idx, flip = hit
        s = cell[idx]
        return _flip_sign(s) if flip < 0 else s

    def ahead(self, cur: list[str]) -> list[int]:
        out = []
        for i in self.nd_idx:
            A = self.ref.members[i].coeff_sum()
            s = cur[i]
            if (s == SIGN_LT and A > 0) or (s == SIGN_GT and A < 0):
                out.append(i)
        return out

    def earlier(self, cur: list[str], i: int, j: int) -> str:
        """'<' if border i is hit strictly before border j, '=' if at the
        same delay, '>' otherwise. Constant on the cell: the deciding
        expression is diagonal (or valuation-free)."""
        B, B2 = self.ref.members[i], self.ref.members[j]
        A, A2 = B.coeff_sum(), B2.coeff_sum()
        cached = self._order_cache.get((i, j))
        if cached is None:
            d_raw = B2.scale(A).sub(B.scale(A2))  # A*B2 - A2*B
            if d_raw.is_valuation_free():
                cached = ("const", _small_p_sign(d_raw.beta, d_raw.gamma),
                          _sign_flip_root(d_raw.beta, d_raw.gamma))
            else:
                hit = self._locate(d_raw)
                if hit is None:
                    raise SolverInternalError("missing diagonal for crossing order")
                cached = ("member",) + hit
            self._order_cache[(i, j)] = cached
        if cached[0] == "const":
            s = cached[1]
            self.caps.note(cached[2])
        else:
            _, idx, flip = cached
            s = cur[idx]
            if flip < 0:
                s = _flip_sign(s)
        if s == SIGN_EQ:
            return SIGN_EQ
        positive = (s == SIGN_GT) == ((A > 0) == (A2 > 0))
        # -B/A < -B2/A2 iff (A*B2 - A2*B) and A*A2 have opposite signs
        return SIGN_GT if positive else SIGN_LT

    def advance_zero(self, cell: str) -> list[str]:
        """The sign vector immediately after leaving the starting point."""
        cur = list(cell)
        for i in self.nd_idx:
            if cur[i] == SIGN_EQ:
                A = self.ref.members[i].coeff_sum()
                cur[i] = SIGN_GT if A > 0 else SIGN_LT
        return cur

    def require_cell(self, vec: list[str]) -> str:
        key = "".join(vec)
        if key not in self.cell_set:
            raise SolverInternalError("ray walk reached an unrealized sign vector")
        return key

    def piece(self, vec: list[str]) -> ParamExpr:
        return self.ref.pieces[self.require_cell(vec)]


# window position codes for a crossing relative to the [0, 2p] endpoint
_INSIDE, _AT_END, _BEYOND = 0, 1, 2


def _ray_candidates(
    walker: _Walker,
    cell: str,
    rate: int,
    mode: str,
    window_pos: Optional[Callable[[str, int], int]] = None,
    end_piece: Optional[ParamExpr] = None,
) -> list[ParamExpr]:
    """Candidate values for the optimum over delays from points of the cell.

    mode 'inf'/'sup': unbounded delay (pre). mode 'window': delays clipped
    to [0, 2p] (perturb; always a sup); window_pos reports, exactly, where
    a source border's crossing falls relative to the window end, or None
    for auxiliary borders (shift twins), whose crossings never change the
    piece: those only advance the walk and contribute no candidates."""
    ref = walker.ref
    cands: list[ParamExpr] = [ref.pieces[cell]]

    cur = walker.advance_zero(cell)
    if "".join(cur) != cell:
        cands.append(walker.piece(cur))

    steps = 0
    while True:
        steps += 1
        if steps > len(ref.members) + 2:
            raise SolverInternalError("ray walk failed to terminate")
        ahead = walker.ahead(cur)
        if not ahead:
            break

        group = [ahead[0]]
        for i in ahead[1:]:
            rel = walker.earlier(cur, i, group[0])
            if rel == SIGN_LT:
                group = [i]
            elif rel == SIGN_EQ:
                group.append(i)

        if mode == "window":
            positions = [window_pos(cell, i) for i in group]
            positions = [q for q in positions if q is not None]
            pos = max(positions) if positions else _INSIDE
            if pos == _BEYOND:
                # every remaining crossing is at least this late, hence
                # outside the window
                break
            emit = bool(positions)
        else:
            pos = _INSIDE
            emit = True

        border = ref.members[group[0]]
        if emit:
            cands.append(_jump(walker.piece(cur), border, rate))
            at_vec = list(cur)
            for i in group:
                at_vec[i] = SIGN_EQ
            cands.append(_jump(walker.piece(at_vec), border, rate))

        if mode == "window" and pos == _AT_END:
            # crossing exactly at the window end: values past it are out
            # of reach (the endpoint piece below covers the '=' point)
            break

        for i in group:
            A = ref.members[i].coeff_sum()
            cur[i] = SIGN_GT if A > 0 else SIGN_LT
        if emit:
            # one-sided limit at the crossing from inside the next piece
            cands.append(_jump(walker.piece(cur), border, rate))

    if mode == "window":
        cands.append(end_piece)
    else:
        tail = walker.piece(cur)
        if tail.is_finite():
            slope = rate + tail.coeff_sum()
            if mode == "inf" and slope < 0:
                cands.append(const_expr(ref.space, NEG_INF))
            if mode == "sup" and slope > 0:
                cands.append(const_expr(ref.space, INF))

    return cands


def op_pre(V: PVF, rate: int, choose: str) -> PVF:
    """Optimal delay closure: opt_{t >= 0} [t*rate + V(v + t)], the opt
    being an inf against a minimizer ('min') or a sup ('max')."""
    mode = "inf" if choose == "min" else "sup"
    refined = _refine(V, _closure_diagonals(V.partition.exprs))
    caps = _Caps(V.eta)
    walker = _Walker(refined, caps)
    cands_by_cell = {
        c: _ray_candidates(walker, c, rate, mode) for c in refined.cells
    }
    return _select(V.space, refined, cands_by_cell, choose, caps)


def op_perturb(V: PVF, rate: int) -> PVF:
    """Adversarial shift: sup over eps in [0, 2p] of eps*rate + V(v + eps)."""
    space = V.space
    src_exprs = V.partition.exprs
    shifts = [e.shift_2p() for e in src_exprs if not e.is_diagonal()]
    with_shifts = base_exprs(space, list(src_exprs) + shifts)
    refined = _refine(V, list(with_shifts) + _closure_diagonals(with_shifts))
    caps = _Caps(V.eta)
    walker = _Walker(refined, caps)

    # the source function can only jump across its own borders; their 2p
    # shifts are members here, giving an exact window test. The remaining
    # borders (shift twins, mostly) never change the piece and report None.
    src_keys = {e.key() for e in src_exprs}
    source_border: dict[int, ParamExpr] = {}
    for i, e in enumerate(refined.members):
        if not e.is_diagonal() and e.key() in src_keys:
            source_border[i] = e.shift_2p()

    def window_pos(cell: str, i: int) -> Optional[int]:
        sh = source_border.get(i)
        if sh is None:
            return None
        s = walker.member_sign(cell, sh)
        A = refined.members[i].coeff_sum()
        if s == SIGN_EQ:
            return _AT_END
        inside = (s == SIGN_GT) if A > 0 else (s == SIGN_LT)
        return _INSIDE if inside else _BEYOND

    # endpoint piece per cell: value 2p*rate + V(v + 2p), the containing
    # source cell read off the shifted signs
    def endpoint(cell: str) -> ParamExpr:
        key = []
        for e in src_exprs:
            if e.is_diagonal():
                key.append(walker.member_sign(cell, e))
            else:
                key.append(walker.member_sign(cell, e.shift_2p()))
        piece = V.pieces.get("".join(key))
        if piece is None:
            raise SolverInternalError("window endpoint left the source partition")
        if not piece.is_finite():
            return piece
        return ParamExpr(
            piece.alpha, piece.beta,
            piece.gamma + 2 * (piece.coeff_sum() + rate),
        )

    cands_by_cell = {
        c: _ray_candidates(walker, c, rate, "window", window_pos, endpoint(c))
        for c in refined.cells
    }
    return _select(space, refined, cands_by_cell, "max", caps)


# ---------------------------------------------------------------------------
# the one-step operator


def transition_value(game: WTG, trans: Transition, V: dict[str, PVF]) -> PVF:
    """Value of choosing this transition from its source location."""
    src = game.loc_by_name[trans.source]
    tgt_pvf = V[trans.target]
    W = op_unreset(tgt_pvf, trans.resets)
    if src.owner == MIN:
        W = op_guard(W, trans.guard, INF)
        W = op_perturb(W, src.rate)
        if not src.urgent:
            W = op_pre(W, src.rate, "min")
    else:
        W = op_guard(W, trans.guard, NEG_INF)
        if not src.urgent:
            W = op_pre(W, src.rate, "max")
    return W.add_const(trans.weight)


def _deadlock_regions(game: WTG, loc, outs) -> PVF:
    """+inf exactly where no outgoing transition is ever enabled (the play
    is stuck and the target unreachable), -inf elsewhere."""
    space = ClockSpace(game.clocks, game.bound)
    zero = constant_pvf(space, 0)
    cands = []
    for t in outs:
        usable = op_guard(zero, t.guard, NEG_INF)
        if not loc.urgent:
            usable = op_pre(usable, 0, "max")
        cands.append(usable)
    avail = combine("max", cands)
    pieces = {
        c: const_expr(space, INF if (not e.is_finite() and e.beta == NEG_INF) else NEG_INF)
        for c, e in avail.pieces.items()
    }
    return PVF(avail.partition, pieces)


def location_step(game: WTG, loc_name: str, V: dict[str, PVF]) -> PVF:
    loc = game.loc_by_name[loc_name]
    space = ClockSpace(game.clocks, game.bound)
    if loc.owner == TARGET:
        return constant_pvf(space, 0)
    outs = game.transitions_from(loc_name)
    if not outs:
        # no move available: the target is never reached from here
        return constant_pvf(space, INF)
    cands = [transition_value(game, t, V) for t in outs]
    if loc.owner == MIN:
        # an empty choice set surfaces as +inf through the guard sentinel,
        # which is already the deadlock value for the reachability player
        return combine("min", cands)
    # for the opponent the -inf sentinel must not leak out of regions
    # where no move is available at all: those are stuck plays, worth +inf
    combined = combine("max", cands)
    return op_max(combined, _deadlock_regions(game, loc, outs))


def apply_F(game: WTG, V: dict[str, PVF]) -> dict[str, PVF]:
    """One synchronous application of the value operator at all locations."""
    return {loc.name: location_step(game, loc.name, V) for loc in game.locations}


# ---------------------------------------------------------------------------
# function equality


def _in_span(target: ParamExpr, basis: list[ParamExpr]) -> bool:
    """Exact membership of target in the rational span of basis, with
    expressions seen as coefficient vectors over (clocks, p, 1)."""
    rows = [list(b.alpha) + [b.gamma, b.beta] for b in basis]
    vec = list(target.alpha) + [target.gamma, target.beta]
    cols = len(vec)
    pivots = []
    for r in rows:
        r = list(r)
        for pc, pr in pivots:
            if r[pc] != 0:
                f = r[pc] / pr[pc]
                r = [a - f * b for a, b in zip(r, pr)]
        for c in range(cols):
            if r[c] != 0:
                pivots.append((c, r))
                break
    for pc, pr in pivots:
        if vec[pc] != 0:
            f = vec[pc] / pr[pc]
            vec = [a - f * b for a, b in zip(vec, pr)]
    return all(x == 0 for x in vec)


def pvf_equal(U: PVF, V: PVF) -> bool:
    """Equality as functions for all sufficiently small p > 0."""
    if U.space != V.space:
        return False
    space = U.space
    members = base_exprs(space, list(U.partition.exprs) + list(V.partition.exprs))
    cells = raw_cells(space, members)
    helper = Partition(space, members, Fraction(1), tuple(cells), {c: Fraction(1) for c in cells})
    for c in cells:
        pu = U.pieces.get(restrict_signs(helper, U.partition.exprs, c))
        pv = V.pieces.get(restrict_signs(helper, V.partition.exprs, c))
        if pu is None or pv is None:
            raise SolverInternalError("equality cell outside an input partition")
        if not pu.is_finite() or not pv.is_finite():
            if pu.is_finite() or pv.is_finite() or pu.beta != pv.beta:
                return False
            continue
        d = pu.sub(pv)
        if d.is_zero():
            continue
        eqs = [members[i] for i, s in enumerate(c) if s == SIGN_EQ]
        if not eqs or not _in_span(d, eqs):
            return False
    return True
