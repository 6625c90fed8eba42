import random
from fractions import Fraction as F

import pytest

from wtgrobust.algebra import (
    ClockSpace,
    DiagonalInput,
    InfeasibleAtP,
    ParamExpr,
    base_exprs,
    border_count,
    cell_status,
    check_atomic,
    diag_intersection,
    enumerate_cells,
    intersect_partitions,
    realized_vectors,
    refine_atomic,
    _dfs_vectors,
    _pstar,
)
from wtgrobust.model import INF, NEG_INF

from helpers import E2

SP = ClockSpace(("x1", "x2"), 2)
NAMES = ("x1", "x2")

FIG2_LEFT = [E2(0, 1, 0, -2), E2(2, 1, -2, 1), E2(2, -1, F(1, 2), 0)]


def test_expr_evaluate():
    e = E2(2, 1, -2, 1)  # 2x1 + x2 - 2 + p
    assert e.evaluate((F(1, 2), F(1, 2)), F(1, 2)) == 0
    assert e.evaluate((F(1), F(0)), F(1, 4)) == F(1, 4)
    assert ParamExpr((0, 0), INF).evaluate((F(0), F(0)), F(1, 8)) == INF


def test_expr_structure():
    assert E2(1, -1, 0, 2).is_diagonal()  # x1 - x2 + 2p
    assert not E2(0, 1, 0, -2).is_diagonal()  # x2 - 2p
    assert E2(0, 0, 3, 1).is_valuation_free()
    assert not ParamExpr((0, 0), INF).is_finite()
    with pytest.raises(AssertionError):
        ParamExpr((1, 0), INF)


def test_expr_ops():
    e = E2(1, 2, 3, 4)
    assert e.unreset([1]) == E2(1, 0, 3, 4)
    assert e.shift_2p() == E2(1, 2, 3, 10)
    assert e.at_p0() == E2(1, 2, 3, 0)
    assert e.add(E2(0, -2, 1, -4)) == E2(1, 0, 4, 0)
    assert e.scale(F(1, 2)) == E2(F(1, 2), 1, F(3, 2), 2)
    assert e.int_coeffs() == (1, 2, 4, 3)
    assert E2(F(1, 2), 0, F(1, 3), 0).int_coeffs() == (3, 0, 0, 2)


def test_normalize():
    norm, flip = E2(F(-1, 2), F(1, 2), 0, F(-3, 2)).normalize()
    assert norm == E2(1, -1, 0, 3) and flip == -1
    norm, flip = E2(2, 4, 6, 8).normalize()
    assert norm == E2(1, 2, 3, 4) and flip == 1
    zero, flip = E2(0, 0, 0, 0).normalize()
    assert zero.is_zero() and flip == 1


def test_text_rendering():
    assert E2(0, -1, 0, 4).text(NAMES) == "4p - x2"
    assert E2(1, -1, -1, F(7, 2)).text(NAMES) == "x1 - x2 - 1 + 7p/2"
    assert E2(1, -1, F(7, 8), F(-1, 4)).text(NAMES) == "x1 - x2 + 7/8 - p/4"
    assert E2(0, 0, 0, 0).text(NAMES) == "0"
    assert ParamExpr((0, 0), INF).text(NAMES) == "+inf"
    assert ParamExpr((0, 0), NEG_INF).text(NAMES) == "-inf"
    assert E2(-2, 1, 1, 6).text(NAMES) == "x2 - 2x1 + 1 + 6p"


def test_diag_intersection_pairs():
    d = diag_intersection(E2(0, 1, 0, -2), E2(2, 1, -2, 1))
    assert d == E2(1, -1, -1, F(7, 2))
    d = diag_intersection(E2(2, 1, -2, 1), E2(2, -1, F(1, 2), 0))
    assert d == E2(1, -1, F(7, 8), F(-1, 4))
    assert diag_intersection(E2(2, 1, -2, 1), E2(2, 1, -2, 1)).is_zero()


def test_diag_intersection_errors():
    with pytest.raises(DiagonalInput):
        diag_intersection(E2(1, -1, 0, 0), E2(0, 1, 0, 0))
    with pytest.raises(DiagonalInput):
        diag_intersection(ParamExpr((0, 0), INF), E2(0, 1, 0, 0))


def test_diag_intersection_vanishes_at_common_zeros():
    rng = random.Random(11)
    done = 0
    while done < 50:
        e1 = E2(rng.randint(-3, 3), rng.randint(-3, 3), rng.randint(-3, 3), rng.randint(-3, 3))
        e2 = E2(rng.randint(-3, 3), rng.randint(-3, 3), rng.randint(-3, 3), rng.randint(-3, 3))
        if e1.is_diagonal() or e2.is_diagonal():
            continue
        d = diag_intersection(e1, e2)
        assert d.is_diagonal()
        # solve the 2x2 system e1 = e2 = 0 at a random p
        p = F(rng.randint(1, 8), 16)
        a, b = e1.alpha
        c, cc = e2.alpha
        det = a * cc - b * c
        if det == 0:
            continue
        r1 = -(e1.beta + e1.gamma * p)
        r2 = -(e2.beta + e2.gamma * p)
        x1 = (r1 * cc - b * r2) / det
        x2 = (a * r2 - r1 * c) / det
        assert e1.evaluate((x1, x2), p) == 0 and e2.evaluate((x1, x2), p) == 0
        assert d.evaluate((x1, x2), p) == 0
        done += 1


def test_base_exprs_mandatory():
    part = enumerate_cells(SP, [], 1)
    texts = {e.text(NAMES) for e in part.exprs}
    assert texts == {"x1", "x2", "x1 - 2", "x2 - 2"}  # stored in normal form
    assert part.eta == 1  # cap honoured on the expression-free space


def test_fig2_left_enumeration():
    part = enumerate_cells(SP, FIG2_LEFT, 1)
    assert part.eta == F(1, 4)
    assert len(part.cells) == 50
    # the blue cell: x2 > 2p, 2x1 + x2 < 2 - p, 2x1 > x2 - 1/2
    blue = part.cell_of((F(5, 8), F(1, 4)), F(1, 100))
    assert cell_status(SP, part.exprs, blue) == F(1, 2)
    assert part.cell_eta[blue] == F(1, 2)


def test_cell_status_rejects_non_cells():
    part = enumerate_cells(SP, FIG2_LEFT, 1)
    # x1 < 0 contradicts the clock box
    bad = "<" + part.cells[0][1:]
    assert cell_status(SP, part.exprs, bad) is None


def test_witness_round_trip():
    part = enumerate_cells(SP, FIG2_LEFT, 1)
    for cell in part.cells:
        p = min(part.cell_eta[cell], part.eta) / 2
        w = part.witness(cell, p)
        assert part.signs_at(w, p) == cell
    blue = part.cell_of((F(5, 8), F(1, 4)), F(1, 100))
    w = part.witness(blue, F(1, 4))
    assert part.signs_at(w, F(1, 4)) == blue


def test_witness_infeasible_beyond_cell_eta():
    part = enumerate_cells(SP, FIG2_LEFT, 1)
    blue = part.cell_of((F(5, 8), F(1, 4)), F(1, 100))
    with pytest.raises(InfeasibleAtP):
        part.witness(blue, F(3, 4))


def test_refine_atomic_fig2():
    part = enumerate_cells(SP, FIG2_LEFT, 1)
    ref = refine_atomic(part)
    assert ref.eta == F(1, 8)
    assert ref.eta <= part.eta
    for want in (
        E2(1, -1, -1, F(7, 2)),
        E2(1, -1, 0, 2),
        E2(1, -1, F(1, 2), 0),
        E2(1, -1, F(7, 8), F(-1, 4)),
    ):
        assert ref.find_member(want) is not None, want.text(NAMES)
    assert check_atomic(ref)
    for cell in ref.cells:
        assert border_count(ref, cell, diagonal=False) <= 2


def test_refine_atomic_all_diagonal_unchanged():
    part = enumerate_cells(SP, [E2(1, -1, 0, 2)], 1)
    # axes and ceilings are non-diagonal, so closure adds their pairwise
    # diagonals; a pure-diagonal member list on top of them stays put
    ref = refine_atomic(part)
    assert ref.find_member(E2(1, -1, 0, 2)) is not None


def test_intersect_absorption():
    part = enumerate_cells(SP, FIG2_LEFT, 1)
    axes_only = enumerate_cells(SP, [], 1)
    both = intersect_partitions(part, axes_only)
    assert both.eta == part.eta
    assert len(both.cells) == len(part.cells)
    for e in part.exprs:
        assert both.find_member(e) is not None


def test_partition_eta_cap():
    part = enumerate_cells(SP, FIG2_LEFT, F(1, 8))
    assert part.eta == F(1, 8)
    assert all(v <= F(1, 8) for v in part.cell_eta.values())


def test_realized_vectors_match_dfs():
    rng = random.Random(23)
    for _ in range(40):
        exprs = base_exprs(
            SP,
            [
                E2(rng.randint(-2, 2), rng.randint(-2, 2), rng.randint(-2, 2), rng.randint(-2, 2))
                for _ in range(rng.randint(1, 3))
            ],
        )
        pstar = _pstar(exprs)
        fast = set(realized_vectors(SP, exprs, pstar))
        slow = set(_dfs_vectors(SP, exprs))
        assert fast == slow


def test_find_member_flip():
    part = enumerate_cells(SP, FIG2_LEFT, 1)
    e = E2(0, 1, 0, -2)
    idx, flip = part.find_member(e)
    assert flip == 1
    idx2, flip2 = part.find_member(e.scale(-2))
    assert idx2 == idx and flip2 == -1
    assert part.find_member(E2(5, 5, 5, 5)) is None
