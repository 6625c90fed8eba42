from fractions import Fraction as F

import pytest

from wtgrobust.algebra import ClockSpace, ParamExpr
from wtgrobust.model import INF, parse_game
from wtgrobust.pvf import (
    MANDATORY_ETA_CAP,
    PVF,
    PerturbationTooLarge,
    apply_F,
    constant_pvf,
    initial_values,
    location_step,
    pvf_equal,
)

from helpers import E1, E2, INF2, chooser_l4, expected_pvf, L4_MEMBERS

SP1 = ClockSpace(("x",), 2)


def one_loc_game(body: str) -> "WTG":
    return parse_game("clocks x\nbound 2\n" + body)


def test_initial_values(fig1):
    V = initial_values(fig1)
    assert V["smile"].is_constant(0)
    for name in ("l_i", "l_1", "l_2", "l_3", "l_4"):
        assert V[name].is_constant(INF)
        assert V[name].eta == MANDATORY_ETA_CAP


def test_constant_pvf_and_evaluate():
    c = constant_pvf(SP1, F(3, 2))
    assert c.evaluate((F(1),), F(1, 4)) == F(3, 2)
    assert c.add_const(1).evaluate((F(1),), F(1, 4)) == F(5, 2)
    with pytest.raises(ValueError):
        c.evaluate((F(1),), F(0))
    with pytest.raises(PerturbationTooLarge):
        c.evaluate((F(1),), F(3, 2))


def test_pvf_equal_ignores_cell_carving():
    # same function, finer partition
    coarse = constant_pvf(SP1, F(1))
    part = expected_pvf(SP1, [E1(1, -1)], lambda w, p: E1(0, 1)).partition
    fine = PVF(part, {c: E1(0, 1) for c in part.cells})
    assert pvf_equal(coarse, fine)
    assert pvf_equal(fine, coarse)
    other = PVF(part, {c: E1(0, 1, 1) for c in part.cells})
    assert not pvf_equal(coarse, other)


def test_pvf_equal_border_tolerance():
    # two functions may disagree on a border cell by a multiple of the
    # border expression itself: both are the same function of the state
    part = expected_pvf(SP1, [E1(1, -1)], lambda w, p: E1(0, 0)).partition
    idx, _ = part.find_member(E1(1, -1))
    a, b = {}, {}
    for c in part.cells:
        a[c] = E1(0, 1)
        b[c] = E1(0, 1) if c[idx] != "=" else E1(1, 0)  # x == 1 on the border
    assert pvf_equal(PVF(part, a), PVF(part, b))
    c_bad = {c: (E1(0, 1) if c[idx] != "=" else E1(0, 2)) for c in part.cells}
    assert not pvf_equal(PVF(part, a), PVF(part, c_bad))


# --- one-step behaviour of the value operator ---------------------------


def test_min_upper_guard_step():
    g = one_loc_game(
        "location a min weight=1\nlocation t target\n"
        'edge a -> t guard "x <= 1" weight=0\n'
    )
    V = apply_F(g, initial_values(g))
    f = V["a"]
    p = F(1, 8)
    assert f.evaluate((F(0),), p) == 2 * p
    assert f.evaluate((1 - 2 * p,), p) == 2 * p
    assert f.evaluate((F(7, 8),), p) == INF
    assert f.evaluate((F(2),), p) == INF


def test_min_negative_rate_prefers_waiting():
    g = one_loc_game(
        "location a min weight=-1\nlocation t target\n"
        'edge a -> t guard "x <= 2" weight=0\n'
    )
    V = apply_F(g, initial_values(g))
    # waiting to the far end of the window: value x - 2 + 2p
    assert V["a"].evaluate((F(1, 2),), F(1, 8)) == F(1, 2) - 2 + F(1, 4)


def test_max_open_window_supremum():
    g = one_loc_game(
        "location b max weight=2\nlocation t target\n"
        'edge b -> t guard "1 < x < 2" weight=0\n'
    )
    V = apply_F(g, initial_values(g))
    # sup over t in (1-x, 2-x) of 2t, not attained: 4 - 2x
    assert V["b"].evaluate((F(1, 2),), F(1, 8)) == 3
    assert V["b"].evaluate((F(3, 2),), F(1, 8)) == 1
    assert V["b"].evaluate((F(2),), F(1, 8)) == INF


def test_urgent_min_perturbation_only():
    g = one_loc_game(
        "location a min weight=1 urgent\nlocation t target\n"
        'edge a -> t guard "true" weight=0\n'
    )
    V = apply_F(g, initial_values(g))
    assert V["a"].evaluate((F(1, 2),), F(1, 8)) == F(1, 4)  # worst case 2p * rate
    g2 = one_loc_game(
        "location a min weight=-1 urgent\nlocation t target\n"
        'edge a -> t guard "true" weight=0\n'
    )
    V2 = apply_F(g2, initial_values(g2))
    assert V2["a"].evaluate((F(1, 2),), F(1, 8)) == 0  # adversary grants no gain


def test_min_equality_guard_infeasible():
    # both window endpoints must satisfy x = 1; impossible for p > 0
    g = one_loc_game(
        "location a min weight=0\nlocation t target\n"
        'edge a -> t guard "x = 1" weight=0\n'
    )
    V = apply_F(g, initial_values(g))
    assert V["a"].is_constant(INF)


def test_max_deadlock_is_infinite():
    g = one_loc_game(
        "location b max weight=1\nlocation t target\n"
        'edge b -> t guard "x < 1" weight=0\n'
    )
    V = apply_F(g, initial_values(g))
    # below 1 Max must move eventually but can stall to the open end
    assert V["b"].evaluate((F(1, 2),), F(1, 8)) == F(1, 2)
    # past the guard there is no move at all: stuck, target unreached
    assert V["b"].evaluate((F(3, 2),), F(1, 8)) == INF


def test_reset_composition():
    g = one_loc_game(
        "location a min weight=0\nlocation b min weight=1\nlocation t target\n"
        'edge a -> b guard "1 <= x <= 2" reset x weight=0\n'
        'edge b -> t guard "x <= 1" weight=0\n'
    )
    V = apply_F(g, apply_F(g, initial_values(g)))
    p = F(1, 16)
    # after the reset the inner value is 2p at x = 0, independent of x here
    assert V["a"].evaluate((F(0),), p) == 2 * p
    assert V["a"].evaluate((F(3, 2),), p) == 2 * p


def test_one_step_l4_members_and_formula(fig1):
    V1 = apply_F(fig1, initial_values(fig1))
    f = V1["l_4"]
    expected = expected_pvf(ClockSpace(fig1.clocks, fig1.bound), L4_MEMBERS, chooser_l4)
    assert pvf_equal(f, expected)
    got = {e.text(fig1.clocks) for e in f.partition.exprs}
    assert got == {
        "x1",
        "x1 - 2",
        "x2",
        "x2 - 2",
        "x1 - 2 + 2p",
        "x2 - 2 + 2p",
        "x1 - x2",
        "x1 - x2 + 1 - 2p",
    }
    # the finite region survives exactly while p <= 1/2
    finite_eta = {
        f.partition.cell_eta[c]
        for c in f.partition.cells
        if f.pieces[c].is_finite()
    }
    assert min(finite_eta) == F(1, 2)


def test_horizon_values_decrease(fig1):
    V = initial_values(fig1)
    p = F(1, 18)
    samples = [(F(k1, 6), F(k2, 6)) for k1 in range(13) for k2 in range(13)]
    prev = None
    for _ in range(4):
        V = apply_F(fig1, V)
        if prev is not None:
            for name in V:
                for v in samples:
                    assert V[name].evaluate(v, p) <= prev[name].evaluate(v, p)
        prev = V


def test_location_step_matches_apply_F(fig1):
    V = initial_values(fig1)
    W = apply_F(fig1, V)
    assert pvf_equal(W["l_4"], location_step(fig1, "l_4", V))
