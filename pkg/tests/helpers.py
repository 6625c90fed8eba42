"""Shared builders for the expected closed-form value functions of the
two-clock benchmark game (tests/fixtures/fig1.game).

The closed forms are stated as choosers: functions from a sample valuation
and perturbation to the expression that should hold on the sample's cell.
``expected_pvf`` enumerates the cell arrangement of a member list, picks a
witness per cell and asks the chooser, yielding a PVF that can be compared
exactly with ``pvf_equal`` regardless of how the solver carved its cells.
"""

from fractions import Fraction as F

from wtgrobust.algebra import ClockSpace, ParamExpr, enumerate_cells
from wtgrobust.model import INF
from wtgrobust.pvf import PVF


def E2(a1, a2, beta, gamma=0):
    return ParamExpr((F(a1), F(a2)), F(beta), F(gamma))


def E1(a, beta, gamma=0):
    return ParamExpr((F(a),), F(beta), F(gamma))


INF2 = ParamExpr((F(0), F(0)), INF)
INF1 = ParamExpr((F(0),), INF)


def expected_pvf(space: ClockSpace, exprs, chooser, eta_cap=F(1)) -> PVF:
    part = enumerate_cells(space, exprs, eta_cap)
    pieces = {}
    for cell in part.cells:
        p = min(part.cell_eta[cell], part.eta) / 2
        w = part.witness(cell, p)
        pieces[cell] = chooser(w, p)
    return PVF(part, pieces)


# --- closed forms for fig1 ----------------------------------------------
# Boundary closures follow from the one-step semantics: a supremum over an
# open delay window is not attained, so cells whose window degenerates to a
# point are infinite.

def chooser_l1(w, p):
    return E2(0, 0, 0, 2)


L1_MEMBERS = []


def chooser_l2(w, p):
    x1, x2 = w
    if x2 < 1:
        return E2(0, -1, 2, 4)
    if x2 <= 2 - 2 * p:
        return E2(0, 0, 1, 4)
    return INF2


L2_MEMBERS = [E2(0, 1, -1), E2(0, 1, -2, 2)]


def chooser_l3(w, p):
    x1, x2 = w
    if x1 <= 1 and x2 < x1:
        return E2(1, -1, -1, 4)
    if 1 < x1 < 2 and x2 < 1:
        return E2(0, -1, 0, 4)
    return INF2


L3_MEMBERS = [E2(1, -1, 0), E2(1, 0, -1), E2(0, 1, -1)]


def chooser_l4(w, p):
    x1, x2 = w
    if x2 <= x1 < 2 - 2 * p:
        return E2(1, 0, -2, 2)
    if x2 + 2 * p - 1 < x1 < x2 < 2 - 2 * p:
        return E2(0, 1, -2, 2)
    return INF2


L4_MEMBERS = [E2(1, -1, 0), E2(1, 0, -2, 2), E2(0, 1, -2, 2), E2(1, -1, 1, -2)]


def chooser_li(w, p):
    """The four-piece initial-location value; finite on part of x1 <= 1."""
    x1, x2 = w
    if x1 <= 1 and x2 <= x1 - p - F(1, 2):
        return E2(-2, 1, 1, 6)
    if x1 <= 1 and x2 < x1 - 2 * p:
        return E2(0, -1, 0, 4)
    if 1 < x1 < 2 - 2 * p and x2 <= F(1, 2) - p:
        return E2(0, 1, -1, 6)
    if 1 < x1 < 2 - 2 * p and x2 < 1 - 2 * p:
        return E2(0, -1, 0, 4)
    return INF2


def chooser_li_three_way(w, p):
    """The three-piece reading of the same closed form, infinite on all of
    x1 <= 1.  Kept verbatim for the acceptance comparison; it disagrees
    with the solver (and with ``chooser_li``) on the x1 <= 1 strip."""
    x1, x2 = w
    if 1 < x1 < 2 - 2 * p and x2 <= F(1, 2) - p:
        return E2(0, 1, -1, 6)
    if 1 < x1 < 2 - 2 * p and x2 < 1 - 2 * p:
        return E2(0, -1, 0, 4)
    return INF2


LI_MEMBERS = [
    E2(1, -1, 0),
    E2(1, 0, -1),
    E2(1, 0, -2, 2),
    E2(2, -2, -1, -2),
    E2(1, -1, 0, -2),
    E2(0, 2, -1, 2),
    E2(0, 1, -1, 2),
]

CLOSED_FORMS = {
    "l_1": (L1_MEMBERS, chooser_l1),
    "l_2": (L2_MEMBERS, chooser_l2),
    "l_3": (L3_MEMBERS, chooser_l3),
    "l_4": (L4_MEMBERS, chooser_l4),
    "l_i": (LI_MEMBERS, chooser_li),
}


def fig1_expected(space: ClockSpace, name: str) -> PVF:
    members, chooser = CLOSED_FORMS[name]
    return expected_pvf(space, members, chooser)


# --- random acyclic one-clock games --------------------------------------

def random_game(rng):
    """Small acyclic one-clock game with mixed owners, guards of every
    shape, occasional resets and weights in [-2, 2]."""
    from wtgrobust.model import MAX, MIN, TARGET, Atom, Guard, Location, Transition, WTG

    nloc = rng.randint(2, 5)
    names = [f"l{i}" for i in range(nloc - 1)] + ["t"]
    locs = []
    for nm in names:
        if nm == "t":
            locs.append(Location(nm, TARGET))
        else:
            locs.append(Location(nm, rng.choice([MIN, MIN, MAX]), rng.randint(-2, 2)))
    trans = []
    for i in range(nloc - 1):
        for _ in range(rng.randint(1, 2)):
            j = rng.randint(i + 1, nloc - 1)
            kind = rng.randint(0, 4)
            if kind == 0:
                guard = Guard(())
            elif kind == 1:
                guard = Guard((Atom(0, "<=", rng.randint(1, 2)),))
            elif kind == 2:
                guard = Guard((Atom(0, ">=", rng.randint(0, 1)), Atom(0, "<=", 2)))
            elif kind == 3:
                guard = Guard((Atom(0, "<", rng.randint(1, 2)),))
            else:
                guard = Guard((Atom(0, "=", rng.randint(0, 2)),))
            resets = frozenset([0] if rng.random() < 0.3 else [])
            trans.append(Transition(names[i], guard, resets, names[j], rng.randint(-2, 2)))
    from fractions import Fraction
    return WTG(("x",), 2, tuple(locs), tuple(trans), (names[0], (Fraction(0),)))
