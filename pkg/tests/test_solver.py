import random
from fractions import Fraction as F

import networkx as nx
import pytest

from wtgrobust.model import INF, parse_game
from wtgrobust.pvf import apply_F, pvf_equal
from wtgrobust.solver import (
    NonConvergent,
    NotAcyclic,
    NotDivergent,
    all_regions,
    build_corner_graph,
    build_region_game,
    check_divergent,
    decide_threshold,
    eval_limit,
    region_of,
    robust_limit,
    scc_signs,
    solve,
    solve_acyclic,
    solve_divergent,
    _has_cycle_at_most_zero,
)


def test_region_counts():
    assert len(all_regions(1, 1)) == 4
    assert len(all_regions(1, 2)) == 6
    assert len(all_regions(2, 2)) == 44


def test_region_of_identifies():
    regions = all_regions(2, 2)
    rng = random.Random(5)
    for _ in range(100):
        v = (F(rng.randrange(0, 12), 5), F(rng.randrange(0, 12), 5))
        r = region_of(v, 2)
        assert r in regions


def test_region_game_size(fig1):
    rg = build_region_game(fig1)
    assert len(rg.states) == 264  # 6 locations x 44 regions


def test_corner_graph_builds(fig1):
    rg = build_region_game(fig1)
    cpg = build_corner_graph(rg)
    assert cpg.edges
    # corner nodes pair a region-game state with an integer corner
    state, corner = next(u for u, _, _ in cpg.edges if u[0] != "dwell")
    assert state in rg.states
    assert all(isinstance(c, int) for c in corner)


def test_scc_signs_loops(loop_pos, loop_neg, loop_zero):
    for g, want in ((loop_pos, "Positive"), (loop_neg, "Negative"), (loop_zero, "Mixed")):
        signs = scc_signs(build_region_game(g))
        nontrivial = [s.sign for s in signs if s.sign != "Trivial"]
        assert nontrivial == [want]


def test_check_divergent(fig1, loop_pos, loop_zero):
    rep = check_divergent(fig1)
    assert rep.divergent and all(s.sign == "Trivial" for s in rep.sccs)
    assert check_divergent(loop_pos).divergent
    rep0 = check_divergent(loop_zero)
    assert not rep0.divergent and rep0.witness is not None


def test_cycle_sign_brute_force():
    rng = random.Random(17)
    for _ in range(60):
        n = rng.randint(2, 5)
        edges = []
        for u in range(n):
            for v in range(n):
                if rng.random() < 0.4:
                    edges.append((u, v, rng.randint(-3, 3)))
        got = _has_cycle_at_most_zero(edges)
        g = nx.MultiDiGraph()
        g.add_nodes_from(range(n))
        for u, v, w in edges:
            g.add_edge(u, v, weight=w)
        best = {}
        for u, v, w in edges:
            best[(u, v)] = min(w, best.get((u, v), w))
        simple = nx.DiGraph()
        simple.add_nodes_from(range(n))
        for (u, v), w in best.items():
            simple.add_edge(u, v, weight=w)
        cycles = list(nx.simple_cycles(simple))
        if not edges or not cycles:
            assert got is None
            continue
        want = False
        for cyc in cycles:
            w = sum(
                simple[a][b]["weight"]
                for a, b in zip(cyc, cyc[1:] + cyc[:1])
            )
            if w <= 0:
                want = True
        assert got == want


def test_solve_modes_agree(fig1):
    rep_a = solve(fig1, mode="acyclic")
    rep_auto = solve(fig1)
    assert rep_auto.mode == "acyclic"
    for name in rep_a.values:
        assert pvf_equal(rep_a.values[name], rep_auto.values[name])


def test_solve_divergent_on_acyclic_matches(fig1, fig1_report):
    rep_d = solve(fig1, mode="divergent")
    assert rep_d.mode == "divergent"
    assert rep_d.converged
    for name in fig1_report.values:
        assert pvf_equal(rep_d.values[name], fig1_report.values[name])


def test_loop_pos_divergent_solution(loop_pos):
    rep = solve(loop_pos)
    assert rep.mode == "divergent"
    f = rep.values["a"]
    p = F(1, 16)
    for k in range(17):
        x = F(k, 16)
        want = 2 * p if x <= 1 - 2 * p else INF
        assert f.evaluate((x,), p) == want


def test_solver_errors(loop_pos, loop_zero):
    with pytest.raises(NotAcyclic):
        solve_acyclic(loop_pos)
    with pytest.raises(NotDivergent):
        solve_divergent(loop_zero)
    with pytest.raises(NonConvergent) as exc:
        solve_divergent(loop_pos, cap=1)
    assert exc.value.iterations == 1
    with pytest.raises(ValueError):
        solve(loop_pos, mode="sideways")


def test_report_fields(fig1_report):
    rep = fig1_report
    assert rep.mode == "acyclic"
    assert rep.iterations == 4
    assert rep.converged
    assert len(rep.eta_trail) == 4
    assert rep.eta == min(rep.eta_trail)
    assert set(rep.limit) == set(rep.values)


def test_report_json_deterministic(fig1):
    a = solve(fig1).to_json()
    b = solve(fig1).to_json()
    assert a == b
    assert a["eta"] == "1/4"
    pieces = {c["piece"] for loc in a["locations"] for c in loc["pvf"]["cells"]}
    assert "4p - x2" in pieces


def test_robust_limit_fig1(fig1_report):
    lim = fig1_report.limit
    assert eval_limit(lim["l_1"], (F(0), F(0))) == 0
    # the finite plateau keeps value 1 up to but not including the right end
    assert eval_limit(lim["l_2"], (F(0), F(3, 2))) == 1
    assert eval_limit(lim["l_2"], (F(0), F(1, 2))) == F(3, 2)
    assert eval_limit(lim["l_2"], (F(0), F(2))) == INF
    assert eval_limit(lim["l_4"], (F(3, 2), F(1))) == F(-1, 2)
    assert eval_limit(lim["l_i"], (F(1), F(0))) == -1


def test_decide_threshold(fig1):
    assert decide_threshold(fig1, "l_1", (F(0), F(0)), 0) is True
    assert decide_threshold(fig1, "l_2", (F(0), F(3, 2)), 1) is True
    assert decide_threshold(fig1, "l_2", (F(0), F(3, 2)), F(1, 2)) is False
    assert decide_threshold(fig1, "l_1", (F(0), F(0)), INF) is True


def test_divergent_trail_monotone(loop_pos):
    rep = solve(loop_pos)
    assert all(b <= a for a, b in zip(rep.eta_trail, rep.eta_trail[1:]))
