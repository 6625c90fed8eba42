"""End-to-end value computation.

Acyclic games are solved by iterating the one-step operator depth-many
times.  Cyclic games go through the divergence check first: the region
abstraction of the game is built, its strongly connected components are
classified by the sign of their cycle weights (computed on the integer
corner-point graph), and only games whose every SCC is uniformly positive
or negative are admitted to the fixpoint loop.  Finally the perturbation
limit turns a converged parametric family into a parameter-free
piecewise-affine function.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Iterator, Optional, Sequence

import networkx as nx

from .algebra import Partition, SolverInternalError, enumerate_cells
from .model import (
    TARGET,
    ExtRat,
    Guard,
    Transition,
    WTG,
    WeightStats,
    depth,
    frac_str,
    weight_stats,
)
from .pvf import PVF, initial_values, location_step, pvf_equal

__all__ = [
    "NotAcyclic",
    "NotDivergent",
    "NonConvergent",
    "Region",
    "RegionEdge",
    "RegionGame",
    "CornerPointGraph",
    "SCCInfo",
    "DivergenceReport",
    "SolveReport",
    "region_of",
    "all_regions",
    "build_region_game",
    "build_corner_graph",
    "scc_signs",
    "check_divergent",
    "solve_acyclic",
    "solve_divergent",
    "solve",
    "robust_limit",
    "eval_limit",
    "decide_threshold",
]


class NotAcyclic(ValueError):
    """The location graph has a cycle."""


class NotDivergent(ValueError):
    """Some region-game SCC mixes cycle signs (or contains a zero cycle)."""


class NonConvergent(RuntimeError):
    """The fixpoint loop hit its iteration cap without stabilizing."""

    def __init__(self, iterations: int):
        self.iterations = iterations
        super().__init__(
            f"no fixpoint after {iterations} iterations; "
            "the game may contain a configuration of value -inf"
        )


# ---------------------------------------------------------------------------
# clock regions


@dataclass(frozen=True)
class Region:
    """A clock region for the common bound M.

    ``ipart[i]`` is the integer part of clock i, with M+1 encoding "beyond
    M" (where the exact value no longer matters).  ``groups`` orders the
    fractional parts of the non-beyond clocks: the first group collects the
    zero-fraction clocks (possibly empty), the following (nonempty) groups
    are in increasing fractional order.
    """

    bound: int
    ipart: tuple[int, ...]
    groups: tuple[tuple[int, ...], ...]

    def capped(self, i: int) -> bool:
        return self.ipart[i] > self.bound

    def frac_zero(self, i: int) -> bool:
        return i in self.groups[0]

    def time_closed(self) -> bool:
        return all(self.capped(i) for i in range(len(self.ipart)))

    def delay_successor(self) -> "Region":
        if self.time_closed():
            return self
        M = self.bound
        if self.groups[0]:
            # zero fractions start moving; clocks sitting exactly at M leave
            ipart = list(self.ipart)
            moved = []
            for i in self.groups[0]:
                if self.ipart[i] == M:
                    ipart[i] = M + 1
                else:
                    moved.append(i)
            groups = ((),) + ((tuple(moved),) if moved else ()) + self.groups[1:]
            return Region(M, tuple(ipart), groups)
        # the largest fractions reach the next integer
        last = self.groups[-1]
        ipart = list(self.ipart)
        for i in last:
            ipart[i] += 1
        return Region(M, tuple(ipart), (last,) + self.groups[1:-1])

    def time_successors(self) -> list["Region"]:
        out = [self]
        cur = self
        while True:
            nxt = cur.delay_successor()
            if nxt == cur:
                return out
            out.append(nxt)
            cur = nxt

    def satisfies(self, g: Guard) -> bool:
        for a in g.atoms:
            ip = self.ipart[a.clock]
            z = not self.capped(a.clock) and self.frac_zero(a.clock)
            if a.op == "<":
                ok = ip < a.bound
            elif a.op == "<=":
                ok = ip < a.bound or (ip == a.bound and z)
            elif a.op == "=":
                ok = ip == a.bound and z
            elif a.op == ">=":
                ok = ip >= a.bound
            else:
                ok = ip > a.bound or (ip == a.bound and not z)
            if not ok:
                return False
        return True

    def reset(self, resets: Iterable[int]) -> "Region":
        rs = set(resets)
        ipart = tuple(0 if i in rs else v for i, v in enumerate(self.ipart))
        zero = tuple(sorted(set(self.groups[0]) - rs | rs))
        rest = []
        for grp in self.groups[1:]:
            kept = tuple(i for i in grp if i not in rs)
            if kept:
                rest.append(kept)
        return Region(self.bound, ipart, (zero,) + tuple(rest))

    def corners(self) -> list[tuple[int, ...]]:
        """Integer points of the closure; beyond-M clocks get M+1."""
        n = len(self.ipart)
        out = []
        k = len(self.groups) - 1
        for up in range(k + 1):
            raised = set()
            for grp in self.groups[len(self.groups) - up :]:
                raised.update(grp)
            out.append(
                tuple(self.ipart[i] + (1 if i in raised else 0) for i in range(n))
            )
        return out

    def text(self, clocks: Sequence[str]) -> str:
        parts = []
        for i, name in enumerate(clocks):
            if self.capped(i):
                parts.append(f"{name}>{self.bound}")
            elif self.frac_zero(i):
                parts.append(f"{name}={self.ipart[i]}")
            else:
                parts.append(f"{self.ipart[i]}<{name}<{self.ipart[i] + 1}")
        order = [
            "{" + ",".join(clocks[i] for i in grp) + "}" for grp in self.groups[1:]
        ]
        if order:
            parts.append("frac " + "<".join(order))
        return " ".join(parts)


def region_of(values: Sequence[Fraction], bound: int) -> Region:
    ipart = []
    fracs: dict[int, Fraction] = {}
    for i, x in enumerate(values):
        x = Fraction(x)
        if x > bound:
            ipart.append(bound + 1)
        else:
            ip = int(x)
            ipart.append(ip)
            fracs[i] = x - ip
    order: dict[Fraction, list[int]] = {}
    for i, f in fracs.items():
        order.setdefault(f, []).append(i)
    zero = tuple(sorted(order.pop(Fraction(0), [])))
    groups = (zero,) + tuple(
        tuple(sorted(order[f])) for f in sorted(order)
    )
    return Region(bound, tuple(ipart), groups)


def _ordered_partitions(items: list[int]) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All ordered partitions of items into nonempty blocks (order of blocks
    matters, order inside a block does not)."""
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for sub in _ordered_partitions(rest):
        # first joins an existing block or opens a new one at any position
        for j, blk in enumerate(sub):
            yield sub[:j] + (tuple(sorted((first,) + blk)),) + sub[j + 1 :]
        for j in range(len(sub) + 1):
            yield sub[:j] + ((first,),) + sub[j:]


def all_regions(n: int, bound: int) -> list[Region]:
    out = []
    for ipart in product(range(bound + 2), repeat=n):
        forced_zero = [i for i in range(n) if ipart[i] == bound]
        free = [i for i in range(n) if ipart[i] < bound]
        for mask in product((0, 1), repeat=len(free)):
            zero_extra = [i for i, m in zip(free, mask) if m]
            moving = [i for i, m in zip(free, mask) if not m]
            zero = tuple(sorted(forced_zero + zero_extra))
            for parts in _ordered_partitions(moving):
                out.append(Region(bound, ipart, (zero,) + parts))
    return sorted(out, key=lambda r: (r.ipart, r.groups))


# ---------------------------------------------------------------------------
# the region game and its corner-point weights


@dataclass(frozen=True)
class RegionEdge:
    src: tuple[str, Region]
    trans: Transition
    via: Region  # the time successor where the guard holds
    dst: tuple[str, Region]


@dataclass
class RegionGame:
    game: WTG
    states: tuple[tuple[str, Region], ...]
    edges: tuple[RegionEdge, ...]

    def state_graph(self) -> "nx.DiGraph":
        g = nx.DiGraph()
        g.add_nodes_from(self.states)
        g.add_edges_from((e.src, e.dst) for e in self.edges)
        return g


def build_region_game(game: WTG) -> RegionGame:
    regions = all_regions(len(game.clocks), game.bound)
    states = tuple(
        (loc.name, r) for loc in game.locations for r in regions
    )
    edges = []
    for lname, r in states:
        for tr in game.transitions_from(lname):
            for via in r.time_successors():
                if via.satisfies(tr.guard):
                    edges.append(
                        RegionEdge((lname, r), tr, via, (tr.target, via.reset(tr.resets)))
                    )
    return RegionGame(game, states, tuple(edges))


@dataclass
class CornerPointGraph:
    """Integer-weighted abstraction: nodes are (state, corner) pairs plus
    dwell nodes for unbounded stays beyond the clock bound; play weights
    along a region path are bracketed by corner path weights."""

    edges: list[tuple[object, object, int]]

    def nodes(self) -> set:
        out = set()
        for u, v, _ in self.edges:
            out.add(u)
            out.add(v)
        return out


def build_corner_graph(rg: RegionGame, stats: Optional[WeightStats] = None) -> CornerPointGraph:
    if stats is None:
        stats = weight_stats(rg.game)
    game = rg.game
    M = game.bound
    n = len(game.clocks)
    edges: list[tuple[object, object, int]] = []
    for e in rg.edges:
        rate = game.loc_by_name[e.src[0]].rate
        r, via = e.src[1], e.via
        free = [x for x in range(n) if not via.capped(x)]
        newly = [x for x in range(n) if not r.capped(x) and via.capped(x)]
        if free:
            for c in r.corners():
                for c2 in via.corners():
                    ts = {c2[x] - c[x] for x in free}
                    if len(ts) != 1:
                        continue
                    t = ts.pop()
                    if t < 0 or any(t < M - c[x] for x in newly):
                        continue
                    c3 = tuple(0 if i in e.trans.resets else c2[i] for i in range(n))
                    w = t * rate + e.trans.weight
                    if abs(w) > stats.W_e:
                        raise SolverInternalError("corner edge weight out of range")
                    edges.append(((e.src, c), (e.dst, c3), w))
        else:
            # the guard region is beyond the bound in every clock: the stay
            # there is unbounded, modelled by a dwell node with a rate loop
            dwell = ("dwell", e.src[0], e.via)
            c3 = tuple(0 if i in e.trans.resets else M + 1 for i in range(n))
            for c in r.corners():
                t0 = max([0] + [M - c[x] for x in range(n) if not r.capped(x)])
                edges.append(((e.src, c), dwell, t0 * rate))
            edges.append((dwell, dwell, rate))
            edges.append((dwell, (e.dst, c3), e.trans.weight))
    return CornerPointGraph(edges)


# ---------------------------------------------------------------------------
# cycle signs


@dataclass
class SCCInfo:
    states: tuple[tuple[str, Region], ...]
    sign: str  # Positive | Negative | Trivial | Mixed


@dataclass
class DivergenceReport:
    divergent: bool
    sccs: list[SCCInfo]
    witness: Optional[SCCInfo]  # a Mixed component, when not divergent


def _state_of(node) -> Optional[tuple[str, Region]]:
    if node[0] == "dwell":
        return None
    return node[0]  # a corner node is (state, corner)


def _has_cycle_at_most_zero(edges: list[tuple[object, object, int]]) -> Optional[bool]:
    """Whether some cycle has total weight <= 0; None when there is no cycle
    at all.  Parallel edges are collapsed to their minimum."""
    best: dict[tuple[object, object], int] = {}
    for u, v, w in edges:
        key = (u, v)
        if key not in best or w < best[key]:
            best[key] = w
    g = nx.DiGraph()
    nodes = {u for u, _ in best} | {v for _, v in best}
    g.add_nodes_from(nodes)
    if not nodes:
        return None
    k = len(nodes)
    # integer weights: a cycle of weight W and length L <= k turns into
    # W*(k+1) - L, negative exactly when W <= 0
    for (u, v), w in best.items():
        g.add_edge(u, v, weight=w * (k + 1) - 1)
    if nx.is_directed_acyclic_graph(g):
        return None
    return nx.negative_edge_cycle(g, weight="weight")


def scc_signs(rg: RegionGame, stats: Optional[WeightStats] = None) -> list[SCCInfo]:
    if stats is None:
        stats = weight_stats(rg.game)
    cpg = build_corner_graph(rg, stats)
    graph = rg.state_graph()
    comp_of: dict[tuple[str, Region], int] = {}

    def state_key(s):
        return (s[0], s[1].ipart, s[1].groups)

    comps = sorted(
        (tuple(sorted(c, key=state_key)) for c in nx.strongly_connected_components(graph)),
        key=lambda comp: [state_key(s) for s in comp],
    )
    for i, comp in enumerate(comps):
        for s in comp:
            comp_of[s] = i
    internal_region: dict[int, bool] = {i: False for i in range(len(comps))}
    for e in rg.edges:
        if comp_of[e.src] == comp_of[e.dst]:
            internal_region[comp_of[e.src]] = True
    grouped: dict[int, list[tuple[object, object, int]]] = {i: [] for i in range(len(comps))}
    for u, v, w in cpg.edges:
        su, sv = _state_of(u), _state_of(v)
        cu = comp_of[su] if su is not None else comp_of[_state_of_dwell(u)]
        cv = comp_of[sv] if sv is not None else comp_of[_state_of_dwell(v)]
        if cu == cv:
            grouped[cu].append((u, v, w))
    out = []
    for i, comp in enumerate(comps):
        if not internal_region[i]:
            out.append(SCCInfo(comp, "Trivial"))
            continue
        sub = grouped[i]
        no_le0 = _has_cycle_at_most_zero(sub)
        no_ge0 = _has_cycle_at_most_zero([(u, v, -w) for u, v, w in sub])
        if no_le0 is None or no_ge0 is None:
            raise SolverInternalError("region cycle without a corner cycle")
        if not no_le0:
            sign = "Positive"
        elif not no_ge0:
            sign = "Negative"
        else:
            sign = "Mixed"
        out.append(SCCInfo(comp, sign))
    return out


def _state_of_dwell(node) -> tuple[str, Region]:
    # a dwell node belongs to the component of its (location, guard-region)
    _, lname, via = node
    return (lname, via)


def check_divergent(g: WTG) -> DivergenceReport:
    rg = build_region_game(g)
    signs = scc_signs(rg)
    witness = next((s for s in signs if s.sign == "Mixed"), None)
    return DivergenceReport(witness is None, signs, witness)


# ---------------------------------------------------------------------------
# iteration


@dataclass
class SolveReport:
    mode: str
    values: dict[str, PVF]
    eta: Fraction
    iterations: int
    converged: bool
    eta_trail: tuple[Fraction, ...]
    sccs: Optional[list[SCCInfo]] = None
    limit: Optional[dict[str, PVF]] = None

    def to_json(self) -> dict:
        game_order = list(self.values)
        out = {
            "mode": self.mode,
            "eta": frac_str(self.eta),
            "iterations": self.iterations,
            "converged": self.converged,
            "locations": [
                {"name": name, "pvf": self.values[name].to_json()} for name in game_order
            ],
        }
        lim = self.limit if self.limit is not None else robust_limit(self.values)
        out["limit"] = [
            {"name": name, "pieces": lim[name].to_json()["cells"]} for name in game_order
        ]
        return out


def _family_eta(V: dict[str, PVF]) -> Fraction:
    return min(v.eta for v in V.values())


class _StepCache:
    """Skips the recomputation of a location when none of its successor
    functions changed (object identity) since the last application."""

    def __init__(self, game: WTG):
        self.game = game
        self.succ = {
            loc.name: tuple(t.target for t in game.transitions_from(loc.name))
            for loc in game.locations
        }
        self.seen: dict[str, tuple[tuple[int, ...], PVF]] = {}

    def step(self, V: dict[str, PVF]) -> dict[str, PVF]:
        out = {}
        for loc in self.game.locations:
            name = loc.name
            if loc.owner == TARGET or not self.succ[name]:
                out[name] = V[name]  # both are fixed by the seed
                continue
            key = tuple(id(V[s]) for s in self.succ[name])
            hit = self.seen.get(name)
            if hit is not None and hit[0] == key:
                out[name] = hit[1]
            else:
                res = location_step(self.game, name, V)
                self.seen[name] = (key, res)
                out[name] = res
        return out


def solve_acyclic(g: WTG) -> SolveReport:
    d = depth(g)
    if d is None:
        raise NotAcyclic("the location graph has a cycle")
    V = initial_values(g)
    cache = _StepCache(g)
    trail = []
    for _ in range(d):
        V = cache.step(V)
        trail.append(_family_eta(V))
    eta = _family_eta(V)
    return SolveReport(
        mode="acyclic",
        values=V,
        eta=eta,
        iterations=d,
        converged=True,
        eta_trail=tuple(trail),
        limit=robust_limit(V),
    )


def _default_cap(g: WTG, rg: RegionGame) -> int:
    stats = weight_stats(g)
    cond = nx.condensation(rg.state_graph())
    dag_depth = nx.dag_longest_path_length(cond) if cond.number_of_nodes() else 0
    return 16 * len(rg.states) * max(1, stats.W_e) * (dag_depth + 1)


def solve_divergent(g: WTG, cap: Optional[int] = None) -> SolveReport:
    rg = build_region_game(g)
    signs = scc_signs(rg)
    witness = next((s for s in signs if s.sign == "Mixed"), None)
    if witness is not None:
        raise NotDivergent(
            "mixed-sign cycles through " + ", ".join(s[0] for s in witness.states[:4])
        )
    if cap is None:
        cap = _default_cap(g, rg)
    V = initial_values(g)
    cache = _StepCache(g)
    trail = []
    iterations = 0
    converged = False
    while iterations < cap:
        W = cache.step(V)
        iterations += 1
        trail.append(_family_eta(W))
        if all(W[k] is V[k] for k in V) or all(pvf_equal(W[k], V[k]) for k in V):
            V = W
            converged = True
            break
        V = W
    if not converged:
        raise NonConvergent(iterations)
    eta = _family_eta(V)
    return SolveReport(
        mode="divergent",
        values=V,
        eta=eta,
        iterations=iterations,
        converged=True,
        eta_trail=tuple(trail),
        sccs=signs,
        limit=robust_limit(V),
    )


def solve(g: WTG, mode: str = "auto", cap: Optional[int] = None) -> SolveReport:
    if mode == "acyclic":
        return solve_acyclic(g)
    if mode == "divergent":
        return solve_divergent(g, cap)
    if mode != "auto":
        raise ValueError(f"unknown mode {mode!r}")
    if depth(g) is not None:
        return solve_acyclic(g)
    return solve_divergent(g, cap)


# ---------------------------------------------------------------------------
# the perturbation limit


def _limit_cell(V: PVF, part0: Partition, cell0: str) -> str:
    """Sign vector (in V's partition) selected as p -> 0+ anywhere on the
    given cell of the p = 0 arrangement."""
    sig = []
    for e in V.partition.exprs:
        hit = part0.find_member(e.at_p0())
        if hit is None:
            raise SolverInternalError("missing p = 0 image of a member")
        idx, flip = hit
        s = cell0[idx]
        if flip < 0:
            s = ">" if s == "<" else "<" if s == ">" else "="
        if s == "=":
            s = ">" if e.gamma > 0 else "<" if e.gamma < 0 else "="
        sig.append(s)
    return "".join(sig)


def limit_pvf(V: PVF) -> PVF:
    """Pointwise limit for p -> 0+, as a parameter-free function.

    Cells that collapse at p = 0 inherit the piece of the cell that covers
    them for small positive p."""
    space = V.space
    part0 = enumerate_cells(space, [e.at_p0() for e in V.partition.exprs])
    pieces = {}
    for cell0 in part0.cells:
        src = V.pieces.get(_limit_cell(V, part0, cell0))
        if src is None:
            raise SolverInternalError("limit cell missing from the partition")
        pieces[cell0] = src.at_p0()
    return PVF(part0, pieces)


def robust_limit(V: dict[str, PVF]) -> dict[str, PVF]:
    return {name: limit_pvf(v) for name, v in V.items()}


def eval_limit(L: PVF, v: Sequence[Fraction]) -> ExtRat:
    """Evaluate a parameter-free limit function (p plays no role)."""
    return L.evaluate(v, Fraction(1, 2))


def decide_threshold(
    g: WTG, loc: str, v: Sequence[Fraction], lam: ExtRat
) -> bool:
    report = solve(g)
    lim = report.limit if report.limit is not None else robust_limit(report.values)
    return eval_limit(lim[loc], tuple(Fraction(x) for x in v)) <= lam
