"""Reduction from conservative guard checking to excessive semantics.

Under the conservative rule a minimizing player may only take a transition
when the guard holds along the whole perturbation window.  The reduction
makes this structural instead: every Min transition is split into a free
move to a fresh urgent Max *checkpoint*, from which the opponent either
fires the original transition or, whenever the (possibly perturbed) clock
values violate the guard, diverts the play into a sink location from which
the target is unreachable.  On the rebuilt game the plain excessive rule
(guard checked only at the chosen instant) yields the same winning
behaviour: keeping the whole window inside the guard is the only way for
Min to survive the checkpoint.

Checkpoints and the sink carry rate 0 so no extra weight accrues; the
original transition weight moves onto the entry edge.  Max transitions are
copied unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .model import (
    MAX,
    MIN,
    Guard,
    Location,
    Transition,
    WTG,
    guard_complement,
)

__all__ = ["GadgetMap", "to_excessive", "gadget_wellformed"]


@dataclass
class GadgetMap:
    """The rebuilt game together with the bookkeeping of the construction:
    for every replaced Min transition (keyed by its index in the source
    transition tuple) the name of its checkpoint location, and the name of
    the sink."""

    game: WTG
    source: WTG
    checkpoints: dict[int, str]
    frown: str

    def to_json(self) -> dict:
        clocks = self.source.clocks
        return {
            "frown": self.frown,
            "checkpoints": [
                {
                    "transition": i,
                    "source": self.source.transitions[i].source,
                    "target": self.source.transitions[i].target,
                    "guard": self.source.transitions[i].guard.text(clocks),
                    "checkpoint": name,
                }
                for i, name in sorted(self.checkpoints.items())
            ],
        }


def _fresh(used: set[str], base: str) -> str:
    name = base
    k = 1
    while name in used:
        k += 1
        name = f"{base}_{k}"
    used.add(name)
    return name


def to_excessive(g: WTG) -> GadgetMap:
    """Rebuild the game as described in the module docstring."""
    used = {loc.name for loc in g.locations}
    frown = _fresh(used, "frown")

    locations = list(g.locations)
    transitions: list[Transition] = []
    checkpoints: dict[int, str] = {}

    for i, t in enumerate(g.transitions):
        if g.owner(t.source) != MIN:
            transitions.append(t)
            continue
        chk = _fresh(used, f"{t.source}_to_{t.target}")
        checkpoints[i] = chk
        locations.append(Location(chk, MAX, 0, urgent=True))
        transitions.append(Transition(t.source, Guard(), frozenset(), chk, t.weight))
        transitions.append(Transition(chk, t.guard, t.resets, t.target, 0))
        for piece in guard_complement(t.guard):
            transitions.append(Transition(chk, piece, frozenset(), frown, 0))

    locations.append(Location(frown, MIN, 0))
    transitions.append(Transition(frown, Guard(), frozenset(), frown, 0))

    out = WTG(g.clocks, g.bound, tuple(locations), tuple(transitions), g.init)
    return GadgetMap(out, g, checkpoints, frown)


def _grid_points(n: int, bound: int, step: Fraction):
    axis = [k * step for k in range(int(bound / step) + 1)]
    return product(axis, repeat=n)


def gadget_wellformed(m: GadgetMap, step: Fraction = Fraction(1, 4)) -> bool:
    """Check the construction invariants on a finished map: location count,
    ownership/urgency/rate of the new locations, weight transfer, the sink
    self-loop, and that every checkpoint's exit guard together with its
    diversion guards covers the whole clock box (sampled on a grid)."""
    g, src = m.game, m.source
    min_count = sum(1 for t in src.transitions if src.owner(t.source) == MIN)
    if len(g.locations) != len(src.locations) + 1 + min_count:
        return False
    if set(m.checkpoints) != {
        i for i, t in enumerate(src.transitions) if src.owner(t.source) == MIN
    }:
        return False

    sink = g.loc_by_name.get(m.frown)
    if sink is None or sink.owner != MIN or sink.rate != 0 or sink.urgent:
        return False
    loops = g.transitions_from(m.frown)
    if len(loops) != 1:
        return False
    loop = loops[0]
    if not (loop.target == m.frown and loop.guard.is_true() and not loop.resets and loop.weight == 0):
        return False

    for loc in src.locations:
        if g.loc_by_name.get(loc.name) != loc:
            return False
    for t in src.transitions:
        if src.owner(t.source) != MIN and t not in g.transitions:
            return False

    for i, chk_name in m.checkpoints.items():
        t = src.transitions[i]
        chk = g.loc_by_name.get(chk_name)
        if chk is None or chk.owner != MAX or not chk.urgent or chk.rate != 0:
            return False
        entries = [
            e
            for e in g.transitions_from(t.source)
            if e.target == chk_name and e.guard.is_true() and not e.resets
        ]
        if len(entries) != 1 or entries[0].weight != t.weight:
            return False
        outs = g.transitions_from(chk_name)
        exits = [e for e in outs if e.target == t.target]
        if len(exits) != 1:
            return False
        exit_e = exits[0]
        if exit_e.guard != t.guard or exit_e.resets != t.resets or exit_e.weight != 0:
            return False
        diversions = [e for e in outs if e is not exit_e]
        if any(
            e.target != m.frown or e.resets or e.weight != 0 for e in diversions
        ):
            return False
        for v in _grid_points(len(g.clocks), g.bound, step):
            covered = exit_e.guard.sat(v) or any(d.guard.sat(v) for d in diversions)
            if not covered:
                return False

    return True
