"""Weighted timed game model: clocks, guards, locations, transitions, parser.

Conventions used throughout the package:

* all finite numbers are ``fractions.Fraction`` (or plain ints); the only
  floats ever formed are the infinity sentinels ``INF``/``NEG_INF``, which
  stand for the extended-rational values and never enter finite arithmetic;
* clocks are addressed by their index in ``WTG.clocks``;
* a valuation is a tuple of Fractions, one entry per clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

INF = float("inf")
NEG_INF = float("-inf")

#: extended rational: a Fraction, an int, or one of the infinity sentinels
ExtRat = Union[Fraction, int, float]

MIN = "min"
MAX = "max"
TARGET = "target"

_NEGATE = {"<": ">=", "<=": ">", ">=": "<", ">": "<="}
_FLIP = {"<": ">", "<=": ">=", ">=": "<=", ">": "<", "=": "="}


class GameParseError(ValueError):
    """Raised on malformed game text; carries a 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def parse_frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational {text!r}") from exc


def frac_str(x: ExtRat) -> str:
    if x == INF:
        return "inf"
    if x == NEG_INF:
        return "-inf"
    return str(Fraction(x))


@dataclass(frozen=True)
class Atom:
    """One conjunct ``x OP c`` of a guard (c a nonnegative integer)."""

    clock: int
    op: str  # one of < <= = >= >
    bound: int

    def sat(self, value: Fraction) -> bool:
        if self.op == "<":
            return value < self.bound
        if self.op == "<=":
            return value <= self.bound
        if self.op == "=":
            return value == self.bound
        if self.op == ">=":
            return value >= self.bound
        return value > self.bound

    def text(self, clocks: tuple[str, ...]) -> str:
        return f"{clocks[self.clock]} {self.op} {self.bound}"


class Guard:
    """Conjunction of atoms; the empty conjunction is ``true``.

    Keeps the original atom scan order (used by guard_complement) and a
    normalized per-clock view: at most one lower and one upper bound each.
    """

    def __init__(self, atoms: Iterable[Atom] = ()):
        self.atoms: tuple[Atom, ...] = tuple(atoms)
        # clock -> (bound, strict); lower defaults to (0, False)
        self.lower: dict[int, tuple[int, bool]] = {}
        self.upper: dict[int, tuple[int, bool]] = {}
        for a in self.atoms:
            if a.op in (">", ">=", "="):
                cand = (a.bound, a.op == ">")
                cur = self.lower.get(a.clock)
                if cur is None or (cand[0], cand[1]) > (cur[0], cur[1]):
                    self.lower[a.clock] = cand
            if a.op in ("<", "<=", "="):
                cand = (a.bound, a.op == "<")
                cur = self.upper.get(a.clock)
                if cur is None or (cand[0], not cand[1]) < (cur[0], not cur[1]):
                    self.upper[a.clock] = cand

    def is_true(self) -> bool:
        return not self.atoms

    def is_empty(self) -> bool:
        """True when the normalized bounds are contradictory."""
        for clock, (lo, lo_strict) in self.lower.items():
            if clock in self.upper:
                hi, hi_strict = self.upper[clock]
                if lo > hi or (lo == hi and (lo_strict or hi_strict)):
                    return True
        return False

    def sat(self, valuation: tuple[Fraction, ...]) -> bool:
        return all(a.sat(valuation[a.clock]) for a in self.atoms)

    def clocks_used(self) -> set[int]:
        return {a.clock for a in self.atoms}

    def max_bound(self) -> int:
        return max((a.bound for a in self.atoms), default=0)

    def text(self, clocks: tuple[str, ...]) -> str:
        if not self.atoms:
            return "true"
        return " && ".join(a.text(clocks) for a in self.atoms)

    def __eq__(self, other) -> bool:
        return isinstance(other, Guard) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return hash(self.atoms)

    def __repr__(self) -> str:
        return f"Guard({self.atoms!r})"


def guard_sat(g: Guard, valuation: tuple[Fraction, ...]) -> bool:
    return g.sat(valuation)


def guard_complement(g: Guard) -> list[Guard]:
    """Single-atom guards covering the complement of g, in atom scan order.

    An equality atom contributes two pieces (strictly below, strictly above).
    Pieces may overlap for multi-clock guards; their union is exact.
    """
    pieces: list[Guard] = []
    for a in g.atoms:
        if a.op == "=":
            pieces.append(Guard([Atom(a.clock, "<", a.bound)]))
            pieces.append(Guard([Atom(a.clock, ">", a.bound)]))
        else:
            pieces.append(Guard([Atom(a.clock, _NEGATE[a.op], a.bound)]))
    return pieces


@dataclass(frozen=True)
class Location:
    name: str
    owner: str  # min | max | target
    rate: int = 0  # weight per time unit spent here
    urgent: bool = False


@dataclass(frozen=True)
class Transition:
    source: str
    guard: Guard
    resets: frozenset[int]
    target: str
    weight: int


class WTG:
    """A weighted timed game with clocks bounded by M."""

    def __init__(
        self,
        clocks: tuple[str, ...],
        bound: int,
        locations: tuple[Location, ...],
        transitions: tuple[Transition, ...],
        init: Optional[tuple[str, tuple[Fraction, ...]]] = None,
    ):
        self.clocks = clocks
        self.bound = bound
        self.locations = locations
        self.transitions = transitions
        self.init = init
        self.loc_by_name = {loc.name: loc for loc in locations}
        self._out: dict[str, list[Transition]] = {loc.name: [] for loc in locations}
        for t in transitions:
            self._out[t.source].append(t)
        self._validate()

    def _validate(self) -> None:
        if len(set(self.clocks)) != len(self.clocks):
            raise GameParseError("duplicate clock names")
        if len(self.loc_by_name) != len(self.locations):
            raise GameParseError("duplicate location names")
        if self.bound < 1:
            raise GameParseError("bound must be a positive integer")
        for t in self.transitions:
            if self.loc_by_name[t.source].owner == TARGET:
                raise GameParseError(f"target location {t.source!r} cannot have outgoing edges")
            for a in t.guard.atoms:
                if a.bound > self.bound:
                    raise GameParseError(
                        f"guard bound exceeds M on edge {t.source} -> {t.target}"
                    )
        if self.init is not None:
            name, val = self.init
            if name not in self.loc_by_name:
                raise GameParseError(f"unknown init location {name}")
            for v in val:
                if v < 0 or v > self.bound:
                    raise GameParseError("init valuation outside [0, M]")

    def transitions_from(self, loc_name: str) -> list[Transition]:
        return self._out[loc_name]

    def owner(self, loc_name: str) -> str:
        return self.loc_by_name[loc_name].owner

    def clock_index(self, name: str) -> int:
        return self.clocks.index(name)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, WTG)
            and self.clocks == other.clocks
            and self.bound == other.bound
            and self.locations == other.locations
            and self.transitions == other.transitions
            and self.init == other.init
        )


@dataclass(frozen=True)
class WeightStats:
    W_loc: int
    W_tr: int
    W_e: int


def weight_stats(g: WTG) -> WeightStats:
    w_loc = max((abs(loc.rate) for loc in g.locations), default=0)
    w_tr = max((abs(t.weight) for t in g.transitions), default=0)
    return WeightStats(w_loc, w_tr, g.bound * w_loc + w_tr)


def depth(g: WTG) -> Optional[int]:
    """Longest location-graph path length, or None when the graph has a cycle."""
    succ: dict[str, list[str]] = {loc.name: [] for loc in g.locations}
    for t in g.transitions:
        succ[t.source].append(t.target)
    state: dict[str, int] = {}  # 0 = visiting, 1 = done
    longest: dict[str, int] = {}

    def visit(name: str) -> Optional[int]:
        if state.get(name) == 0:
            return None  # back edge: cycle
        if state.get(name) == 1:
            return longest[name]
        state[name] = 0
        best = 0
        for nxt in succ[name]:
            sub = visit(nxt)
            if sub is None:
                return None
            best = max(best, sub + 1)
        state[name] = 1
        longest[name] = best
        return best

    overall = 0
    for loc in g.locations:
        d = visit(loc.name)
        if d is None:
            return None
        overall = max(overall, d)
    return overall


# ---------------------------------------------------------------------------
# textual format


_OPS = ("<=", ">=", "<", ">", "=")


def _parse_guard_text(text: str, clocks: tuple[str, ...], line: int) -> Guard:
    """Accepts '&&'-joined atoms; each atom is `x OP c`, `c OP x` or the
    chained form `c OP x OP c`."""
    text = text.strip()
    if text in ("true", ""):
        return Guard()
    atoms: list[Atom] = []
    for part in text.split("&&"):
        tokens = part.replace("<=", " <= ").replace(">=", " >= ")
        for op in ("<", ">", "="):
            # pad single-char ops not already padded by the two-char pass
            tokens = " ".join(
                tok if tok in _OPS else tok.replace(op, f" {op} ")
                for tok in tokens.split()
            )
        toks = tokens.split()
        if len(toks) == 3:
            chains = [toks]
        elif len(toks) == 5:
            chains = [toks[0:3], toks[2:5]]
        else:
            raise GameParseError(f"cannot parse guard atom {part.strip()!r}", line)
        for lhs, op, rhs in chains:
            if op not in _OPS:
                raise GameParseError(f"bad comparison {op!r} in guard", line)
            if lhs in clocks:
                clock, bound_text, final_op = lhs, rhs, op
            elif rhs in clocks:
                clock, bound_text, final_op = rhs, lhs, _FLIP[op]
            else:
                raise GameParseError(f"no known clock in atom {part.strip()!r}", line)
            if not bound_text.lstrip("-").isdigit():
                raise GameParseError(f"guard bound {bound_text!r} is not an integer", line)
            bound = int(bound_text)
            if bound < 0:
                raise GameParseError("guard bounds must be nonnegative", line)
            atoms.append(Atom(clocks.index(clock), final_op, bound))
    return Guard(atoms)


def parse_game(text: str) -> WTG:
    clocks: Optional[tuple[str, ...]] = None
    bound: Optional[int] = None
    locations: list[Location] = []
    transitions: list[Transition] = []
    init: Optional[tuple[str, tuple[Fraction, ...]]] = None
    loc_names: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        kind = words[0]

        if kind == "clocks":
            if len(words) < 2:
                raise GameParseError("clocks line needs at least one clock", lineno)
            clocks = tuple(words[1:])
        elif kind == "bound":
            if len(words) != 2 or not words[1].isdigit():
                raise GameParseError("bound line needs one positive integer", lineno)
            bound = int(words[1])
        elif kind == "location":
            if len(words) < 3:
                raise GameParseError("location line needs a name and an owner", lineno)
            name, owner = words[1], words[2]
            if owner not in (MIN, MAX, TARGET):
                raise GameParseError(f"unknown owner {owner!r}", lineno)
            rate = 0
            urgent = False
            for extra in words[3:]:
                if extra.startswith("weight="):
                    try:
                        rate = int(extra[len("weight="):])
                    except ValueError:
                        raise GameParseError("location weight must be an integer", lineno)
                elif extra == "urgent":
                    urgent = True
                else:
                    raise GameParseError(f"unexpected token {extra!r}", lineno)
            if owner == TARGET:
                rate = 0
            if name in loc_names:
                raise GameParseError(f"duplicate location {name!r}", lineno)
            loc_names.add(name)
            locations.append(Location(name, owner, rate, urgent))
        elif kind == "edge":
            if clocks is None:
                raise GameParseError("edge before clocks line", lineno)
            try:
                arrow = words.index("->")
            except ValueError:
                raise GameParseError("edge line needs 'src -> dst'", lineno)
            source = " ".join(words[1:arrow])
            rest = line.split("->", 1)[1].strip()
            if not rest:
                raise GameParseError("edge line needs a destination", lineno)
            dest_word = rest.split()[0]
            rest = rest[len(dest_word):].strip()
            guard = Guard()
            resets: frozenset[int] = frozenset()
            weight = 0
            while rest:
                if rest.startswith("guard"):
                    rest = rest[len("guard"):].strip()
                    if not rest.startswith('"'):
                        raise GameParseError("guard text must be double-quoted", lineno)
                    end = rest.find('"', 1)
                    if end < 0:
                        raise GameParseError("unterminated guard string", lineno)
                    guard = _parse_guard_text(rest[1:end], clocks, lineno)
                    rest = rest[end + 1:].strip()
                elif rest.startswith("reset"):
                    rest = rest[len("reset"):].strip()
                    names = rest.split()[0] if rest else ""
                    rest = rest[len(names):].strip()
                    idxs = []
                    for cname in names.split(","):
                        cname = cname.strip()
                        if cname not in clocks:
                            raise GameParseError(f"unknown clock {cname!r} in reset", lineno)
                        idxs.append(clocks.index(cname))
                    resets = frozenset(idxs)
                elif rest.startswith("weight="):
                    word = rest.split()[0]
                    rest = rest[len(word):].strip()
                    try:
                        weight = int(word[len("weight="):])
                    except ValueError:
                        raise GameParseError("edge weight must be an integer", lineno)
                else:
                    raise GameParseError(f"unexpected edge token {rest.split()[0]!r}", lineno)
            for name in (source, dest_word):
                if name not in loc_names:
                    raise GameParseError(f"unknown location {name!r}", lineno)
            transitions.append(Transition(source, guard, resets, dest_word, weight))
        elif kind == "init":
            if clocks is None:
                raise GameParseError("init before clocks line", lineno)
            if len(words) < 2:
                raise GameParseError("init line needs a location", lineno)
            name = words[1]
            values = {c: Fraction(0) for c in clocks}
            for assign in words[2:]:
                if "=" not in assign:
                    raise GameParseError(f"bad init assignment {assign!r}", lineno)
                cname, val = assign.split("=", 1)
                if cname not in clocks:
                    raise GameParseError(f"unknown clock {cname!r} in init", lineno)
                try:
                    values[cname] = parse_frac(val)
                except ValueError:
                    raise GameParseError(f"bad rational {val!r} in init", lineno)
            init = (name, tuple(values[c] for c in clocks))
        else:
            raise GameParseError(f"unknown directive {kind!r}", lineno)

    if clocks is None:
        raise GameParseError("missing clocks line")
    if bound is None:
        raise GameParseError("missing bound line")
    return WTG(clocks, bound, tuple(locations), tuple(transitions), init)


def print_game(g: WTG) -> str:
    """Emit the line format parse_game reads; parse(print(g)) == g."""
    out = ["clocks " + " ".join(g.clocks), f"bound {g.bound}"]
    for loc in g.locations:
        line = f"location {loc.name} {loc.owner}"
        if loc.owner != TARGET:
            line += f" weight={loc.rate}"
        if loc.urgent:
            line += " urgent"
        out.append(line)
    for t in g.transitions:
        line = f"edge {t.source} -> {t.target}"
        if not t.guard.is_true():
            line += f' guard "{t.guard.text(g.clocks)}"'
        if t.resets:
            names = ",".join(g.clocks[i] for i in sorted(t.resets))
            line += f" reset {names}"
        line += f" weight={t.weight}"
        out.append(line)
    if g.init is not None:
        name, val = g.init
        assigns = " ".join(f"{c}={frac_str(v)}" for c, v in zip(g.clocks, val))
        out.append(f"init {name} {assigns}")
    return "\n".join(out) + "\n"
