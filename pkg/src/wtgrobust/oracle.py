"""Discretized ground-truth engine for perturbed weighted timed games.

Values are computed by backward induction over the finite grid
{0, step, 2*step, ...} of clock valuations, with one saturation bucket per
clock for values beyond the clock bound M (guards cannot distinguish such
values, and no move ever brings an unreset clock back below M).  All
quantities are held as int64 multiples of the grid step, so the induction
is exact integer arithmetic throughout; infinities are large saturated
sentinels.

Two delay conventions exist for Min's moves: the asymmetric window (the
guard must hold at nu+t and nu+t+2p, the opponent then enlarges the delay
by eps in [0, 2p]) and the centered window (t >= p, guard at nu+t-p and
nu+t+p, eps in [-p, p]).  Under the excessive rule the guard is checked at
nu+t only; the opponent still perturbs by [0, 2p].  Max moves are never
perturbed.

Quantitative values follow the infimum/supremum semantics: delay
candidates range over the grid points of the *closure* of the exact
feasible delay interval (an empty interval contributes nothing), which
keeps boundary infima exact — a guard x < 2 yields the value approached as
t tends to 2 - x.  The qualitative attractor, by contrast, admits only
strictly legal delays: winning requires an actual admissible move.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Optional

import numpy as np

from .model import INF, MIN, NEG_INF, TARGET, WTG, ExtRat, frac_str
from .solver import NonConvergent

__all__ = [
    "GridMismatch",
    "OracleConfig",
    "oracle_value",
    "oracle_reach",
    "oracle_csv",
    "STATE_CAP",
]

SHIFTED = "shifted"
CENTERED = "centered"
CONSERVATIVE = "conservative"
EXCESSIVE = "excessive"

STATE_CAP = 2_000_000

# int64 infinity sentinels, with headroom so per-move arithmetic cannot wrap
_INF_U = np.int64(2**60)
_NEG_U = -_INF_U
_TH = np.int64(2**59)
_BIG = 2**40  # "no upper bound" marker for delay intervals


class GridMismatch(ValueError):
    """The requested grid cannot represent the configuration exactly."""


@dataclass(frozen=True)
class OracleConfig:
    p: Fraction
    grid: Fraction
    convention: str = SHIFTED
    horizon: Optional[int] = None
    qualitative: bool = False
    semantics: str = CONSERVATIVE
    max_iters: int = 10_000

    def __post_init__(self):
        if not (0 < self.p <= Fraction(1, 2)):
            raise GridMismatch("perturbation must satisfy 0 < p <= 1/2")
        if self.grid <= 0:
            raise GridMismatch("grid step must be positive")
        if (self.p / self.grid).denominator != 1:
            raise GridMismatch("p must be a multiple of the grid step")
        if (1 / self.grid).denominator != 1:
            raise GridMismatch("1 must be a multiple of the grid step")
        if self.convention not in (SHIFTED, CENTERED):
            raise GridMismatch(f"unknown convention {self.convention!r}")
        if self.semantics not in (CONSERVATIVE, EXCESSIVE):
            raise GridMismatch(f"unknown semantics {self.semantics!r}")
        if self.horizon is not None and self.horizon < 0:
            raise GridMismatch("horizon must be nonnegative")


def _saturate(a: np.ndarray) -> np.ndarray:
    return np.where(a >= _TH, _INF_U, np.where(a <= -_TH, _NEG_U, a))


class _Engine:
    """Shared precomputation for one (game, config) pair."""

    def __init__(self, g: WTG, cfg: OracleConfig):
        self.g = g
        self.cfg = cfg
        self.n = len(g.clocks)
        self.units = int(1 / cfg.grid)  # grid points per time unit
        self.p_u = int(cfg.p / cfg.grid)
        self.mu = g.bound * self.units  # index of the value M
        # clock values in (M, M + p] must stay exact: a negative perturbation
        # can pull them back below M, where guards distinguish them again
        self.top = self.mu + self.p_u
        self.sent = self.top + 1  # saturation bucket index
        self.size = self.sent + 1
        states = len(g.locations) * self.size**self.n
        if states > STATE_CAP:
            raise GridMismatch(
                f"{states} grid states exceed the cap of {STATE_CAP}"
            )
        self.shape = (self.size,) * self.n
        self.idx = np.indices(self.shape)
        self._maps: dict[int, np.ndarray] = {}

        if cfg.semantics == EXCESSIVE:
            self.win_shifts = (0,)
            self.base_lo = 0
            self.eps = range(0, 2 * self.p_u + 1)
        elif cfg.convention == SHIFTED:
            self.win_shifts = (0, 2 * self.p_u)
            self.base_lo = 0
            self.eps = range(0, 2 * self.p_u + 1)
        else:
            self.win_shifts = (-self.p_u, self.p_u)
            self.base_lo = self.p_u
            self.eps = range(-self.p_u, self.p_u + 1)

    def shift_map(self, s: int) -> np.ndarray:
        """Per-axis arrival index after a time shift of s grid steps:
        saturated stays saturated, overshoot saturates, undershoot is
        clamped (such announce states are always masked infeasible)."""
        m = self._maps.get(s)
        if m is None:
            ax = np.arange(self.size)
            moved = np.clip(ax + s, 0, self.top)
            m = np.where((ax == self.sent) | (ax + s > self.top), self.sent, moved)
            self._maps[s] = m
        return m

    def arrival_ix(self, resets, s: int):
        zero = np.zeros(self.size, dtype=int)
        return np.ix_(*[
            zero if k in resets else self.shift_map(s) for k in range(self.n)
        ])

    def interval(self, guard, shifts, base_lo):
        """Exact feasible delay interval per state, in grid steps: arrays
        LO, HI (HI = _BIG when unbounded) plus whether the binding bound is
        strict, and the emptiness of the real interval."""
        LO_ns = np.full(self.shape, base_lo, dtype=np.int64)
        LO_s = np.full(self.shape, -1, dtype=np.int64)
        HI_ns = np.full(self.shape, _BIG, dtype=np.int64)
        HI_s = np.full(self.shape, _BIG, dtype=np.int64)
        for atom in guard.atoms:
            U = self.idx[atom.clock]
            sent = U == self.sent
            c_u = atom.bound * self.units
            for s in shifts:
                term = c_u - U - s
                if atom.op in (">", ">="):
                    # beyond-M clocks satisfy any lower bound at any delay
                    bound = np.where(sent, -1, term)
                    if atom.op == ">":
                        LO_s = np.maximum(LO_s, bound)
                    else:
                        LO_ns = np.maximum(LO_ns, bound)
                elif atom.op in ("<", "<="):
                    bound = np.where(sent, -_BIG, term)
                    if atom.op == "<":
                        HI_s = np.minimum(HI_s, bound)
                    else:
                        HI_ns = np.minimum(HI_ns, bound)
                else:  # equality: one nonstrict bound on each side
                    LO_ns = np.maximum(LO_ns, np.where(sent, 0, term))
                    HI_ns = np.minimum(HI_ns, np.where(sent, -_BIG, term))
        LO = np.maximum(LO_ns, LO_s)
        HI = np.minimum(HI_ns, HI_s)
        lower_open = LO_s == LO
        upper_open = HI_s == HI
        empty = (LO > HI) | ((LO == HI) & (lower_open | upper_open))
        return LO, HI, lower_open, upper_open, empty

    def transition_interval(self, t):
        owner = self.g.owner(t.source)
        if owner == MIN:
            return self.interval(t.guard, self.win_shifts, self.base_lo)
        return self.interval(t.guard, (0,), 0)

    def announce_value(self, t, V):
        """Value collected at the announce state nu+t: edge weight plus the
        (worst-case perturbed, for Min) value of the arrival state."""
        rate = self.g.loc_by_name[t.source].rate
        wt_u = t.weight * self.units
        if self.g.owner(t.source) == MIN:
            best = None
            for e in self.eps:
                arr = V[t.target][self.arrival_ix(t.resets, e)]
                cand = _saturate(arr + e * rate)
                best = cand if best is None else np.maximum(best, cand)
            return _saturate(best + wt_u)
        return _saturate(V[t.target][self.arrival_ix(t.resets, 0)] + wt_u)

    # -- quantitative induction -------------------------------------------

    def initial(self) -> dict[str, np.ndarray]:
        V = {}
        for loc in self.g.locations:
            fill = 0 if loc.owner == TARGET else _INF_U
            V[loc.name] = np.full(self.shape, fill, dtype=np.int64)
        return V

    def step(self, V: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        out = {}
        for loc in self.g.locations:
            outs = self.g.transitions_from(loc.name)
            if loc.owner == TARGET or not outs:
                out[loc.name] = V[loc.name]
                continue
            is_min = loc.owner == MIN
            neutral = _INF_U if is_min else _NEG_U
            fold = np.minimum if is_min else np.maximum
            best = np.full(self.shape, neutral, dtype=np.int64)
            any_move = np.zeros(self.shape, dtype=bool)
            for t in outs:
                LO, HI, lopen, uopen, empty = self.transition_interval(t)
                W = self.announce_value(t, V)
                rate = loc.rate
                if loc.urgent:
                    # only the exact delay 0 is available, so closure does
                    # not apply: 0 must genuinely lie in the window
                    ok = (
                        ~empty
                        & (LO == 0)
                        & ~lopen
                        & ((HI > 0) | ((HI == 0) & ~uopen))
                    )
                    any_move |= ok
                    best = fold(best, np.where(ok, W, neutral))
                    continue
                any_move |= ~empty
                for d in range(self.top + 2):
                    ok = ~empty & (LO <= d) & (d <= HI)
                    if not ok.any():
                        continue
                    cand = _saturate(W[self.arrival_ix((), d)] + d * rate)
                    best = fold(best, np.where(ok, cand, neutral))
                # unbounded window: the limit as the delay grows dominates
                # unless the fully saturated announce value is itself infinite
                # with the opposite sign
                tail = ~empty & (HI >= _BIG)
                w_sat = W[(self.sent,) * self.n]
                if is_min and rate < 0 and w_sat < _TH:
                    best = np.where(tail, _NEG_U, best)
                if not is_min and rate > 0 and w_sat > -_TH:
                    best = np.where(tail, _INF_U, best)
            # a state from which no transition is ever enabled is stuck and
            # never reaches the target
            out[loc.name] = np.where(any_move, best, _INF_U)
        return out

    def run(self) -> dict[str, np.ndarray]:
        from .model import depth

        V = self.initial()
        if self.cfg.horizon is not None:
            rounds = self.cfg.horizon
        else:
            d = depth(self.g)
            rounds = d if d is not None else None
        if rounds is not None:
            for _ in range(rounds):
                V = self.step(V)
            return V
        for _ in range(self.cfg.max_iters):
            nxt = self.step(V)
            if all(np.array_equal(nxt[k], V[k]) for k in V):
                return nxt
            V = nxt
        raise NonConvergent(self.cfg.max_iters)

    # -- qualitative attractor --------------------------------------------

    def legal(self, LO, HI, lopen, uopen, d: int):
        lo_ok = (d > LO) | ((d == LO) & ~lopen)
        hi_ok = (d < HI) | ((d == HI) & ~uopen)
        return lo_ok & hi_ok

    def attractor(self) -> dict[str, np.ndarray]:
        Wb = {
            loc.name: np.full(self.shape, loc.owner == TARGET, dtype=bool)
            for loc in self.g.locations
        }
        cap = len(self.g.locations) * self.size**self.n + 2
        for _ in range(cap):
            nxt = {}
            for loc in self.g.locations:
                outs = self.g.transitions_from(loc.name)
                if loc.owner == TARGET or not outs:
                    nxt[loc.name] = Wb[loc.name]
                    continue
                is_min = loc.owner == MIN
                win = np.zeros(self.shape, dtype=bool)
                all_good = np.ones(self.shape, dtype=bool)
                has_move = np.zeros(self.shape, dtype=bool)
                for t in outs:
                    LO, HI, lopen, uopen, _ = self.transition_interval(t)
                    if is_min:
                        good = None
                        for e in self.eps:
                            arr = Wb[t.target][self.arrival_ix(t.resets, e)]
                            good = arr if good is None else (good & arr)
                    else:
                        good = Wb[t.target][self.arrival_ix(t.resets, 0)]
                    delays = [0] if loc.urgent else range(self.top + 2)
                    for d in delays:
                        ok = self.legal(LO, HI, lopen, uopen, d)
                        if not ok.any():
                            continue
                        has_move |= ok
                        reach = good[self.arrival_ix((), d)]
                        if is_min:
                            win |= ok & reach
                        else:
                            all_good &= ~ok | reach
                step_win = win if is_min else (has_move & all_good)
                nxt[loc.name] = Wb[loc.name] | step_win
            if all(np.array_equal(nxt[k], Wb[k]) for k in Wb):
                return nxt
            Wb = nxt
        raise NonConvergent(cap)


def _export_states(eng: _Engine):
    """On-grid valuations of the clock box, as index tuples + Fractions."""
    axes = range(eng.mu + 1)
    for combo in product(axes, repeat=eng.n):
        yield combo, tuple(Fraction(k) * eng.cfg.grid for k in combo)


def oracle_value(g: WTG, cfg: OracleConfig) -> dict[tuple[str, tuple], ExtRat]:
    """Fixed-perturbation values at every grid state of the clock box."""
    eng = _Engine(g, cfg)
    V = eng.run()
    out: dict[tuple[str, tuple], ExtRat] = {}
    for loc in g.locations:
        arr = V[loc.name]
        for combo, val in _export_states(eng):
            u = int(arr[combo])
            if u >= _TH:
                out[(loc.name, val)] = INF
            elif u <= -_TH:
                out[(loc.name, val)] = NEG_INF
            else:
                out[(loc.name, val)] = Fraction(u) * cfg.grid
    return out


def oracle_reach(g: WTG, cfg: OracleConfig) -> set[tuple[str, tuple]]:
    """Grid states from which the minimizer can force reaching a target."""
    eng = _Engine(g, cfg)
    Wb = eng.attractor()
    return {
        (loc.name, val)
        for loc in g.locations
        for combo, val in _export_states(eng)
        if bool(Wb[loc.name][combo])
    }


def oracle_csv(g: WTG, values: dict[tuple[str, tuple], ExtRat]) -> str:
    lines = ["location," + ",".join(g.clocks) + ",value"]
    for (loc, val), v in sorted(values.items()):
        lines.append(
            loc + "," + ",".join(frac_str(x) for x in val) + "," + frac_str(v)
        )
    return "\n".join(lines) + "\n"
