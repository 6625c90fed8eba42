"""Command-line front end.

Subcommands mirror the library surface: ``solve`` (parametric value
functions), ``eval`` (one state at one perturbation), ``limit`` (the
vanishing-perturbation value), ``check`` (divergence analysis), ``gadget``
(the guard-checkpoint reduction) and ``oracle`` (grid ground truth).

Rationals are written ``n/d`` everywhere; decimals are rejected so that no
precision is lost silently.  Output is a pure function of the input file
and flags.  Exit codes: 0 success, 1 input error, 2 non-convergence,
3 internal assertion failure.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction

import click

from .gadget import to_excessive
from .model import (
    INF,
    NEG_INF,
    GameParseError,
    WTG,
    frac_str,
    parse_game,
    print_game,
)
from .oracle import (
    CENTERED,
    CONSERVATIVE,
    EXCESSIVE,
    SHIFTED,
    GridMismatch,
    OracleConfig,
    oracle_csv,
    oracle_reach,
    oracle_value,
)
from .pvf import PerturbationTooLarge
from .solver import NonConvergent, check_divergent, eval_limit, solve


def _rat(text: str) -> Fraction:
    if "." in text:
        raise click.BadParameter(f"{text!r}: decimals are not accepted, use n/d")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"bad rational {text!r}")


def _load(path: str) -> WTG:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_game(fh.read())


def _valuation(g: WTG, text: str) -> tuple[Fraction, ...]:
    given: dict[str, Fraction] = {}
    for item in text.split(","):
        name, eq, raw = item.partition("=")
        if not eq:
            raise click.BadParameter(f"expected clock=value, got {item!r}")
        name = name.strip()
        if name not in g.clocks:
            raise click.BadParameter(f"unknown clock {name!r}")
        if name in given:
            raise click.BadParameter(f"clock {name!r} assigned twice")
        given[name] = _rat(raw.strip())
    missing = [c for c in g.clocks if c not in given]
    if missing:
        raise click.BadParameter(f"missing clocks: {', '.join(missing)}")
    for name, x in given.items():
        if not (0 <= x <= g.bound):
            raise click.BadParameter(
                f"clock {name} value {frac_str(x)} outside [0, {g.bound}]"
            )
    return tuple(given[c] for c in g.clocks)


def _known_loc(g: WTG, name: str) -> str:
    if name not in g.loc_by_name:
        raise click.BadParameter(f"unknown location {name!r}")
    return name


def _sign_summary(sccs) -> str:
    counts = {"Positive": 0, "Negative": 0, "Mixed": 0, "Trivial": 0}
    for s in sccs:
        counts[s.sign] += 1
    if counts["Mixed"] == 0 and counts["Positive"] == 0 and counts["Negative"] == 0:
        return "all SCCs trivial"
    return ", ".join(f"{k}={v}" for k, v in counts.items() if v)


@click.group()
def cli():
    """Robust value computation for weighted timed games."""


@cli.command("solve")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["auto", "acyclic", "divergent"]), default="auto")
@click.option("--max-iters", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--plot", "plot_grid", metavar="GRID", default=None,
              help="emit a float-sampled value grid at p = eta/2 (plotting only)")
def solve_cmd(file, mode, max_iters, out, plot_grid):
    """Compute parametric value functions for every location."""
    g = _load(file)
    report = solve(g, mode=mode, cap=max_iters)
    payload = json.dumps(report.to_json(), indent=2) + "\n"
    if out is not None:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(payload)
        click.echo(
            f"{report.mode}: converged in {report.iterations} iterations, "
            f"eta {frac_str(report.eta)}"
        )
    else:
        click.echo(payload, nl=False)
    if plot_grid is not None:
        step = _rat(plot_grid)
        if step <= 0:
            raise click.BadParameter("plot grid step must be positive")
        click.echo(_plot_csv(g, report, step), nl=False)


def _plot_csv(g: WTG, report, step: Fraction) -> str:
    p = report.eta / 2
    lines = ["location," + ",".join(g.clocks) + ",value"]
    axis = []
    k = 0
    while k * step <= g.bound:
        axis.append(k * step)
        k += 1
    from itertools import product

    for loc in g.locations:
        f = report.values[loc.name]
        for v in product(axis, repeat=len(g.clocks)):
            try:
                val = f.evaluate(v, p)
                cell = repr(float(val))
            except PerturbationTooLarge:
                cell = "nan"
            lines.append(
                loc.name + "," + ",".join(repr(float(x)) for x in v) + "," + cell
            )
    return "\n".join(lines) + "\n"


@cli.command("eval")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--p", "p_text", required=True, metavar="N/D")
@click.option("--loc", required=True)
@click.option("--val", required=True, metavar="x=N/D,...")
def eval_cmd(file, p_text, loc, val):
    """Evaluate one location at one valuation and perturbation."""
    g = _load(file)
    p = _rat(p_text)
    v = _valuation(g, val)
    name = _known_loc(g, loc)
    report = solve(g)
    click.echo(frac_str(report.values[name].evaluate(v, p)))


@cli.command("limit")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--loc", required=True)
@click.option("--val", required=True, metavar="x=N/D,...")
def limit_cmd(file, loc, val):
    """Evaluate the vanishing-perturbation value at one valuation."""
    g = _load(file)
    v = _valuation(g, val)
    name = _known_loc(g, loc)
    report = solve(g)
    click.echo(frac_str(eval_limit(report.limit[name], v)))


@cli.command("check")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
def check_cmd(file):
    """Classify cycle signs and decide divergence."""
    g = _load(file)
    rep = check_divergent(g)
    head = "Divergent" if rep.divergent else "NotDivergent"
    click.echo(f"{head} ({_sign_summary(rep.sccs)})")


@cli.command("gadget")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def gadget_cmd(file, out):
    """Rewrite guard checks into checkpoint locations and save the result."""
    g = _load(file)
    m = to_excessive(g)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write(print_game(m.game))
    click.echo(
        f"{len(m.game.locations)} locations, {len(m.game.transitions)} transitions"
    )


@cli.command("oracle")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--p", "p_text", required=True, metavar="N/D")
@click.option("--grid", "grid_text", required=True, metavar="N/D")
@click.option("--convention", type=click.Choice([SHIFTED, CENTERED]), default=SHIFTED)
@click.option("--horizon", type=int, default=None)
@click.option("--qualitative", is_flag=True)
@click.option("--semantics", type=click.Choice([CONSERVATIVE, EXCESSIVE]),
              default=CONSERVATIVE)
def oracle_cmd(file, p_text, grid_text, convention, horizon, qualitative, semantics):
    """Exact grid values (or winning states) by backward induction."""
    g = _load(file)
    cfg = OracleConfig(
        p=_rat(p_text),
        grid=_rat(grid_text),
        convention=convention,
        horizon=horizon,
        qualitative=qualitative,
        semantics=semantics,
    )
    if qualitative:
        win = oracle_reach(g, cfg)
        lines = ["location," + ",".join(g.clocks) + ",winning"]
        for loc, v in sorted(win):
            lines.append(loc + "," + ",".join(frac_str(x) for x in v) + ",1")
        click.echo("\n".join(lines))
    else:
        click.echo(oracle_csv(g, oracle_value(g, cfg)), nl=False)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="wtgrobust", standalone_mode=False)
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        print("aborted", file=sys.stderr)
        return 1
    except (GameParseError, GridMismatch, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NonConvergent as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - last-resort mapping
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
