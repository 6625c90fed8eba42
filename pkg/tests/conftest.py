from pathlib import Path

import pytest

from wtgrobust.model import parse_game

FIXTURES = Path(__file__).parent / "fixtures"


def load(name):
    return parse_game((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def fig1():
    return load("fig1.game")


@pytest.fixture(scope="session")
def fig1_path():
    return str(FIXTURES / "fig1.game")


@pytest.fixture(scope="session")
def loop_pos():
    return load("loop_pos.game")


@pytest.fixture(scope="session")
def loop_neg():
    return load("loop_neg.game")


@pytest.fixture(scope="session")
def loop_zero():
    return load("loop_zero.game")


@pytest.fixture(scope="session")
def micro_games():
    return [load("micro_upper.game"), load("micro_eq.game"), load("micro_reset.game")]


@pytest.fixture(scope="session")
def fig1_report(fig1):
    from wtgrobust.solver import solve_acyclic

    return solve_acyclic(fig1)
