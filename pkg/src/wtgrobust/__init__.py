"""Robust values of weighted timed games under guard-shrinking perturbation.

The value of a game state is the cheapest cost with which the minimizer can
force the target even when an adversary perturbs every announced delay
within a budget ``p``.  This package computes these values symbolically in
``p`` — as piecewise affine functions of the clock valuation whose pieces
carry the perturbation as a formal parameter — together with their
vanishing-perturbation limit, and validates them against an exact
grid-induction oracle.
"""

from .algebra import (
    ClockSpace,
    InfeasibleAtP,
    ParamExpr,
    Partition,
    SolverInternalError,
    enumerate_cells,
    intersect_partitions,
    refine_atomic,
)
from .gadget import GadgetMap, gadget_wellformed, to_excessive
from .model import (
    INF,
    MAX,
    MIN,
    NEG_INF,
    TARGET,
    Atom,
    GameParseError,
    Guard,
    Location,
    Transition,
    WTG,
    depth,
    guard_complement,
    parse_game,
    print_game,
)
from .oracle import (
    GridMismatch,
    OracleConfig,
    oracle_csv,
    oracle_reach,
    oracle_value,
)
from .pvf import (
    PVF,
    PerturbationTooLarge,
    apply_F,
    constant_pvf,
    initial_values,
    pvf_equal,
)
from .solver import (
    DivergenceReport,
    NonConvergent,
    NotAcyclic,
    NotDivergent,
    SolveReport,
    check_divergent,
    decide_threshold,
    eval_limit,
    robust_limit,
    scc_signs,
    solve,
    solve_acyclic,
    solve_divergent,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "ClockSpace",
    "DivergenceReport",
    "GadgetMap",
    "GameParseError",
    "GridMismatch",
    "Guard",
    "INF",
    "InfeasibleAtP",
    "Location",
    "MAX",
    "MIN",
    "NEG_INF",
    "NonConvergent",
    "NotAcyclic",
    "NotDivergent",
    "OracleConfig",
    "PVF",
    "ParamExpr",
    "Partition",
    "PerturbationTooLarge",
    "SolveReport",
    "SolverInternalError",
    "TARGET",
    "Transition",
    "WTG",
    "apply_F",
    "check_divergent",
    "constant_pvf",
    "decide_threshold",
    "depth",
    "enumerate_cells",
    "eval_limit",
    "gadget_wellformed",
    "guard_complement",
    "initial_values",
    "intersect_partitions",
    "oracle_csv",
    "oracle_reach",
    "oracle_value",
    "parse_game",
    "print_game",
    "pvf_equal",
    "refine_atomic",
    "robust_limit",
    "scc_signs",
    "solve",
    "solve_acyclic",
    "solve_divergent",
    "to_excessive",
]
