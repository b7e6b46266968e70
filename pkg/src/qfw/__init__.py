"""Hybrid Frank-Wolfe solver for linearly constrained quadratic binary programs.

The problem is lifted to a copositive program over conv{ww' : w binary};
every Frank-Wolfe step then reduces to an unconstrained QUBO handed to a
pluggable oracle (exhaustive, simulated annealing or a remote sampler).

The lifting function lives in :mod:`qfw.lift` (``qfw.lift.lift``); it is not
re-exported so that the submodule name stays unshadowed.
"""
from .engine import (
    FWAL,
    FWQP,
    Solution,
    SolverConfig,
    SolverError,
    SolverState,
    TraceRow,
    primal_gradient,
    prop1_bounds,
    solve,
    step,
    trace_to_csv,
)
from .lift import CopositiveProgram, adjoint_A, apply_A, lift_point, operator_norm_A
from .model import (
    InfeasibleError,
    ProblemError,
    QboProblem,
    brute_force_solve,
    evaluate,
    is_feasible,
    load_problem,
    permutation_problem,
    save_problem,
)
from .oracle import (
    AutoOracle,
    ExhaustiveOracle,
    OracleError,
    RemoteOracle,
    SaParams,
    SimulatedAnnealingOracle,
)
from .rounding import hungarian, round_solution

__version__ = "0.1.0"

__all__ = [
    "FWAL",
    "FWQP",
    "AutoOracle",
    "CopositiveProgram",
    "ExhaustiveOracle",
    "InfeasibleError",
    "OracleError",
    "ProblemError",
    "QboProblem",
    "RemoteOracle",
    "SaParams",
    "SimulatedAnnealingOracle",
    "Solution",
    "SolverConfig",
    "SolverError",
    "SolverState",
    "TraceRow",
    "adjoint_A",
    "apply_A",
    "brute_force_solve",
    "evaluate",
    "hungarian",
    "is_feasible",
    "lift_point",
    "load_problem",
    "operator_norm_A",
    "permutation_problem",
    "primal_gradient",
    "prop1_bounds",
    "round_solution",
    "save_problem",
    "solve",
    "step",
    "trace_to_csv",
]
