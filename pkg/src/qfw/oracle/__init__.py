"""Backends for the unconstrained QUBO subproblem ``min w'Gw, w binary``."""
from .local import (
    EXHAUSTIVE_CAP,
    AutoOracle,
    ExhaustiveOracle,
    OracleError,
    OracleResult,
    SaParams,
    SimulatedAnnealingOracle,
    qubo_value,
    solve_exhaustive,
    solve_sa,
)
from .remote import ProtocolError, RemoteOracle, make_server, serve_in_thread

__all__ = [
    "EXHAUSTIVE_CAP",
    "AutoOracle",
    "ExhaustiveOracle",
    "OracleError",
    "OracleResult",
    "ProtocolError",
    "RemoteOracle",
    "SaParams",
    "SimulatedAnnealingOracle",
    "make_server",
    "qubo_value",
    "serve_in_thread",
    "solve_exhaustive",
    "solve_sa",
]
