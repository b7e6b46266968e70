"""Frank-Wolfe iterations on the lifted problem.

FWAL minimizes the augmented Lagrangian

    L(W; y, y') = <C, W> + y'(AW - v) + beta/2 ||AW - v||^2
                  + min_{l <= om <= u} y''(EW - om) + beta/2 ||EW - om||^2

over conv{ww' : w binary} with conditional-gradient steps whose linear
subproblem is a QUBO, followed by a dual ascent step. FWQP is the same loop
with the duals frozen at zero.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lift as lifting
from .model import evaluate, is_feasible
from .oracle import OracleError
from .rounding import RANK_ONE, round_solution

log = logging.getLogger(__name__)

FWAL = "fwal"
FWQP = "fwqp"
DUAL_CONSTANT = "constant"
DUAL_THEORETICAL = "theoretical"
DUAL_ZERO = "zero"

CONTINUE = "continue"
SWITCH = "switch_to_projected"
STOP = "stop"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    variant: str = FWAL
    max_iters: int = 250
    beta0: float = 1.0
    dual_policy: str = DUAL_CONSTANT
    dual_bound: float | None = None  # D; required by the theoretical policy
    early_stop: bool = False
    rounding: str = RANK_ONE
    feasibility_tol: float = 1e-6
    objective_tol: float = 1e-9
    rounded_every: int = 10
    diagnostics: bool = True
    track_atoms: bool = False

    def __post_init__(self):
        if self.variant not in (FWAL, FWQP):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.dual_policy not in (DUAL_CONSTANT, DUAL_THEORETICAL, DUAL_ZERO):
            raise ValueError(f"unknown dual policy {self.dual_policy!r}")
        if self.dual_policy == DUAL_THEORETICAL and not self.dual_bound:
            raise ValueError("the theoretical dual policy needs dual_bound > 0")
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class TraceRow:
    t: int
    objective: float
    infeasibility: float
    ineq_violation: float
    oracle_value: float
    rounded_objective: float
    bound_subopt: float
    bound_infeas: float


TRACE_FIELDS = ["t", "objective", "infeasibility", "ineq_violation", "oracle_value",
                "rounded_objective", "bound_subopt", "bound_infeas"]


@dataclass
class SolverState:
    t: int
    W: np.ndarray
    y: np.ndarray
    y_ineq: np.ndarray
    beta: float
    trace: list = field(default_factory=list)
    atoms: list | None = None

    @classmethod
    def initial(cls, cp, beta0=1.0, track_atoms=False):
        return cls(1, np.zeros((cp.p, cp.p)), np.zeros(cp.d), np.zeros(2 * cp.q),
                   beta0 * math.sqrt(2.0), [], [] if track_atoms else None)


@dataclass
class Solution:
    W: np.ndarray
    x: np.ndarray
    value: float
    rounding: object
    trace: list
    diagnostics: dict
    y: np.ndarray
    y_ineq: np.ndarray


def _ineq_target(cp, EW, y_ineq, beta):
    return np.clip(EW + y_ineq / beta, cp.lower, cp.upper)


def lagrangian(cp, W, y, y_ineq, beta):
    r = lifting.apply_A(cp, W) - cp.v
    val = float(np.sum(cp.C * W) + y @ r + 0.5 * beta * (r @ r))
    if cp.q:
        EW = lifting.apply_E(cp, W)
        s = EW - _ineq_target(cp, EW, y_ineq, beta)
        val += float(y_ineq @ s + 0.5 * beta * (s @ s))
    return val


def primal_gradient(cp, W, y, y_ineq, beta):
    """Gradient of :func:`lagrangian` in ``W`` (a symmetric matrix)."""
    g = lifting.apply_A(cp, W) - cp.v
    G = cp.C + lifting.adjoint_A(cp, y + beta * g)
    if cp.q:
        EW = lifting.apply_E(cp, W)
        g2 = EW - _ineq_target(cp, EW, y_ineq, beta)
        G = G + lifting.adjoint_E(cp, y_ineq + beta * g2)
    return G


def dual_stepsize_theoretical(y, g, D, beta0, beta, eta, p, norm_A):
    """Largest dual step keeping ``||y + gamma g|| <= D`` and the smoothness budget."""
    gg = float(g @ g)
    if gg == 0.0:
        return 0.0
    yy = float(y @ y)
    if yy >= D * D:
        log.debug("dual iterate on or outside the travel bound (|y|=%g, D=%g)",
                  math.sqrt(yy), D)
        return 0.0
    yg = float(y @ g)
    travel = (-yg + math.sqrt(yg * yg + (D * D - yy) * gg)) / gg
    return min(beta0, beta * eta * eta * p * p * norm_A * norm_A / gg, travel)


def prop1_bounds(t, beta0, p, norm_A, D):
    """Objective-suboptimality and infeasibility bounds after ``t`` iterations."""
    rt = math.sqrt(t)
    subopt = (6.0 * beta0 * p * p * norm_A ** 2 + D * D / (2.0 * beta0)) / rt
    infeas = (2.0 * math.sqrt(3.0) * p * norm_A + 4.0 * D / beta0) / rt
    return subopt, infeas


def _dual_step(cp, state, config, eta, norm_A):
    if config.variant == FWQP or config.dual_policy == DUAL_ZERO:
        return state.y, state.y_ineq
    beta_next = config.beta0 * math.sqrt(state.t + 2)
    g = lifting.apply_A(cp, state.W) - cp.v
    if cp.q:
        EW = lifting.apply_E(cp, state.W)
        g2 = EW - _ineq_target(cp, EW, state.y_ineq, beta_next)
    else:
        g2 = np.zeros(0)
    if config.dual_policy == DUAL_CONSTANT:
        gamma = config.beta0
    else:
        gamma = dual_stepsize_theoretical(
            np.concatenate((state.y, state.y_ineq)), np.concatenate((g, g2)),
            config.dual_bound, config.beta0, state.beta, eta, cp.p, norm_A)
    return state.y + gamma * g, state.y_ineq + gamma * g2


def step(cp, state, oracle, config=SolverConfig(), norm_A=None):
    """One FW iteration; mutates and returns ``state``. Returns the oracle result too."""
    t = state.t
    eta = 2.0 / (t + 1)
    beta = config.beta0 * math.sqrt(t + 1)
    state.beta = beta
    if config.variant == FWQP:
        y, y2 = np.zeros_like(state.y), np.zeros_like(state.y_ineq)
    else:
        y, y2 = state.y, state.y_ineq
    G = primal_gradient(cp, state.W, y, y2, beta)
    try:
        res = oracle(G)
    except OracleError as exc:
        raise SolverError(f"oracle failed at iteration {t}: {exc}") from exc
    w = np.asarray(res.w, dtype=float)
    state.W = (1.0 - eta) * state.W + eta * np.outer(w, w)
    if state.atoms is not None:
        state.atoms = [(a * (1.0 - eta), v) for a, v in state.atoms]
        state.atoms.append((eta, res.w.copy()))
    state.y, state.y_ineq = _dual_step(cp, state, config, eta, norm_A)
    return state, res


def early_stop_check(cp, problem, W, prev_objective, config):
    """Swap in the projected point when it is better, then test for termination.

    A rounding decided by a tie-break (e.g. a block-constant estimate) is an
    arbitrary point and is never swapped in. Returns ``(action, W, report)``; ``W`` is a new array only if a swap
    happened. A swap followed by a satisfied stopping test reports ``STOP``.
    """
    rep = round_solution(W, problem, config.rounding)
    action = CONTINUE
    obj = float(np.sum(cp.C * W))
    if not rep.ambiguous and is_feasible(problem, rep.x_binary) and rep.objective < obj:
        W = lifting.lift_point(rep.x_binary)
        obj = rep.objective
        action = SWITCH
    infeas = float(np.linalg.norm(lifting.apply_A(cp, W) - cp.v))
    if (infeas <= config.feasibility_tol and prev_objective is not None
            and abs(obj - prev_objective) <= config.objective_tol * max(1.0, abs(obj))):
        action = STOP
    return action, W, rep


def solve(problem, config=SolverConfig(), oracle=None, callback=None):
    """Lift, iterate, round. ``callback(state, row)`` is called after each iteration."""
    from .oracle import AutoOracle

    oracle = oracle or AutoOracle()
    t0 = time.perf_counter()
    cp = lifting.lift(problem)
    need_norm = config.diagnostics or config.dual_policy == DUAL_THEORETICAL
    norm_A = lifting.operator_norm_A(cp) if need_norm else float("nan")
    state = SolverState.initial(cp, config.beta0, config.track_atoms)
    prev_obj = None
    max_dual = 0.0
    incumbent = None
    stopped_early = False
    calls = 0

    for t in range(1, config.max_iters + 1):
        state.t = t
        state, res = step(cp, state, oracle, config, norm_A)
        calls += 1
        rounded = float("nan")
        if config.early_stop:
            action, W_new, rep = early_stop_check(cp, problem, state.W, prev_obj, config)
            if is_feasible(problem, rep.x_binary) and (
                    incumbent is None or rep.objective < incumbent.objective):
                incumbent = rep
            rounded = rep.objective
            if W_new is not state.W:
                state.W = W_new
                if state.atoms is not None:
                    state.atoms = [(1.0, rep.x_binary.copy())]
            stop = action == STOP
        else:
            stop = False
            if t % config.rounded_every == 0 or t == config.max_iters:
                rounded = round_solution(state.W, problem, config.rounding).objective

        if config.diagnostics:
            _assert_invariants(state, config)
        obj = float(np.sum(cp.C * state.W))
        infeas = float(np.linalg.norm(lifting.apply_A(cp, state.W) - cp.v))
        if cp.q:
            EW = lifting.apply_E(cp, state.W)
            ineq = float(np.linalg.norm(EW - np.clip(EW, cp.lower, cp.upper)))
        else:
            ineq = 0.0
        max_dual = max(max_dual, float(np.sqrt(state.y @ state.y + state.y_ineq @ state.y_ineq)))
        if config.diagnostics:
            D = config.dual_bound if config.dual_bound is not None else max_dual
            b_sub, b_inf = prop1_bounds(t + 1, config.beta0, cp.p, norm_A, D)
        else:
            b_sub = b_inf = float("nan")
        row = TraceRow(t, obj, infeas, ineq, float(res.value), rounded, b_sub, b_inf)
        state.trace.append(row)
        if callback is not None:
            callback(state, row)
        prev_obj = obj
        if stop:
            stopped_early = True
            break

    final = round_solution(state.W, problem, config.rounding)
    if incumbent is not None and (not is_feasible(problem, final.x_binary)
                                  or incumbent.objective < final.objective):
        final = incumbent
    diagnostics = {
        "iterations": len(state.trace),
        "oracle_calls": calls,
        "objective": float(np.sum(cp.C * state.W)),
        "infeasibility": float(np.linalg.norm(lifting.apply_A(cp, state.W) - cp.v)),
        "rounded_value": final.objective,
        "rounded_feasible": is_feasible(problem, final.x_binary),
        "stopped_early": stopped_early,
        "norm_A": norm_A,
        "max_dual_norm": max_dual,
        "wall_time": time.perf_counter() - t0,
    }
    return Solution(state.W, final.x_binary, evaluate(problem, final.x_binary), final,
                    state.trace, diagnostics, state.y, state.y_ineq)


def _assert_invariants(state, config):
    W = state.W
    if not np.array_equal(W, W.T):
        raise SolverError(f"iterate lost symmetry at iteration {state.t}")
    if W.min() < -1e-12 or W.max() > 1.0 + 1e-12:
        raise SolverError(f"iterate left [0, 1] at iteration {state.t}")
    if state.atoms is not None:
        S = sum(a * np.outer(v, v) for a, v in state.atoms)
        if np.linalg.norm(S - W) > 1e-9:
            raise SolverError(f"atom decomposition drifted at iteration {state.t}")


# ---------------------------------------------------------------- export


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def trace_to_csv(trace):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(TRACE_FIELDS)
    for row in trace:
        d = asdict(row)
        wr.writerow([_fmt(d[k]) for k in TRACE_FIELDS])
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temporary file and rename, so readers never see partial output."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
