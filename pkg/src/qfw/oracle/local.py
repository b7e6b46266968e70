"""In-process QUBO oracles: exhaustive enumeration and simulated annealing."""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass

import numpy as np

from .. import kernels

EXHAUSTIVE_CAP = 24


class OracleError(RuntimeError):
    """A QUBO backend failed to produce a solution."""


@dataclass(frozen=True)
class OracleResult:
    w: np.ndarray
    value: float
    backend: str
    elapsed: float = 0.0
    samples_taken: int = 0


def check_qubo(G, tol=1e-9):
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"QUBO matrix must be square, got {G.shape}")
    if not np.all(np.isfinite(G)):
        raise ValueError("QUBO matrix has non-finite entries")
    scale = max(1.0, float(np.abs(G).max(initial=0.0)))
    if not np.allclose(G, G.T, rtol=0.0, atol=tol * scale):
        raise ValueError("QUBO matrix is not symmetric")
    return np.ascontiguousarray(G)


def qubo_value(G, w):
    w = np.asarray(w, dtype=float)
    return float(w @ G @ w)


def solve_exhaustive(G, cap=EXHAUSTIVE_CAP, backend=None):
    """Exact minimizer of w'Gw over {0,1}^p, smallest vector among ties."""
    G = check_qubo(G)
    p = G.shape[0]
    if p > cap:
        raise OracleError(f"exhaustive oracle refused: p={p} exceeds cap {cap}")
    t0 = time.perf_counter()
    tol = kernels.tie_tolerance(G)
    if kernels.pick(backend) == "numba":
        code = kernels.qubo_min_jit(G, tol)
    else:
        code = kernels.qubo_min_np(G, tol)
    w = kernels.code_to_bits(code, p)
    return OracleResult(w, qubo_value(G, w), "exhaustive",
                        time.perf_counter() - t0, 1 << p)


@dataclass(frozen=True)
class SaParams:
    restarts: int = 50
    sweeps: int | None = None      # default: 200 * p
    t_hot: float = 10.0            # multiples of max|G|
    t_cold: float = 1e-3

    def n_sweeps(self, p):
        return self.sweeps if self.sweeps is not None else 200 * p


def sa_temperatures(G, params):
    gmax = float(np.abs(G).max(initial=0.0))
    S = params.n_sweeps(G.shape[0])
    if S == 1:
        return np.array([params.t_cold * gmax])
    return np.geomspace(params.t_hot * gmax, params.t_cold * gmax, S)


def solve_sa(G, params=SaParams(), seed=0, backend=None):
    """Best vector over independent annealing chains; deterministic in ``seed``."""
    G = check_qubo(G)
    p = G.shape[0]
    t0 = time.perf_counter()
    if p == 0 or not np.any(G):
        return OracleResult(np.zeros(p, dtype=np.int8), 0.0, "sa",
                            time.perf_counter() - t0, 0)
    temps = sa_temperatures(G, params)
    keys = kernels.chain_keys(seed, params.restarts)
    if kernels.pick(backend) == "numba":
        ws, fs = kernels.sa_jit(G, temps, keys)
    else:
        ws, fs = kernels.sa_np(G, temps, keys)
    # rescore exactly; reduce by (value, lexicographic order)
    best_w = np.zeros(p, dtype=np.int8)
    best_v = 0.0
    best_code = 0
    tol = kernels.tie_tolerance(G)
    for w in ws:
        v = qubo_value(G, w)
        code = kernels.bits_to_code(w)
        if v < best_v - tol or (v <= best_v + tol and code < best_code):
            best_w, best_v, best_code = w.copy(), min(v, best_v), code
    return OracleResult(best_w, qubo_value(G, best_w), "sa",
                        time.perf_counter() - t0, params.restarts * len(temps) * p)


def _matrix_seed(G, seed):
    h = hashlib.blake2b(G.tobytes(), digest_size=8, key=str(seed).encode())
    return int.from_bytes(h.digest(), "little")


class ExhaustiveOracle:
    name = "exhaustive"

    def __init__(self, cap=EXHAUSTIVE_CAP, backend=None):
        self.cap = cap
        self.backend = backend

    def __call__(self, G):
        return solve_exhaustive(G, self.cap, self.backend)

    def config(self):
        return {"kind": "exhaustive", "cap": self.cap}


class SimulatedAnnealingOracle:
    """SA oracle whose per-call seed is derived from ``seed`` and the matrix
    bytes, so repeated solves are reproducible without hidden state."""

    name = "sa"

    def __init__(self, params=SaParams(), seed=0, backend=None):
        self.params = params
        self.seed = seed
        self.backend = backend

    def __call__(self, G):
        G = check_qubo(G)
        return solve_sa(G, self.params, _matrix_seed(G, self.seed), self.backend)

    def config(self):
        return {"kind": "sa", "restarts": self.params.restarts,
                "sweeps": self.params.sweeps, "t_hot": self.params.t_hot,
                "t_cold": self.params.t_cold, "seed": self.seed}


class AutoOracle:
    """Exhaustive up to ``cap`` variables, simulated annealing above."""

    name = "auto"

    def __init__(self, cap=EXHAUSTIVE_CAP, sa=None):
        self.exact = ExhaustiveOracle(cap)
        self.sa = sa or SimulatedAnnealingOracle()

    def __call__(self, G):
        if np.shape(G)[0] <= self.exact.cap:
            return self.exact(G)
        return self.sa(G)

    def config(self):
        return {"kind": "auto", "cap": self.exact.cap, "sa": self.sa.config()}
