"""Benchmark families: quadratic graph matching and permutation synchronization."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import ProblemError, QboProblem, permutation_problem, unvec, vec
from .rounding import perm_matrix

GM = "graph_matching"
SYNC = "perm_sync"


def is_permutation_matrix(P, tol=0.0):
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        return False
    binary = np.all((np.abs(P) <= tol) | (np.abs(P - 1) <= tol))
    return bool(binary and np.allclose(P.sum(0), 1) and np.allclose(P.sum(1), 1))


def all_permutation_matrices(N):
    return [perm_matrix(np.array(p)) for p in itertools.permutations(range(N))]


def stack_perms(perms):
    return np.concatenate([vec(P) for P in perms]).astype(np.int8)


def split_perms(x, K, N):
    x = np.asarray(x)
    if x.shape != (K * N * N,):
        raise ProblemError(f"expected length {K * N * N}, got {x.shape}")
    return [unvec(x[k * N * N:(k + 1) * N * N], N) for k in range(K)]


# ----------------------------------------------------------- graph matching


@dataclass(frozen=True, eq=False)
class GraphMatchingInstance:
    N: int
    problem: QboProblem
    gt_value: float
    gt_perm: np.ndarray
    seed: int

    @property
    def Q(self):
        return self.problem.Q

    @property
    def gt_x(self):
        return vec(perm_matrix(self.gt_perm)).astype(np.int8)

    def meta(self):
        return {"family": GM, "N": self.N, "K": 1, "sigma": None, "seed": self.seed,
                "gt": {"value": self.gt_value, "x": self.gt_x.tolist()}}


def gen_graph_matching(N, seed):
    """Random QAP instance: symmetrized i.i.d. uniform[0, 1] gains, negated."""
    if N < 2:
        raise ProblemError("graph matching needs N >= 2")
    rng = np.random.default_rng(seed)
    M = rng.uniform(0.0, 1.0, (N * N, N * N))
    Q = -0.5 * (M + M.T)
    problem = permutation_problem(Q, 1, N)
    best_v, best_p = math.inf, None
    for perm in itertools.permutations(range(N)):
        x = vec(perm_matrix(np.array(perm)))
        val = float(x @ problem.Q @ x)
        if val < best_v:
            best_v, best_p = val, np.array(perm)
    return GraphMatchingInstance(N, problem, best_v, best_p, seed)


# ---------------------------------------------------- permutation sync


@dataclass(frozen=True, eq=False)
class SyncInstance:
    K: int
    N: int
    edges: list
    relative: dict          # (i, j) -> P_ij
    problem: QboProblem
    offset: float
    gt_perms: list
    sigma: float
    seed: int

    @property
    def gt_x(self):
        return stack_perms(self.gt_perms)

    @property
    def gt_value(self):
        x = self.gt_x.astype(float)
        return float(x @ self.problem.Q @ x)

    def loss(self, perms):
        return sync_loss(self.relative, perms)

    def meta(self):
        return {"family": SYNC, "N": self.N, "K": self.K, "sigma": self.sigma,
                "seed": self.seed, "offset": self.offset,
                "gt": {"value": self.gt_value, "x": self.gt_x.tolist()}}


def sync_loss(relative, perms):
    """Cycle-consistency loss: sum over edges of ||P_ij - X_i X_j'||_F^2."""
    return float(sum(np.sum((P - perms[i] @ perms[j].T) ** 2)
                     for (i, j), P in relative.items()))


def build_qps_matrix(K, N, edges, relative):
    """``(Q, offset)`` with ``x'Qx + offset`` equal to the synchronization loss
    for every stacked permutation vector ``x``.

    On permutations ``||X_i X_j'||^2 = ||P_ij||^2 = N``, so only the cross term
    ``-2 <P_ij, X_i X_j'> = -2 x_i' (I kron P_ij) x_j`` depends on ``x``.
    """
    n = K * N * N
    Q = np.zeros((n, n))
    offset = 0.0
    eye = np.eye(N)
    for e, (i, j) in enumerate(edges):
        P = np.asarray(relative[(i, j)] if isinstance(relative, dict) else relative[e],
                       dtype=float)
        if not is_permutation_matrix(P):
            raise ProblemError(f"relative map on edge {(i, j)} is not a permutation")
        B = -np.kron(eye, P)
        si = slice(i * N * N, (i + 1) * N * N)
        sj = slice(j * N * N, (j + 1) * N * N)
        Q[si, sj] += B
        Q[sj, si] += B.T
        offset += 2.0 * N
    return Q, offset


def fix_gauge(perms):
    """Right-multiply every absolute map by ``X_1'`` so the first is the identity."""
    ref = np.asarray(perms[0]).T
    return [np.asarray(P) @ ref for P in perms]


def random_permutation(rng, N):
    return perm_matrix(rng.permutation(N))


def gen_perm_sync(K, N, sigma, seed):
    """Fully connected synchronization instance.

    Ground truth has ``X_1 = I``; each observed ``P_ij = X_i X_j'`` is replaced
    by a uniformly random permutation with probability ``sigma``.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ProblemError("sigma must lie in [0, 1]")
    if K < 2 or N < 1:
        raise ProblemError("need K >= 2 views and N >= 1 points")
    rng = np.random.default_rng(seed)
    gt = [np.eye(N)] + [random_permutation(rng, N) for _ in range(K - 1)]
    edges = [(i, j) for i in range(K) for j in range(i + 1, K)]
    relative = {}
    for i, j in edges:
        P = gt[i] @ gt[j].T
        if rng.uniform() < sigma:
            P = random_permutation(rng, N)
        relative[(i, j)] = P
    Q, offset = build_qps_matrix(K, N, edges, relative)
    problem = permutation_problem(Q, K, N)
    return SyncInstance(K, N, edges, relative, problem, offset, gt, sigma, seed)


def sync_optimum(inst):
    """Exact minimum of the loss by enumerating gauge-fixed permutation tuples."""
    perms = all_permutation_matrices(inst.N)
    best_v, best = math.inf, None
    for rest in itertools.product(perms, repeat=inst.K - 1):
        cand = [np.eye(inst.N), *rest]
        v = inst.loss(cand)
        if v < best_v:
            best_v, best = v, cand
    return best_v, best


# ------------------------------------------------------------------ metrics


def normalized_energy(values, gt_value):
    """Mean of ``value - gt`` over instances (``gt_value`` scalar or per instance)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan")
    gt = np.broadcast_to(np.asarray(gt_value, dtype=float), values.shape)
    if not np.all(np.isfinite(gt)):
        raise ValueError("ground-truth values must be finite")
    return float(np.mean(values - gt))


def bit_accuracy(x, x_gt, K=None, N=None):
    """Fraction of matching bits; with ``K, N`` both sides are gauge-fixed first."""
    x = np.asarray(x)
    x_gt = np.asarray(x_gt)
    if x.shape != x_gt.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {x_gt.shape}")
    if K is not None:
        x = stack_perms(fix_gauge(split_perms(x, K, N)))
        x_gt = stack_perms(fix_gauge(split_perms(x_gt, K, N)))
    return float(np.mean(x == x_gt))


def cycle_consistency_error(trace_objectives, gt_value):
    """|<C, W_t> - <C, lift(x_gt)>| per iteration."""
    return np.abs(np.asarray(trace_objectives, dtype=float) - gt_value)
