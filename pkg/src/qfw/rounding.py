"""Recovering a binary point from an approximate lifted solution."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import ProblemError, evaluate, unvec, vec

log = logging.getLogger(__name__)

FIRST_COLUMN = "first_column"
RANK_ONE = "rank_one"


def extract_first_column(W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] < 2:
        raise ProblemError("need a lifted matrix with p >= 2")
    return W[1:, 0].copy()


def rank_one_top(X, tol=1e-9, max_iter=5000, seed=0):
    """Vector ``x`` with ``x x'`` the best rank-one approximation of symmetric ``X``.

    Power iteration from a fixed positive start vector; falls back to a dense
    eigendecomposition if the top of the spectrum is too clustered to converge
    within ``max_iter``. The sign is chosen so that ``sum(x) >= 0``.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not np.any(X):
        log.debug("rank_one_top: zero matrix, degenerate")
        return np.zeros(n)
    u = np.random.default_rng(seed).uniform(0.5, 1.5, n)
    u /= np.linalg.norm(u)
    lam = 0.0
    converged = False
    for _ in range(max_iter):
        z = X @ u
        lam = float(u @ z)
        if np.linalg.norm(z - lam * u) <= tol * max(1.0, abs(lam)):
            converged = True
            break
        nz = np.linalg.norm(z)
        if nz == 0.0:
            break
        u = z / nz
    if not converged:
        vals, vecs = np.linalg.eigh(0.5 * (X + X.T))
        k = int(np.argmax(np.abs(vals)))
        lam, u = float(vals[k]), vecs[:, k]
    x = np.sqrt(abs(lam)) * u
    return -x if x.sum() < 0 else x


def threshold_binary(x):
    """Nearest binary vector; exact halves round up."""
    return (np.asarray(x, dtype=float) >= 0.5).astype(np.int8)


def hungarian(cost):
    """Minimum-cost perfect assignment of rows to columns.

    Shortest augmenting paths with row/column potentials, rows inserted in
    order 0..N-1 and columns scanned left to right, so ties resolve
    deterministically. Returns ``perm`` with row ``i`` assigned to column
    ``perm[i]``.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"cost must be square, got {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost has non-finite entries")
    N = C.shape[0]
    u = np.zeros(N + 1)
    v = np.zeros(N + 1)
    match = np.zeros(N + 1, dtype=np.int64)  # match[j] = row (1-based) on column j
    way = np.zeros(N + 1, dtype=np.int64)
    for i in range(1, N + 1):
        match[0] = i
        j0 = 0
        minv = np.full(N + 1, np.inf)
        used = np.zeros(N + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, N + 1):
                if used[j]:
                    continue
                cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(N + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    perm = np.empty(N, dtype=np.int64)
    for j in range(1, N + 1):
        perm[match[j] - 1] = j - 1
    return perm


def assignment_is_unique(cost, perm, tol=1e-9):
    """True when no other assignment reaches the cost of ``perm`` within ``tol``.

    Any other optimal assignment avoids at least one edge of ``perm``, so it
    suffices to re-solve with each of those edges forbidden in turn.
    """
    C = np.asarray(cost, dtype=float)
    N = C.shape[0]
    if N < 2:
        return True
    rows = np.arange(N)
    best = C[rows, perm].sum()
    big = np.abs(C).sum() + 1.0
    scale = tol * max(1.0, np.abs(C).max())
    for i in range(N):
        D = C.copy()
        D[i, perm[i]] = big
        alt = hungarian(D)
        if D[rows, alt].sum() <= best + scale:
            return False
    return True


def perm_matrix(perm):
    N = len(perm)
    P = np.zeros((N, N))
    P[np.arange(N), perm] = 1.0
    return P


def project_permutations(x, K, N, return_unique=False):
    """Per block, the permutation matrix most correlated with ``unvec(block)``.

    With ``return_unique`` also reports whether every block had a single
    best assignment (ties are otherwise broken by :func:`hungarian`).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (K * N * N,):
        raise ProblemError(f"expected length {K * N * N}, got {x.shape}")
    out = np.empty(K * N * N, dtype=np.int8)
    unique = True
    for k in range(K):
        sl = slice(k * N * N, (k + 1) * N * N)
        cost = -unvec(x[sl], N)
        perm = hungarian(cost)
        out[sl] = vec(perm_matrix(perm))
        if return_unique and unique:
            unique = assignment_is_unique(cost, perm)
    return (out, unique) if return_unique else out


@dataclass(frozen=True)
class RoundingReport:
    method: str
    x_continuous: np.ndarray
    x_binary: np.ndarray
    objective: float
    projected: bool
    ambiguous: bool = False  # the binary point came out of a tie-break


def round_solution(W, problem, option=RANK_ONE, project=True):
    """Binary estimate from a lifted iterate.

    ``option`` picks the read-out (first column or top singular vector of the
    trailing block); the result is then projected onto stacked permutations
    when ``problem.perm_blocks`` is declared and ``project`` is set, otherwise
    thresholded at 1/2.
    """
    W = np.asarray(W, dtype=float)
    if option == FIRST_COLUMN:
        xc = extract_first_column(W)
    elif option == RANK_ONE:
        xc = rank_one_top(W[1:, 1:])
    else:
        raise ValueError(f"unknown rounding option {option!r}")
    if project and problem.perm_blocks is not None:
        xb, unique = project_permutations(xc, *problem.perm_blocks, return_unique=True)
        projected, ambiguous = True, not unique
    else:
        xb = threshold_binary(xc)
        projected = False
        ambiguous = bool(np.any(np.abs(xc - 0.5) <= 1e-9))
    return RoundingReport(option, xc, xb, evaluate(problem, xb), projected, ambiguous)
