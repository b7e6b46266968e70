"""Linearly constrained quadratic binary programs.

A :class:`QboProblem` is ``min x'Qx + 2 s'x`` over ``x in {0,1}^n`` subject to
``a_i'x = b_i`` and ``e_j'x <= f_j``. Matrices are vectorized column-major
everywhere in this package (see :func:`vec` / :func:`unvec`).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_TOL = 1e-9
BRUTE_FORCE_CAP = 24


class ProblemError(ValueError):
    """Malformed or inconsistent problem data."""


class InfeasibleError(ProblemError):
    """No binary point satisfies the constraints."""


def vec(M):
    """Stack the columns of ``M``."""
    return np.asarray(M).reshape(-1, order="F")


def unvec(x, N):
    return np.asarray(x).reshape((N, N), order="F")


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ProblemError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M + M.T)


def fold_linear(Q, s):
    """Absorb the linear term: x'Qx + 2s'x == x'(Q + 2 Diag(s))x on binaries."""
    Q = np.asarray(Q, dtype=float)
    s = np.asarray(s, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or s.shape != (Q.shape[0],):
        raise ProblemError(f"dimension mismatch: Q {Q.shape}, s {s.shape}")
    return Q + 2.0 * np.diag(s)


def _as_binary(x, n):
    x = np.asarray(x)
    if x.shape != (n,):
        raise ProblemError(f"expected a length-{n} vector, got shape {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise ProblemError("vector has non-binary entries")
    return x.astype(float)


@dataclass(frozen=True, eq=False)
class QboProblem:
    """Constrained QBO data; ``Q`` is symmetrized on construction.

    ``perm_blocks = (K, N)`` declares that ``x`` stacks ``K`` vectorized
    ``N x N`` permutation matrices, which enables Hungarian rounding.
    """

    Q: np.ndarray
    s: np.ndarray | None = None
    eq_constraints: list = field(default_factory=list)
    ineq_constraints: list = field(default_factory=list)
    perm_blocks: tuple | None = None
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ProblemError(f"Q must be square, got shape {Q.shape}")
        n = Q.shape[0]
        if not np.all(np.isfinite(Q)):
            raise ProblemError("Q has non-finite entries")
        s = np.zeros(n) if self.s is None else np.array(self.s, dtype=float)
        if s.shape != (n,):
            raise ProblemError(f"s must have length {n}")

        eqs = []
        for a, b in self.eq_constraints:
            a = np.array(a, dtype=float)
            if a.shape != (n,):
                raise ProblemError(f"equality vector must have length {n}")
            b = float(b)
            if b < 0:
                raise ProblemError(f"equality right-hand side must be >= 0, got {b}")
            eqs.append((a, b))
        ineqs = []
        for e, f in self.ineq_constraints:
            e = np.array(e, dtype=float)
            if e.shape != (n,):
                raise ProblemError(f"inequality vector must have length {n}")
            ineqs.append((e, float(f)))
        if self.perm_blocks is not None:
            K, N = (int(v) for v in self.perm_blocks)
            if K * N * N != n:
                raise ProblemError(f"perm_blocks {self.perm_blocks} do not tile n={n}")
            object.__setattr__(self, "perm_blocks", (K, N))

        object.__setattr__(self, "Q", symmetrize(Q))
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "eq_constraints", eqs)
        object.__setattr__(self, "ineq_constraints", ineqs)
        for arr in (self.Q, self.s, *(a for a, _ in eqs), *(e for e, _ in ineqs)):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def m(self):
        return len(self.eq_constraints)

    @property
    def q(self):
        return len(self.ineq_constraints)

    def eq_matrix(self):
        """Stacked equality rows as an ``(m, n)`` array and ``b``."""
        if not self.eq_constraints:
            return np.zeros((0, self.n)), np.zeros(0)
        A = np.array([a for a, _ in self.eq_constraints])
        return A, np.array([b for _, b in self.eq_constraints])

    def ineq_matrix(self):
        if not self.ineq_constraints:
            return np.zeros((0, self.n)), np.zeros(0)
        E = np.array([e for e, _ in self.ineq_constraints])
        return E, np.array([f for _, f in self.ineq_constraints])

    def with_structure(self, perm_blocks):
        return QboProblem(self.Q, self.s, self.eq_constraints,
                          self.ineq_constraints, perm_blocks, self.tol)


def evaluate(problem, x):
    x = _as_binary(x, problem.n)
    return float(x @ problem.Q @ x + 2.0 * problem.s @ x)


def residuals(problem, x):
    """Equality residuals ``Ax - b`` and inequality violations ``max(0, Ex - f)``."""
    x = _as_binary(x, problem.n)
    A, b = problem.eq_matrix()
    E, f = problem.ineq_matrix()
    return A @ x - b, np.maximum(0.0, E @ x - f)


def is_feasible(problem, x, tol=None):
    tol = problem.tol if tol is None else tol
    r, v = residuals(problem, x)
    return bool(np.all(np.abs(r) <= tol) and np.all(v <= tol))


def permutation_constraints(N):
    """The 2N unit-sum constraints making ``vec(P)`` a permutation matrix.

    For N=2 the rows are [[1,1,0,0], [0,0,1,1], [1,0,1,0], [0,1,0,1]].
    """
    if N < 1:
        raise ProblemError("permutation side must be >= 1")
    rows = []
    # contiguous blocks first, then strided ones; with column-major vec the
    # contiguous block j sums column j of P and the strided one sums row j
    for j in range(N):
        a = np.zeros(N * N)
        a[j * N:(j + 1) * N] = 1.0
        rows.append(a)
    for j in range(N):
        a = np.zeros(N * N)
        a[j::N] = 1.0
        rows.append(a)
    return rows, [1.0] * (2 * N)


def block_permutation_constraints(K, N):
    if K < 1 or N < 1:
        raise ProblemError("need K >= 1 and N >= 1")
    base, bs = permutation_constraints(N)
    rows, rhs = [], []
    for j in range(K):
        for a, b in zip(base, bs):
            full = np.zeros(K * N * N)
            full[j * N * N:(j + 1) * N * N] = a
            rows.append(full)
            rhs.append(b)
    return rows, rhs


def permutation_problem(Q, K, N, s=None):
    """A QBO over K stacked N x N permutation matrices."""
    rows, rhs = block_permutation_constraints(K, N)
    return QboProblem(Q, s, list(zip(rows, rhs)), perm_blocks=(K, N))


def brute_force_solve(problem, cap=BRUTE_FORCE_CAP, backend=None):
    """Exact constrained minimum by enumeration of all 2**n binary vectors.

    Ties resolve to the lexicographically smallest vector.
    """
    n = problem.n
    if n > cap:
        raise ProblemError(
            f"brute force refused: n={n} exceeds the enumeration cap of {cap}")
    Qf = np.ascontiguousarray(fold_linear(problem.Q, problem.s))
    A, b = problem.eq_matrix()
    E, f = problem.ineq_matrix()
    args = (Qf, np.ascontiguousarray(A), b, np.ascontiguousarray(E), f, problem.tol)
    if kernels.pick(backend) == "numba":
        code = kernels.constrained_min_jit(*args)
    else:
        code = kernels.constrained_min_np(*args)
    if code < 0:
        raise InfeasibleError("no binary point satisfies the constraints")
    x = kernels.code_to_bits(code, n)
    return x, evaluate(problem, x)


# ------------------------------------------------------------- JSON I/O

_FIELDS = {"n", "Q", "s", "eq", "ineq"}
_META_KEY = "meta"


def problem_to_dict(problem, meta=None):
    doc = {
        "n": problem.n,
        "Q": problem.Q.tolist(),
        "s": problem.s.tolist(),
        "eq": [{"a": a.tolist(), "b": b} for a, b in problem.eq_constraints],
        "ineq": [{"e": e.tolist(), "f": f} for e, f in problem.ineq_constraints],
    }
    if meta is not None:
        doc[_META_KEY] = meta
    return doc


def problem_from_dict(doc, strict=True):
    """Parse a problem document; returns ``(problem, meta_or_None)``."""
    if not isinstance(doc, dict):
        raise ProblemError("problem document must be a JSON object")
    if strict:
        unknown = set(doc) - _FIELDS - {_META_KEY}
        if unknown:
            raise ProblemError(f"unknown fields: {sorted(unknown)}")
    missing = {"n", "Q"} - set(doc)
    if missing:
        raise ProblemError(f"missing fields: {sorted(missing)}")
    n = int(doc["n"])
    Q = np.asarray(doc["Q"], dtype=float)
    if Q.shape != (n, n):
        raise ProblemError(f"Q must be {n}x{n}, got {Q.shape}")
    eqs, ineqs = [], []
    for item in doc.get("eq", []):
        if strict and set(item) != {"a", "b"}:
            raise ProblemError(f"equality entries need exactly a, b; got {sorted(item)}")
        eqs.append((item["a"], item["b"]))
    for item in doc.get("ineq", []):
        if strict and set(item) != {"e", "f"}:
            raise ProblemError(f"inequality entries need exactly e, f; got {sorted(item)}")
        ineqs.append((item["e"], item["f"]))
    meta = doc.get(_META_KEY)
    perm_blocks = None
    if isinstance(meta, dict) and meta.get("family") in ("graph_matching", "perm_sync"):
        perm_blocks = (int(meta.get("K", 1)), int(meta["N"]))
    problem = QboProblem(Q, doc.get("s"), eqs, ineqs, perm_blocks=perm_blocks)
    return problem, meta


def save_problem(problem, path, meta=None):
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem, meta), fh)


def load_problem(path, strict=True):
    with open(path) as fh:
        doc = json.load(fh)
    return problem_from_dict(doc, strict=strict)
