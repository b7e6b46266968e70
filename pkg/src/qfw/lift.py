"""Copositive lifting of a QBO.

The lifted variable is the symmetric ``p x p`` matrix ``W = [[W11, x'], [x, X]]``
with ``p = n + 1``. Equality rows of the map ``A`` are, in order::

    W11                              -> 1
    X_kk - x_k          (k = 1..n)   -> 0
    a_i' x              (i = 1..m)   -> b_i
    a_i' X a_i          (i = 1..m)   -> b_i^2

and the ``2q`` inequality rows of ``E`` are ``e_j' x`` followed by
``e_j' X e_j + 2 alpha_j e_j' x``, boxed by ``l <= E(W) <= u``.
Both maps are stored as their coefficient vectors, never as dense matrices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import InfeasibleError, ProblemError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InequalityRows:
    alpha: float
    beta_bound: float
    linear_box: tuple
    quadratic_box: tuple


def build_inequality(e, f):
    """Box bounds for the lifted form of ``e'x <= f``.

    Returns ``None`` when the constraint can never be violated on binaries.
    """
    e = np.asarray(e, dtype=float)
    f = float(f)
    alpha = -float(np.minimum(e, 0.0).sum())
    beta_bound = float(np.maximum(e, 0.0).sum())
    if f < -alpha:
        raise InfeasibleError(f"inequality infeasible: f={f} < -alpha={-alpha}")
    if f >= beta_bound:
        log.warning("dropping redundant inequality (f=%g >= %g)", f, beta_bound)
        return None
    return InequalityRows(alpha, beta_bound, (-alpha, f),
                          (-alpha * alpha, f * f + 2.0 * alpha * f))


@dataclass(frozen=True, eq=False)
class CopositiveProgram:
    n: int
    C: np.ndarray
    eq_rows: np.ndarray     # (m, n)
    eq_rhs: np.ndarray      # (m,)
    ineq_rows: np.ndarray   # (q, n), redundant inequalities removed
    ineq_alpha: np.ndarray  # (q,)
    lower: np.ndarray       # (2q,)
    upper: np.ndarray       # (2q,)

    @property
    def p(self):
        return self.n + 1

    @property
    def m(self):
        return self.eq_rows.shape[0]

    @property
    def q(self):
        return self.ineq_rows.shape[0]

    @property
    def d(self):
        return 2 * self.m + self.n + 1

    @property
    def v(self):
        return np.concatenate(([1.0], np.zeros(self.n), self.eq_rhs, self.eq_rhs ** 2))


def lift(problem):
    n = problem.n
    C = np.zeros((n + 1, n + 1))
    C[0, 1:] = problem.s
    C[1:, 0] = problem.s
    C[1:, 1:] = problem.Q
    A, b = problem.eq_matrix()

    rows, alphas, lo_lin, hi_lin, lo_q, hi_q = [], [], [], [], [], []
    for e, f in problem.ineq_constraints:
        box = build_inequality(e, f)
        if box is None:
            continue
        rows.append(e)
        alphas.append(box.alpha)
        lo_lin.append(box.linear_box[0])
        hi_lin.append(box.linear_box[1])
        lo_q.append(box.quadratic_box[0])
        hi_q.append(box.quadratic_box[1])
    E = np.array(rows, dtype=float).reshape(len(rows), n)
    for arr in (C, A, b, E):
        arr.setflags(write=False)
    return CopositiveProgram(
        n=n, C=C, eq_rows=A, eq_rhs=b, ineq_rows=E,
        ineq_alpha=np.array(alphas, dtype=float),
        lower=np.array(lo_lin + lo_q, dtype=float),
        upper=np.array(hi_lin + hi_q, dtype=float),
    )


def _check_W(cp, W):
    W = np.asarray(W, dtype=float)
    if W.shape != (cp.p, cp.p):
        raise ProblemError(f"expected a {cp.p}x{cp.p} matrix, got {W.shape}")
    return W


def _split(W):
    return W[1:, 0], W[1:, 1:]


def _quad_forms(R, X):
    # r_i' X r_i for every row r_i of R
    return np.einsum("ij,jk,ik->i", R, X, R)


def apply_A(cp, W):
    W = _check_W(cp, W)
    x, X = _split(W)
    A = cp.eq_rows
    return np.concatenate(([W[0, 0]], np.diag(X) - x, A @ x, _quad_forms(A, X)))


def _assemble(p, corner, xcoef, Xcoef):
    # symmetric matrix whose Frobenius product with W gives
    # corner*W11 + xcoef'x + <Xcoef, X>
    M = np.empty((p, p))
    M[0, 0] = corner
    M[1:, 0] = 0.5 * xcoef
    M[0, 1:] = 0.5 * xcoef
    M[1:, 1:] = Xcoef
    return M


def adjoint_A(cp, y):
    y = np.asarray(y, dtype=float)
    if y.shape != (cp.d,):
        raise ProblemError(f"expected a length-{cp.d} vector, got {y.shape}")
    n, m = cp.n, cp.m
    y_diag = y[1:n + 1]
    y_lin = y[n + 1:n + 1 + m]
    y_quad = y[n + 1 + m:]
    A = cp.eq_rows
    Xcoef = (A.T * y_quad) @ A
    Xcoef[np.diag_indices(n)] += y_diag
    return _assemble(cp.p, y[0], A.T @ y_lin - y_diag, Xcoef)


def apply_E(cp, W):
    W = _check_W(cp, W)
    x, X = _split(W)
    E = cp.ineq_rows
    lin = E @ x
    return np.concatenate((lin, _quad_forms(E, X) + 2.0 * cp.ineq_alpha * lin))


def adjoint_E(cp, y):
    y = np.asarray(y, dtype=float)
    q = cp.q
    if y.shape != (2 * q,):
        raise ProblemError(f"expected a length-{2 * q} vector, got {y.shape}")
    E = cp.ineq_rows
    y_lin, y_quad = y[:q], y[q:]
    Xcoef = (E.T * y_quad) @ E
    return _assemble(cp.p, 0.0, E.T @ (y_lin + 2.0 * cp.ineq_alpha * y_quad), Xcoef)


def lift_point(x):
    x = np.asarray(x, dtype=float)
    z = np.concatenate(([1.0], x))
    return np.outer(z, z)


def operator_norm_A(cp, tol=1e-10, max_iter=20000, seed=0):
    """Largest singular value of ``A`` on symmetric matrices (power iteration)."""
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((cp.p, cp.p))
    M = M + M.T
    nrm = np.linalg.norm(M)
    M /= nrm
    sigma2 = 0.0
    for _ in range(max_iter):
        N = adjoint_A(cp, apply_A(cp, M))
        nrm = np.linalg.norm(N)
        if nrm == 0.0:
            return 0.0
        new = float(np.sum(M * N))
        M = N / nrm
        if abs(new - sigma2) <= tol * abs(new):
            sigma2 = new
            break
        sigma2 = new
    return float(np.sqrt(max(sigma2, 0.0)))
