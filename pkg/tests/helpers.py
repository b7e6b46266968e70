"""Shared generators for the test modules."""
import itertools

import numpy as np

from qfw.model import QboProblem


def all_binary(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int8)


def random_sym(rng, n, scale=1.0):
    M = rng.normal(scale=scale, size=(n, n))
    return 0.5 * (M + M.T)


def random_problem(rng, n, m=1, q=0, linear=True):
    """Random QBO whose equality constraints are satisfied by a planted point."""
    x0 = rng.integers(0, 2, n)
    eqs = []
    for _ in range(m):
        a = rng.integers(0, 3, n).astype(float)
        eqs.append((a, float(a @ x0)))
    ineqs = []
    for _ in range(q):
        e = rng.integers(-2, 3, n).astype(float)
        ineqs.append((e, float(e @ x0) + float(rng.integers(0, 2))))
    s = rng.normal(size=n) if linear else None
    return QboProblem(random_sym(rng, n), s, eqs, ineqs)
