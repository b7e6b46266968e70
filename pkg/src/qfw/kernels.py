"""Enumeration and annealing kernels over binary vectors.

Every kernel comes in two flavours with identical semantics: a loop version
compiled by numba (``*_jit``) and a vectorized numpy version (``*_np``).
:func:`pick` chooses between them.

Bit convention: an integer code ``k`` encodes the binary vector ``w`` with
``w[i] = (k >> (p - 1 - i)) & 1``, so integer order on codes coincides with
lexicographic order on vectors. Ties are always resolved towards the
smallest code.
"""
import numpy as np

from ._jit import njit, use_numba

# codes are held in int64
MAX_ENUM_BITS = 40

# splitmix64 constants
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

_RESYNC = 1024


def pick(backend=None):
    """Resolve a backend name (``None``, ``"numba"`` or ``"numpy"``)."""
    if backend is None:
        return "numba" if use_numba() else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown kernel backend {backend!r}")
    return backend


def code_to_bits(code, p):
    shifts = np.arange(p - 1, -1, -1, dtype=np.int64)
    return ((np.int64(code) >> shifts) & 1).astype(np.int8)


def bits_to_code(w):
    code = 0
    for b in np.asarray(w, dtype=np.int64):
        code = (code << 1) | int(b)
    return code


def tie_tolerance(G):
    """Absolute slack under which two QUBO values count as equal."""
    return 1e-12 * max(float(np.abs(G).sum()), 1e-300)


# ---------------------------------------------------------------- RNG


@njit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def _mix64_np(z):
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


def chain_keys(seed, n_chains):
    """Independent 64-bit stream keys, one per annealing chain."""
    base = np.full(n_chains, np.uint64(seed & 0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    idx = np.arange(1, n_chains + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_np(_mix64_np(base) ^ (idx * _GOLDEN))


# ------------------------------------------------- unconstrained QUBO


@njit
def qubo_min_jit(G, tol):
    """Gray-code scan of all 2**p vectors; O(p) work per step."""
    p = G.shape[0]
    w = np.zeros(p, dtype=np.int8)
    h = np.zeros(p)
    f = 0.0
    best_f = 0.0
    best_code = 0
    code = 0
    total = 1 << p
    for k in range(1, total):
        b = 0
        kk = k
        while (kk & 1) == 0:
            kk >>= 1
            b += 1
        i = p - 1 - b
        if w[i] == 0:
            delta = 1.0
            w[i] = 1
        else:
            delta = -1.0
            w[i] = 0
        f += 2.0 * delta * h[i] + G[i, i]
        for j in range(p):
            h[j] += delta * G[j, i]
        code ^= 1 << b
        if (k & (_RESYNC - 1)) == 0:
            f = 0.0
            for j in range(p):
                s = 0.0
                for l in range(p):
                    if w[l]:
                        s += G[j, l]
                h[j] = s
                if w[j]:
                    f += s
        if f < best_f - tol:
            best_f = f
            best_code = code
        elif f <= best_f + tol and code < best_code:
            if f < best_f:
                best_f = f
            best_code = code
    return best_code


def qubo_min_np(G, tol, chunk_bits=15):
    p = G.shape[0]
    total = 1 << p
    chunk = 1 << min(chunk_bits, p)
    shifts = np.arange(p - 1, -1, -1, dtype=np.int64)
    best_f = np.inf
    best_code = 0
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        B = ((codes[:, None] >> shifts) & 1).astype(np.float64)
        vals = np.einsum("ij,ij->i", B @ G, B)
        m = vals.min()
        if m < best_f - tol:
            first = int(np.flatnonzero(vals <= m + tol)[0])
            best_f = m
            best_code = int(codes[first])
        elif m < best_f:
            best_f = m
    return best_code


# ---------------------------------------------------- simulated annealing


@njit
def sa_jit(G, temps, keys):
    """Single-bit-flip Metropolis over independent chains.

    Returns (best_w per chain, best value per chain).
    """
    p = G.shape[0]
    R = keys.shape[0]
    S = temps.shape[0]
    best_w = np.zeros((R, p), dtype=np.int8)
    best_f = np.zeros(R)
    w = np.zeros(p, dtype=np.int8)
    h = np.zeros(p)
    for r in range(R):
        state = keys[r]
        for j in range(p):
            state += _GOLDEN
            u = np.float64(_mix64(state) >> _S11) * _INV53
            w[j] = 1 if u < 0.5 else 0
        f = 0.0
        for j in range(p):
            s = 0.0
            for l in range(p):
                if w[l]:
                    s += G[j, l]
            h[j] = s
            if w[j]:
                f += s
        bf = f
        for j in range(p):
            best_w[r, j] = w[j]
        for s_ in range(S):
            inv_t = 1.0 / temps[s_]
            for i in range(p):
                state += _GOLDEN
                u = np.float64(_mix64(state) >> _S11) * _INV53
                delta = 1.0 - 2.0 * w[i]
                de = 2.0 * delta * h[i] + G[i, i]
                if de <= 0.0 or u < np.exp(-de * inv_t):
                    w[i] = 1 - w[i]
                    f += de
                    for j in range(p):
                        h[j] += delta * G[j, i]
                    if f < bf:
                        bf = f
                        for j in range(p):
                            best_w[r, j] = w[j]
        best_f[r] = bf
    return best_w, best_f


def sa_np(G, temps, keys):
    p = G.shape[0]
    R = keys.shape[0]
    state = keys.copy()
    w = np.zeros((R, p), dtype=np.int8)
    with np.errstate(over="ignore"):
        for j in range(p):
            state += _GOLDEN
            u = (_mix64_np(state) >> _S11).astype(np.float64) * _INV53
            w[:, j] = (u < 0.5).astype(np.int8)
        Wf = w.astype(np.float64)
        h = Wf @ G.T
        f = np.einsum("ij,ij->i", Wf, h)
        best_w = w.copy()
        best_f = f.copy()
        rows = np.arange(R)
        for t in temps:
            inv_t = 1.0 / t
            for i in range(p):
                state += _GOLDEN
                u = (_mix64_np(state) >> _S11).astype(np.float64) * _INV53
                delta = 1.0 - 2.0 * w[:, i]
                de = 2.0 * delta * h[:, i] + G[i, i]
                with np.errstate(over="ignore"):
                    acc = (de <= 0.0) | (u < np.exp(-de * inv_t))
                if not acc.any():
                    continue
                a = rows[acc]
                w[a, i] = 1 - w[a, i]
                f[a] += de[a]
                h[a] += delta[a, None] * G[None, :, i]
                imp = a[f[a] < best_f[a]]
                if imp.size:
                    best_f[imp] = f[imp]
                    best_w[imp] = w[imp]
    return best_w, best_f


# ------------------------------------------- constrained brute force


@njit
def constrained_min_jit(Qf, A, b, E, fvec, tol):
    """Minimize x'Qf x over binary x with |Ax-b|<=tol and Ex-f<=tol.

    Returns the winning code or -1 when nothing is feasible.
    """
    n = Qf.shape[0]
    m = A.shape[0]
    q = E.shape[0]
    x = np.zeros(n, dtype=np.int8)
    h = np.zeros(n)
    r = -b.copy()
    s = -fvec.copy()
    fval = 0.0
    best_code = -1
    best_f = np.inf
    vtol = 1e-12 * (np.abs(Qf).sum() + 1.0)
    code = 0
    total = 1 << n
    for k in range(total):
        if k > 0:
            bb = 0
            kk = k
            while (kk & 1) == 0:
                kk >>= 1
                bb += 1
            i = n - 1 - bb
            if x[i] == 0:
                delta = 1.0
                x[i] = 1
            else:
                delta = -1.0
                x[i] = 0
            fval += 2.0 * delta * h[i] + Qf[i, i]
            for j in range(n):
                h[j] += delta * Qf[j, i]
            for j in range(m):
                r[j] += delta * A[j, i]
            for j in range(q):
                s[j] += delta * E[j, i]
            code ^= 1 << bb
            if (k & (_RESYNC - 1)) == 0:
                fval = 0.0
                for j in range(n):
                    acc = 0.0
                    for l in range(n):
                        if x[l]:
                            acc += Qf[j, l]
                    h[j] = acc
                    if x[j]:
                        fval += acc
                for j in range(m):
                    acc = -b[j]
                    for l in range(n):
                        if x[l]:
                            acc += A[j, l]
                    r[j] = acc
                for j in range(q):
                    acc = -fvec[j]
                    for l in range(n):
                        if x[l]:
                            acc += E[j, l]
                    s[j] = acc
        ok = True
        for j in range(m):
            if abs(r[j]) > tol:
                ok = False
                break
        if ok:
            for j in range(q):
                if s[j] > tol:
                    ok = False
                    break
        if not ok:
            continue
        if best_code < 0 or fval < best_f - vtol:
            best_f = fval
            best_code = code
        elif fval <= best_f + vtol and code < best_code:
            if fval < best_f:
                best_f = fval
            best_code = code
    return best_code


def constrained_min_np(Qf, A, b, E, fvec, tol, chunk_bits=15):
    n = Qf.shape[0]
    total = 1 << n
    chunk = 1 << min(chunk_bits, n)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    vtol = 1e-12 * (np.abs(Qf).sum() + 1.0)
    best_f = np.inf
    best_code = -1
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        B = ((codes[:, None] >> shifts) & 1).astype(np.float64)
        ok = np.ones(len(codes), dtype=bool)
        if A.shape[0]:
            ok &= np.all(np.abs(B @ A.T - b) <= tol, axis=1)
        if E.shape[0]:
            ok &= np.all(B @ E.T - fvec <= tol, axis=1)
        if not ok.any():
            continue
        B = B[ok]
        codes = codes[ok]
        vals = np.einsum("ij,ij->i", B @ Qf, B)
        mn = vals.min()
        if best_code < 0 or mn < best_f - vtol:
            best_f = mn
            best_code = int(codes[np.flatnonzero(vals <= mn + vtol)[0]])
        elif mn < best_f:
            best_f = mn
    return best_code
