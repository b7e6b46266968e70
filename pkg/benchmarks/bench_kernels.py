"""Timing of the compiled kernels against the vectorized numpy fallback.

    python3 benchmarks/bench_kernels.py [--quick] [--repeat 3]

Prints a TSV table (kernel, size, numba seconds, numpy seconds, speedup) and
checks that both paths return the same answer. The last rows time a whole
solve in two child processes, one with QFW_DISABLE_NUMBA=1.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from qfw import kernels
from qfw.model import QboProblem, brute_force_solve
from qfw.oracle import SaParams, solve_exhaustive, solve_sa


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def random_qubo(p, seed):
    M = np.random.default_rng(seed).normal(size=(p, p))
    return 0.5 * (M + M.T)


def bench_exhaustive(p, repeat):
    G = random_qubo(p, p)
    a, tj = best_of(lambda: solve_exhaustive(G, backend="numba"), repeat)
    b, tn = best_of(lambda: solve_exhaustive(G, backend="numpy"), repeat)
    assert np.array_equal(a.w, b.w), "exhaustive paths disagree"
    return tj, tn


def bench_sa(p, repeat):
    G = random_qubo(p, 100 + p)
    params = SaParams(restarts=20)
    a, tj = best_of(lambda: solve_sa(G, params, seed=7, backend="numba"), repeat)
    b, tn = best_of(lambda: solve_sa(G, params, seed=7, backend="numpy"), repeat)
    assert abs(a.value - b.value) <= 1e-9 * (1 + abs(a.value)), "SA paths disagree"
    return tj, tn


def bench_brute(n, repeat):
    rng = np.random.default_rng(n)
    Q = random_qubo(n, 200 + n)
    a = (rng.uniform(size=n) < 0.5).astype(float)
    prob = QboProblem(Q, eq_constraints=[(a, float(a.sum() // 2))])
    x1, tj = best_of(lambda: brute_force_solve(prob, backend="numba"), repeat)
    x2, tn = best_of(lambda: brute_force_solve(prob, backend="numpy"), repeat)
    assert np.array_equal(x1[0], x2[0]), "brute-force paths disagree"
    return tj, tn


SOLVE_SNIPPET = (
    "import time;from qfw.problems import gen_graph_matching;"
    "from qfw.engine import solve,SolverConfig;from qfw.oracle import ExhaustiveOracle;"
    "i=gen_graph_matching(3,0);solve(i.problem,SolverConfig(max_iters=2),ExhaustiveOracle());"
    "t=time.perf_counter();s=solve(i.problem,SolverConfig(max_iters={iters}),ExhaustiveOracle());"
    "print(time.perf_counter()-t, s.value)"
)


def bench_solve(iters):
    out = {}
    for label, flag in (("numba", ""), ("numpy", "1")):
        env = dict(os.environ, QFW_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(iters=iters)],
                             env=env, capture_output=True, text=True, check=True)
        secs, value = res.stdout.split()
        out[label] = (float(secs), float(value))
    assert out["numba"][1] == out["numpy"][1], "solver paths disagree"
    return out["numba"][0], out["numpy"][0]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.use_numba():
        print("numba is disabled; the 'numba' column times uncompiled loops", file=sys.stderr)

    # compile outside the timed region
    t0 = time.perf_counter()
    solve_exhaustive(random_qubo(4, 0), backend="numba")
    solve_sa(random_qubo(4, 0), SaParams(restarts=2, sweeps=4), backend="numba")
    brute_force_solve(QboProblem(np.eye(3)), backend="numba")
    print(f"# jit warm-up {time.perf_counter() - t0:.2f}s", file=sys.stderr)

    sizes = {"exhaustive": (12, 16) if args.quick else (12, 16, 20),
             "sa": (16,) if args.quick else (16, 28),
             "brute_force": (12,) if args.quick else (12, 16, 18)}
    runners = {"exhaustive": bench_exhaustive, "sa": bench_sa, "brute_force": bench_brute}
    print("kernel\tsize\tnumba_s\tnumpy_s\tspeedup")
    for name, ps in sizes.items():
        for p in ps:
            tj, tn = runners[name](p, args.repeat)
            print(f"{name}\t{p}\t{tj:.4g}\t{tn:.4g}\t{tn / tj:.1f}x", flush=True)
    iters = 20 if args.quick else 100
    tj, tn = bench_solve(iters)
    print(f"solve_gm3_T{iters}\t10\t{tj:.4g}\t{tn:.4g}\t{tn / tj:.1f}x")


if __name__ == "__main__":
    main()
