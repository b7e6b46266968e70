"""Command-line entry point.

Subcommands: ``solve`` (one serialized problem), ``bench-gm`` and
``bench-sync`` (seeded benchmark suites), ``gen`` (write instances) and
``serve-oracle`` (reference HTTP sampler). Solver options resolve as
flags > ``--config`` JSON file > built-in defaults, and every report echoes
the resolved values.

Exit codes: 0 success, 2 solver or oracle failure, 3 input/output or parse
failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from . import problems as fam
from .engine import SolverConfig, SolverError, solve, trace_to_csv, write_atomic
from .model import ProblemError, brute_force_solve, is_feasible, problem_from_dict, problem_to_dict
from .oracle import (
    ExhaustiveOracle,
    OracleError,
    RemoteOracle,
    SaParams,
    SimulatedAnnealingOracle,
    make_server,
)
from .oracle.remote import ENV_URL
from .rounding import FIRST_COLUMN, RANK_ONE, round_solution

log = logging.getLogger("qfw")

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_IO = 3

DEFAULTS = {
    "variant": "fwal",
    "iters": 250,
    "beta0": 1.0,
    "dual": "constant",
    "dual_bound": None,
    "oracle": "exhaustive",
    "sa_restarts": 50,
    "sa_sweeps": None,
    "seed": 0,
    "remote_url": None,
    "remote_timeout": 30.0,
    "remote_retries": 3,
    "early_stop": False,
    "rounding": "rank1",
    "jobs": 1,
    "format": "csv",
}

_ROUNDING = {"col": FIRST_COLUMN, "rank1": RANK_ONE}


class InputError(Exception):
    """Anything wrong with files or their contents (exit code 3)."""


# ----------------------------------------------------------------- config


def resolve_config(args, defaults=DEFAULTS):
    """Merge defaults, the optional config file and explicit flags."""
    conf = dict(defaults)
    path = getattr(args, "config", None)
    if path:
        doc = _read_json(path)
        if not isinstance(doc, dict):
            raise InputError(f"{path}: config must be a JSON object")
        unknown = set(doc) - set(defaults)
        if unknown:
            raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
        conf.update(doc)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = val
    if conf["oracle"] == "remote" and not conf["remote_url"]:
        conf["remote_url"] = os.environ.get(ENV_URL)
    _check_choices(conf)
    return conf


def _check_choices(conf):
    allowed = {"variant": ("fwal", "fwqp"), "dual": ("constant", "theoretical", "zero"),
               "oracle": ("exhaustive", "sa", "remote"), "rounding": tuple(_ROUNDING),
               "format": ("csv", "json")}
    for key, choices in allowed.items():
        if conf[key] not in choices:
            raise InputError(f"config {key}={conf[key]!r} not in {list(choices)}")
    if conf["dual"] == "theoretical" and not conf["dual_bound"]:
        raise InputError("--dual theoretical needs --dual-bound")
    if conf["oracle"] == "remote" and not conf["remote_url"]:
        raise InputError(f"--oracle remote needs --remote-url or {ENV_URL}")
    if int(conf["jobs"]) < 1:
        raise InputError("--jobs must be >= 1")
    if int(conf["remote_retries"]) < 1:
        raise InputError("--remote-retries must be >= 1")
    solver_config(conf)


def solver_config(conf):
    try:
        return SolverConfig(variant=conf["variant"], max_iters=int(conf["iters"]),
                            beta0=float(conf["beta0"]), dual_policy=conf["dual"],
                            dual_bound=conf["dual_bound"],
                            early_stop=bool(conf["early_stop"]),
                            rounding=_ROUNDING[conf["rounding"]])
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid solver options: {exc}") from None


def make_oracle(conf, seed=None):
    kind = conf["oracle"]
    if kind == "exhaustive":
        return ExhaustiveOracle()
    if kind == "sa":
        params = SaParams(restarts=int(conf["sa_restarts"]), sweeps=conf["sa_sweeps"])
        return SimulatedAnnealingOracle(params, conf["seed"] if seed is None else seed)
    return RemoteOracle(conf["remote_url"], timeout=float(conf["remote_timeout"]),
                        retries=int(conf["remote_retries"]))


# -------------------------------------------------------------------- I/O


def _read_json(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, NaN to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _dump(doc):
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def _write(path, text):
    try:
        write_atomic(path, text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror or exc}") from None


def trace_text(trace, fmt):
    if fmt == "csv":
        return trace_to_csv(trace)
    return _dump([asdict(r) for r in trace])


# ---------------------------------------------------------------- commands


def cmd_solve(args):
    conf = resolve_config(args)
    problem, meta = problem_from_dict(_read_json(args.problem))
    oracle = make_oracle(conf)
    sol = solve(problem, solver_config(conf), oracle)
    report = {
        "version": __version__,
        "problem": os.fspath(args.problem),
        "config": conf,
        "oracle": oracle.config(),
        "x": sol.x.tolist(),
        "value": sol.value,
        "feasible": is_feasible(problem, sol.x),
        "rounding": {"method": sol.rounding.method, "projected": sol.rounding.projected},
        "diagnostics": sol.diagnostics,
    }
    if meta is not None:
        report["meta"] = meta
    if args.trace:
        _write(args.trace, trace_text(sol.trace, conf["format"]))
    text = _dump(report)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _gm_one(job):
    conf, N, seed = job
    inst = fam.gen_graph_matching(N, seed)
    sol = solve(inst.problem, solver_config(conf), make_oracle(conf, seed))
    relaxed = round_solution(sol.W, inst.problem, solver_config(conf).rounding, project=False)
    return {
        "seed": seed, "n": inst.problem.n, "gt": inst.gt_value,
        "rounded": sol.value - inst.gt_value,
        "relaxed": relaxed.objective - inst.gt_value,
        "relaxed_feasible": is_feasible(inst.problem, relaxed.x_binary),
        "objective": sol.diagnostics["objective"] - inst.gt_value,
        "infeasibility": sol.diagnostics["infeasibility"],
        "iterations": sol.diagnostics["iterations"],
    }


def _sync_one(job):
    conf, K, N, sigma, seed = job
    inst = fam.gen_perm_sync(K, N, sigma, seed)
    sol = solve(inst.problem, solver_config(conf), make_oracle(conf, seed))
    best_loss = fam.sync_optimum(inst)[0] if sigma > 0 else 0.0
    eps = fam.cycle_consistency_error([r.objective for r in sol.trace], inst.gt_value)
    return {
        "seed": seed, "n": inst.problem.n,
        "accuracy": fam.bit_accuracy(sol.x, inst.gt_x, K, N),
        "loss": sol.value + inst.offset, "optimum_loss": best_loss,
        "iterations": sol.diagnostics["iterations"],
        "stopped_early": sol.diagnostics["stopped_early"],
        "eps_cc": eps.tolist(),
    }


def _run_jobs(fn, jobs, n_workers):
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as ex:
        return list(ex.map(fn, jobs))


def _tsv(rows, cols):
    lines = ["\t".join(cols)]
    for r in rows:
        lines.append("\t".join(_cell(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _cell(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def cmd_bench_gm(args):
    conf = resolve_config(args)
    if args.N < 2:
        raise InputError("bench-gm needs N >= 2")
    jobs = [(conf, args.N, conf["seed"] + i) for i in range(args.instances)]
    rows = _run_jobs(_gm_one, jobs, int(conf["jobs"]))
    cols = ["seed", "n", "gt", "rounded", "relaxed", "relaxed_feasible", "objective",
            "infeasibility", "iterations"]
    out = _tsv(rows, cols)
    summary = {}
    if rows:
        summary = {k: float(np.mean([r[k] for r in rows]))
                   for k in ("rounded", "relaxed", "objective")}
        out += "mean\t\t\t" + "\t".join(_cell(summary[k]) for k in ("rounded", "relaxed")) \
            + "\t\t" + _cell(summary["objective"]) + "\t\t\n"
    sys.stdout.write(out)
    if args.out:
        _write(args.out, _dump({"config": conf, "N": args.N, "rows": rows, "mean": summary}))
    return EXIT_OK


def cmd_bench_sync(args):
    conf = resolve_config(args)
    if not 0.0 <= args.sigma <= 1.0:
        raise InputError("sigma must lie in [0, 1]")
    jobs = [(conf, args.K, args.N, args.sigma, conf["seed"] + i) for i in range(args.instances)]
    rows = _run_jobs(_sync_one, jobs, int(conf["jobs"]))
    cols = ["seed", "n", "accuracy", "loss", "optimum_loss", "iterations", "stopped_early"]
    out = _tsv(rows, cols)
    if rows:
        out += f"mean\t\t{_cell(float(np.mean([r['accuracy'] for r in rows])))}\t\t\t\t\n"
    sys.stdout.write(out)
    if args.trace:
        if conf["format"] == "csv":
            lines = ["seed,t,eps_cc"]
            for r in rows:
                lines += [f"{r['seed']},{t},{e!r}" for t, e in enumerate(r["eps_cc"], 1)]
            _write(args.trace, "\n".join(lines) + "\n")
        else:
            _write(args.trace, _dump({str(r["seed"]): r["eps_cc"] for r in rows}))
    if args.out:
        _write(args.out, _dump({"config": conf, "K": args.K, "N": args.N,
                                "sigma": args.sigma, "rows": rows}))
    return EXIT_OK


def cmd_gen(args):
    if args.family == "gm":
        inst = fam.gen_graph_matching(args.N, args.seed)
    else:
        inst = fam.gen_perm_sync(args.K, args.N, args.sigma, args.seed)
    doc = problem_to_dict(inst.problem, inst.meta())
    if args.check_brute_force:
        x, v = brute_force_solve(inst.problem)
        doc["meta"]["brute_force"] = {"x": x.tolist(), "value": v}
    _write(args.out, _dump(doc))
    return EXIT_OK


def cmd_serve(args):
    server = make_server(args.host, args.port)
    host, port = server.server_address[:2]
    print(f"serving QUBO oracle on http://{host}:{port}/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _solver_flags():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("solver")
    g.add_argument("--config", help="JSON file with default option values")
    g.add_argument("--variant", choices=["fwal", "fwqp"])
    g.add_argument("--iters", type=int)
    g.add_argument("--beta0", type=float)
    g.add_argument("--dual", choices=["constant", "theoretical", "zero"])
    g.add_argument("--dual-bound", dest="dual_bound", type=float)
    g.add_argument("--oracle", choices=["exhaustive", "sa", "remote"])
    g.add_argument("--sa-restarts", dest="sa_restarts", type=int)
    g.add_argument("--sa-sweeps", dest="sa_sweeps", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--remote-url", dest="remote_url")
    g.add_argument("--remote-timeout", dest="remote_timeout", type=float)
    g.add_argument("--remote-retries", dest="remote_retries", type=int)
    g.add_argument("--early-stop", dest="early_stop", action="store_const", const=True)
    g.add_argument("--rounding", choices=list(_ROUNDING))
    g.add_argument("--jobs", type=int)
    g.add_argument("--format", choices=["csv", "json"])
    g.add_argument("--out", help="report / table JSON path")
    g.add_argument("--trace", help="trace output path")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="qfw", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"qfw {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _solver_flags()

    s = sub.add_parser("solve", parents=[common], help="solve a problem file")
    s.add_argument("problem")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench-gm", parents=[common], help="graph-matching suite")
    b.add_argument("--N", type=int, default=3)
    b.add_argument("--instances", type=int, default=10)
    b.set_defaults(func=cmd_bench_gm)

    y = sub.add_parser("bench-sync", parents=[common], help="synchronization suite")
    y.add_argument("--K", type=int, default=3)
    y.add_argument("--N", type=int, default=3)
    y.add_argument("--sigma", type=float, default=0.0)
    y.add_argument("--instances", type=int, default=10)
    y.set_defaults(func=cmd_bench_sync)

    g = sub.add_parser("gen", help="write a generated instance as JSON")
    g.add_argument("family", choices=["gm", "sync"])
    g.add_argument("--N", type=int, default=3)
    g.add_argument("--K", type=int, default=3)
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--check-brute-force", action="store_true",
                   help="also record the exact constrained optimum")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("serve-oracle", help="run the reference remote oracle")
    r.add_argument("--host", default="127.0.0.1")
    r.add_argument("--port", type=int, default=8765)
    r.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ProblemError as exc:
        print(f"error: invalid problem: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, OracleError) as exc:
        print(f"error: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
