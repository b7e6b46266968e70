import itertools
import json
import logging
import os
import subprocess
import sys
import threading
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qfw import kernels
from qfw.oracle import (
    AutoOracle,
    ExhaustiveOracle,
    OracleError,
    ProtocolError,
    RemoteOracle,
    SaParams,
    SimulatedAnnealingOracle,
    make_server,
    qubo_value,
    serve_in_thread,
    solve_exhaustive,
    solve_sa,
)
from qfw.oracle.remote import decode_response, encode_request

from helpers import random_sym

BACKENDS = ["numba", "numpy"]


def naive_min(G):
    best_w, best_v = None, None
    for bits in itertools.product((0, 1), repeat=G.shape[0]):
        w = np.array(bits, dtype=float)
        v = 0.0
        for i in range(len(w)):
            for j in range(len(w)):
                v += G[i, j] * w[i] * w[j]
        if best_v is None or v < best_v - 1e-12:
            best_w, best_v = w, v
    return best_w.astype(np.int8), best_v


@pytest.fixture
def loopback():
    server = make_server()
    serve_in_thread(server)
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}/"
    server.shutdown()
    server.server_close()


# ------------------------------------------------------------- kernels


@given(st.integers(1, 20), st.data())
def test_code_roundtrip(p, data):
    code = data.draw(st.integers(0, 2**p - 1))
    w = kernels.code_to_bits(code, p)
    assert kernels.bits_to_code(w) == code
    assert w[0] == (code >> (p - 1)) & 1


def test_rng_paths_agree():
    z = np.arange(1, 200, dtype=np.uint64) * np.uint64(7919)
    jit = np.array([kernels._mix64(v) for v in z], dtype=np.uint64)
    assert np.array_equal(jit, kernels._mix64_np(z))
    assert np.array_equal(kernels.chain_keys(3, 5), kernels.chain_keys(3, 5))
    assert not np.array_equal(kernels.chain_keys(3, 5), kernels.chain_keys(4, 5))


def test_pick():
    assert kernels.pick("numpy") == "numpy"
    with pytest.raises(ValueError):
        kernels.pick("cuda")


# ---------------------------------------------------------- exhaustive


@pytest.mark.parametrize("backend", BACKENDS)
def test_exhaustive_examples(backend):
    r = solve_exhaustive(np.eye(3), backend=backend)
    assert r.w.tolist() == [0, 0, 0] and r.value == 0.0
    r = solve_exhaustive(-np.eye(3), backend=backend)
    assert r.w.tolist() == [1, 1, 1] and r.value == -3.0
    assert r.samples_taken == 8


@pytest.mark.parametrize("backend", BACKENDS)
def test_exhaustive_tie_break(backend):
    r = solve_exhaustive(np.array([[-1.0, 1.0], [1.0, -1.0]]), backend=backend)
    assert r.w.tolist() == [0, 1]
    assert solve_exhaustive(np.zeros((4, 4)), backend=backend).w.tolist() == [0] * 4


@pytest.mark.parametrize("backend", BACKENDS)
def test_exhaustive_matches_naive(backend):
    rng = np.random.default_rng(11)
    for p in (1, 2, 5, 8, 10):
        G = random_sym(rng, p)
        w, v = naive_min(G)
        r = solve_exhaustive(G, backend=backend)
        assert np.array_equal(r.w, w) and abs(r.value - v) <= 1e-12


def test_exhaustive_integer_ties_match_naive():
    # small integer entries create many exact ties
    rng = np.random.default_rng(2)
    for _ in range(20):
        M = rng.integers(-2, 3, (6, 6)).astype(float)
        G = M + M.T
        w, _ = naive_min(G)
        for b in BACKENDS:
            assert np.array_equal(solve_exhaustive(G, backend=b).w, w)


def test_exhaustive_refuses_above_cap():
    with pytest.raises(OracleError, match="cap"):
        solve_exhaustive(np.zeros((5, 5)), cap=4)


def test_exhaustive_rejects_bad_input():
    with pytest.raises(ValueError):
        solve_exhaustive(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        solve_exhaustive(np.full((2, 2), np.inf))


@given(st.integers(1, 9), st.floats(0.01, 100.0), st.integers(0, 2**32 - 1))
def test_exhaustive_scale_equivariant(p, c, seed):
    G = random_sym(np.random.default_rng(seed), p)
    assert np.array_equal(solve_exhaustive(G).w, solve_exhaustive(c * G).w)


# ----------------------------------------------------------------- SA


@pytest.mark.parametrize("backend", BACKENDS)
def test_sa_examples(backend):
    r = solve_sa(-np.eye(6), seed=1, backend=backend)
    assert r.w.tolist() == [1] * 6 and r.value == -6.0
    r = solve_sa(np.zeros((4, 4)), seed=1, backend=backend)
    assert r.value == 0.0


def test_sa_paths_agree_and_repeat():
    rng = np.random.default_rng(3)
    params = SaParams(restarts=8, sweeps=60)
    for p in (3, 9, 14):
        G = random_sym(rng, p)
        a = solve_sa(G, params, seed=5, backend="numba")
        b = solve_sa(G, params, seed=5, backend="numpy")
        c = solve_sa(G, params, seed=5, backend="numba")
        assert np.array_equal(a.w, b.w) and np.array_equal(a.w, c.w)
        assert a.value == c.value


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_sa_sandwiched_by_exhaustive_and_zero(p, seed):
    G = random_sym(np.random.default_rng(seed), p)
    r = solve_sa(G, SaParams(restarts=4, sweeps=20), seed=seed)
    assert solve_exhaustive(G).value <= r.value + 1e-12
    assert r.value <= 0.0
    assert abs(r.value - qubo_value(G, r.w)) <= 1e-9


def test_sa_oracle_is_stateless():
    G = random_sym(np.random.default_rng(4), 12)
    orc = SimulatedAnnealingOracle(SaParams(restarts=3, sweeps=30), seed=9)
    a, b = orc(G), orc(G)
    assert np.array_equal(a.w, b.w)
    assert orc.config()["seed"] == 9


def test_auto_oracle_routes_by_size():
    auto = AutoOracle(cap=4, sa=SimulatedAnnealingOracle(SaParams(restarts=2, sweeps=10)))
    assert auto(-np.eye(3)).backend == "exhaustive"
    assert auto(-np.eye(6)).backend == "sa"


# ------------------------------------------------------------- remote


def test_remote_loopback_matches_local(loopback):
    orc = RemoteOracle(loopback)
    rng = np.random.default_rng(8)
    for p in (1, 4, 9):
        G = random_sym(rng, p)
        r, ref = orc(G), solve_exhaustive(G)
        assert np.array_equal(r.w, ref.w) and r.value == ref.value
        assert r.backend == "remote"


def test_remote_url_from_environment(monkeypatch, loopback):
    monkeypatch.setenv("QFW_REMOTE_URL", loopback)
    assert RemoteOracle().url == loopback
    monkeypatch.delenv("QFW_REMOTE_URL")
    with pytest.raises(OracleError):
        RemoteOracle()


def test_remote_unreachable_gives_up_after_retries(monkeypatch):
    calls = []

    def refuse(*a, **k):
        calls.append(1)
        raise OSError("connection refused")

    monkeypatch.setattr(urllib.request, "urlopen", refuse)
    orc = RemoteOracle("http://127.0.0.1:9/", retries=3, backoff=0.0)
    with pytest.raises(OracleError, match="3 attempts"):
        orc(np.eye(2))
    assert len(calls) == 3


class _Scripted(BaseHTTPRequestHandler):
    script = []

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length", 0)))
        code, body = self.script.pop(0)
        data = body.encode()
        self.send_response(code)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def scripted():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Scripted)
    th = threading.Thread(target=server.serve_forever, daemon=True)
    th.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/", _Scripted
    server.shutdown()
    server.server_close()


def test_remote_retries_server_errors(scripted):
    url, handler = scripted
    ok = json.dumps({"samples": [{"w": [1, 0], "energy": -1.0}]})
    handler.script = [(503, "busy"), (200, ok)]
    r = RemoteOracle(url, backoff=0.0)(np.diag([-1.0, 1.0]))
    assert r.w.tolist() == [1, 0]


def test_remote_client_errors_are_not_retried(scripted):
    url, handler = scripted
    handler.script = [(400, "{}")]
    with pytest.raises(ProtocolError, match="400"):
        RemoteOracle(url, backoff=0.0)(np.eye(2))


def test_remote_non_json_response(scripted):
    url, handler = scripted
    handler.script = [(200, "not json")]
    with pytest.raises(ProtocolError):
        RemoteOracle(url, backoff=0.0)(np.eye(2))


def test_decode_rescoring_and_validation(caplog):
    G = np.diag([-1.0, -2.0])
    doc = {"samples": [{"w": [1, 0], "energy": -5.0}, {"w": [0, 1], "energy": 3.0}]}
    with caplog.at_level(logging.WARNING):
        w, v, n = decode_response(doc, G)
    assert w.tolist() == [0, 1] and v == -2.0 and n == 2
    assert "disagrees" in caplog.text
    for bad in ({}, {"samples": []}, {"samples": [{"energy": 1}]},
                {"samples": [{"w": [0, 2]}]}, {"samples": [{"w": [0]}]},
                {"samples": [{"w": ["a", "b"]}]}):
        with pytest.raises(ProtocolError):
            decode_response(bad, G)


def test_encode_request_layout():
    doc = encode_request(np.eye(2), 7)
    assert doc == {"p": 2, "G": [[1.0, 0.0], [0.0, 1.0]], "num_reads": 7}


def test_server_rejects_bad_payload(loopback):
    req = urllib.request.Request(loopback, data=b'{"p": 3, "G": [[1]]}')
    with pytest.raises(urllib.error.HTTPError) as exc:
        urllib.request.urlopen(req, timeout=5)
    assert exc.value.code == 400


def test_exhaustive_oracle_config():
    assert ExhaustiveOracle().config() == {"kind": "exhaustive", "cap": 24}


def test_env_flag_selects_numpy_path():
    code = ("from qfw import kernels;import numpy as np;from qfw.oracle import solve_exhaustive;"
            "G=np.diag([1.,-2.,3.]);print(kernels.use_numba(), solve_exhaustive(G).w.tolist())")
    outs = {}
    for flag in ("", "1"):
        env = dict(os.environ, QFW_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                             text=True, check=True)
        outs[flag] = res.stdout.split(" ", 1)
    assert outs["1"][0] == "False"
    assert outs[""][1] == outs["1"][1]
