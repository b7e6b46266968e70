"""QUBO oracle backed by a remote sampling service (JSON over HTTP).

Request::

    {"p": int, "G": [[...], ...], "num_reads": int}

Response::

    {"samples": [{"w": [0, 1, ...], "energy": float}, ...]}

Reported energies are advisory: every sample is re-scored locally and the best
one by (local value, lexicographic order) wins.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
import urllib.error
import urllib.request
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .. import kernels
from .local import OracleError, OracleResult, check_qubo, qubo_value, solve_exhaustive

log = logging.getLogger(__name__)

ENV_URL = "QFW_REMOTE_URL"


class ProtocolError(OracleError):
    """The remote service answered with something we cannot use."""


def encode_request(G, num_reads):
    return {"p": int(G.shape[0]), "G": G.tolist(), "num_reads": int(num_reads)}


def decode_response(doc, G):
    """Validate a response document and return the locally best sample."""
    p = G.shape[0]
    if not isinstance(doc, dict) or not isinstance(doc.get("samples"), list):
        raise ProtocolError("response must be an object with a 'samples' list")
    if not doc["samples"]:
        raise ProtocolError("response contains no samples")
    tol = kernels.tie_tolerance(G)
    best = None
    for k, sample in enumerate(doc["samples"]):
        if not isinstance(sample, dict) or "w" not in sample:
            raise ProtocolError(f"sample {k} lacks a 'w' field")
        try:
            w = np.asarray(sample["w"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"sample {k}: {exc}") from None
        if w.shape != (p,):
            raise ProtocolError(f"sample {k} has length {w.size}, expected {p}")
        if not np.all((w == 0) | (w == 1)):
            raise ProtocolError(f"sample {k} is not binary")
        w = w.astype(np.int8)
        value = qubo_value(G, w)
        energy = sample.get("energy")
        if energy is not None and abs(float(energy) - value) > 1e-6 * (1.0 + abs(value)):
            log.warning("remote energy %r disagrees with local value %r; using local",
                        energy, value)
        code = kernels.bits_to_code(w)
        if best is None or value < best[0] - tol or (value <= best[0] + tol and code < best[2]):
            best = (value, w, code)
    return best[1], best[0], len(doc["samples"])


class RemoteOracle:
    name = "remote"

    def __init__(self, url=None, num_reads=50, timeout=30.0, retries=3, backoff=0.25):
        url = url or os.environ.get(ENV_URL)
        if not url:
            raise OracleError(f"no remote URL given and {ENV_URL} is unset")
        self.url = url
        self.num_reads = num_reads
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def _post(self, payload):
        body = json.dumps(payload).encode()
        last = None
        for attempt in range(self.retries):
            req = urllib.request.Request(
                self.url, data=body, headers={"Content-Type": "application/json"})
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    raw = resp.read()
            except urllib.error.HTTPError as exc:
                if exc.code < 500:
                    raise ProtocolError(f"remote rejected request: HTTP {exc.code}") from None
                last = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * 2 ** attempt)
                continue
            except (urllib.error.URLError, OSError) as exc:
                last = exc
                log.info("remote oracle attempt %d/%d failed: %s",
                         attempt + 1, self.retries, exc)
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * 2 ** attempt)
                continue
            try:
                return json.loads(raw)
            except ValueError as exc:
                raise ProtocolError(f"response is not JSON: {exc}") from None
        raise OracleError(f"remote oracle unreachable after {self.retries} attempts: {last}")

    def __call__(self, G):
        G = check_qubo(G)
        t0 = time.perf_counter()
        doc = self._post(encode_request(G, self.num_reads))
        w, value, n = decode_response(doc, G)
        return OracleResult(w, value, "remote", time.perf_counter() - t0, n)

    def config(self):
        return {"kind": "remote", "url": self.url, "num_reads": self.num_reads,
                "timeout": self.timeout, "retries": self.retries}


# ----------------------------------------------------------- reference server


def make_server(host="127.0.0.1", port=0, solver=solve_exhaustive):
    """HTTP server answering the wire protocol with ``solver(G)``.

    Port 0 picks a free port; read it back from ``server.server_address``.
    """

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            try:
                length = int(self.headers.get("Content-Length", 0))
                doc = json.loads(self.rfile.read(length))
                G = np.asarray(doc["G"], dtype=float)
                if G.shape != (doc["p"], doc["p"]):
                    raise ValueError("G does not match p")
                res = solver(G)
                out = {"samples": [{"w": [int(v) for v in res.w],
                                    "energy": float(res.value)}]}
                code = 200
            except Exception as exc:  # noqa: BLE001 - reported to the client
                out = {"error": str(exc)}
                code = 400
            data = json.dumps(out).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, fmt, *args):
            log.debug("oracle server: " + fmt, *args)

    return ThreadingHTTPServer((host, port), Handler)


def serve_in_thread(server):
    th = threading.Thread(target=server.serve_forever, daemon=True)
    th.start()
    return th
