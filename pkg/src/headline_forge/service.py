"""Candidate-headline scoring over HTTP.

A loaded ScoringModel is immutable; request handlers share it behind a
lock that serializes the network forward pass (layer objects keep scratch
caches, so one pass runs at a time while parsing and featurization stay
concurrent). Responses are JSON; errors always carry
{"error": {"code", "message"}}.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Sequence

import numpy as np

from .checkpoint import ScoringModel, load_checkpoint
from .models import stack_inputs

MAX_CANDIDATES = 32
DEFAULT_MAX_BODY_BYTES = 1_048_576
SERVICE_VERSION = "0.1.0"


class ScoreRequestError(ValueError):
    """Client-side request problem, reported with a stable error code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass(frozen=True)
class CandidateScore:
    headline: str
    p: tuple[float, float, float, float]
    label: int
    rank: int


@dataclass(frozen=True)
class ScoreResponse:
    scores: tuple[CandidateScore, ...]

    def to_json(self) -> dict:
        return {
            "scores": [
                {"headline": s.headline, "p": list(s.p), "label": s.label, "rank": s.rank}
                for s in self.scores
            ]
        }


def score(scoring: ScoringModel, body: str, candidates: Sequence[str]) -> ScoreResponse:
    """Score candidate headlines against one article body.

    Body-side features are computed once and shared; output rows preserve
    request order while ranks sort candidates by the probability of
    indicator 2 (second component) descending, ties broken by request
    position.
    """
    if not isinstance(body, str):
        raise ScoreRequestError("bad_request", "body must be a string")
    if not isinstance(candidates, (list, tuple)) or not candidates:
        raise ScoreRequestError("empty_candidates", "candidates must be a nonempty list")
    if len(candidates) > MAX_CANDIDATES:
        raise ScoreRequestError(
            "too_many_candidates", f"at most {MAX_CANDIDATES} candidates per request"
        )
    for candidate in candidates:
        if not isinstance(candidate, str) or not candidate.strip():
            raise ScoreRequestError("empty_candidate", "each candidate must be nonempty text")

    featurizer = scoring.featurizer
    body_feats = featurizer.body_features(body)
    inputs = [featurizer.featurize_candidate(c, body_feats) for c in candidates]
    probs = scoring.model.forward(stack_inputs(inputs), train=False)

    order = np.argsort(-probs[:, 1], kind="stable")
    ranks = np.empty(len(candidates), dtype=np.int64)
    ranks[order] = np.arange(1, len(candidates) + 1)

    rows = []
    for i, candidate in enumerate(candidates):
        p = tuple(float(v) for v in probs[i])
        rows.append(
            CandidateScore(
                headline=candidate,
                p=p,  # type: ignore[arg-type]
                label=1 + int(np.argmax(probs[i])),
                rank=int(ranks[i]),
            )
        )
    return ScoreResponse(tuple(rows))


class QualityServer(ThreadingHTTPServer):
    """Threaded HTTP server bound to one immutable scoring model."""

    daemon_threads = True

    def __init__(
        self,
        scoring: ScoringModel,
        address: tuple[str, int] = ("127.0.0.1", 0),
        max_body_bytes: int = DEFAULT_MAX_BODY_BYTES,
    ):
        super().__init__(address, _Handler)
        self.scoring = scoring
        self.max_body_bytes = max_body_bytes
        self.forward_lock = threading.Lock()

    @property
    def port(self) -> int:
        return self.server_address[1]


class _Handler(BaseHTTPRequestHandler):
    server: QualityServer
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt: str, *args) -> None:
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self._cors_headers()
        self.end_headers()
        self.wfile.write(data)

    def _send_error_json(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"error": {"code": code, "message": message}})

    def _cors_headers(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self._cors_headers()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        scoring = self.server.scoring
        if self.path == "/v1/health":
            self._send_json(200, {"status": "ok", "model": scoring.spec.architecture})
        elif self.path == "/v1/model":
            spec = scoring.spec
            self._send_json(
                200,
                {
                    "architecture": spec.architecture,
                    "version": SERVICE_VERSION,
                    "dims": {
                        "vocab_size": spec.vocab_size,
                        "headline_len": spec.headline_len,
                        "body_len": spec.body_len,
                        "topic_dim": spec.topic_dim,
                        "doc_vec_dim": spec.doc_vec_dim,
                    },
                    "fingerprint": scoring.fingerprint,
                },
            )
        else:
            self._send_error_json(404, "not_found", f"no route {self.path}")

    def do_POST(self) -> None:
        if self.path != "/v1/score":
            self._send_error_json(404, "not_found", f"no route {self.path}")
            return
        length_header = self.headers.get("Content-Length")
        if length_header is None or not length_header.isdigit():
            self._send_error_json(411, "length_required", "Content-Length header required")
            return
        length = int(length_header)
        if length > self.server.max_body_bytes:
            self._send_error_json(
                413,
                "payload_too_large",
                f"request of {length} bytes exceeds limit {self.server.max_body_bytes}",
            )
            return
        raw = self.rfile.read(length)
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            self._send_error_json(400, "bad_json", "request body is not valid JSON")
            return
        if not isinstance(payload, dict) or "body" not in payload or "candidates" not in payload:
            self._send_error_json(
                400, "bad_request", 'request must be {"body": str, "candidates": [str, ...]}'
            )
            return
        try:
            with self.server.forward_lock:
                response = score(self.server.scoring, payload["body"], payload["candidates"])
        except ScoreRequestError as exc:
            self._send_error_json(400, exc.code, exc.message)
            return
        except Exception as exc:  # model/preprocessor mismatch and kin
            self._send_error_json(500, "internal_error", str(exc))
            return
        self._send_json(200, response.to_json())


def create_server(
    scoring: ScoringModel,
    host: str = "127.0.0.1",
    port: int = 0,
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES,
) -> QualityServer:
    return QualityServer(scoring, (host, port), max_body_bytes)


@dataclass(frozen=True)
class ServeConfig:
    checkpoint_path: str | Path
    host: str = "127.0.0.1"
    port: int = 8080
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES


def serve(config: ServeConfig) -> None:
    """Load the checkpoint and block serving requests; Ctrl-C stops."""
    scoring = load_checkpoint(config.checkpoint_path)
    server = create_server(scoring, config.host, config.port, config.max_body_bytes)
    try:
        server.serve_forever()
    finally:
        server.server_close()
