"""HTTP facade over the engine for the explorer and other clients.

All solving goes through the same run_query path the command line uses, so
reports from both front ends agree field for field (timings aside).  State
is one in-memory scorecard registry; restarting the process forgets it.
"""

from __future__ import annotations

import threading
import time
import uuid
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .errors import (
    ArgumentError,
    BuildError,
    EmptyDataError,
    SchemaError,
    SingularityError,
    SizeError,
    TargetTypeError,
    ValidationError,
)
from .report import run_query
from .scorecard import Scorecard, parse_scorecard

BODY_CAP_BYTES = 1 << 20
MAX_CONCURRENT_SOLVES = 4
QUEUE_DEPTH = 16
DEFAULT_REQUEST_TIME_LIMIT = 10.0
MAX_REQUEST_TIME_LIMIT = 60.0

CLIENT_ERRORS = (
    SchemaError,
    ValidationError,
    TargetTypeError,
    EmptyDataError,
    SingularityError,
    BuildError,
    SizeError,
    ArgumentError,
)


class SolveGate:
    """Caps simultaneous solves; beyond slots + queue the request is shed."""

    def __init__(self, slots: int, queue_depth: int):
        self._sem = threading.Semaphore(slots)
        self._lock = threading.Lock()
        self._admitted = 0
        self._capacity = slots + queue_depth

    def admit(self) -> bool:
        with self._lock:
            if self._admitted >= self._capacity:
                return False
            self._admitted += 1
        self._sem.acquire()
        return True

    def leave(self) -> None:
        self._sem.release()
        with self._lock:
            self._admitted -= 1


class Registry:
    """Synchronized id -> registered scorecard map."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: dict[str, dict] = {}

    def add(self, entry: dict) -> str:
        token = uuid.uuid4().hex[:16]
        with self._lock:
            self._items[token] = entry
        return token

    def get(self, token: str) -> dict | None:
        with self._lock:
            return self._items.get(token)


def _client_error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def _parse_rows(raw, scorecard: Scorecard) -> np.ndarray | None:
    if raw is None:
        return None
    p = len(scorecard.features)
    if not isinstance(raw, list) or len(raw) < 2:
        raise SchemaError("rows: expected a list of at least two sample rows")
    matrix = []
    for r, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != p:
            raise SchemaError(f"rows[{r}]: expected {p} numbers")
        for value in row:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise SchemaError(f"rows[{r}]: entries must be numbers")
        matrix.append([float(v) for v in row])
    return np.asarray(matrix, dtype=float)


def default_ui_dir() -> Path:
    return Path(__file__).resolve().parents[2] / "frontend" / "dist"


def create_app(ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="scorecf", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    registry = Registry()
    gate = SolveGate(MAX_CONCURRENT_SOLVES, QUEUE_DEPTH)

    @app.middleware("http")
    async def cap_body(request: Request, call_next):
        if request.method in ("POST", "PUT"):
            length = request.headers.get("content-length")
            if length and length.isdigit() and int(length) > BODY_CAP_BYTES:
                return _client_error(413, "request body exceeds 1 MiB")
            body = await request.body()
            if len(body) > BODY_CAP_BYTES:
                return _client_error(413, "request body exceeds 1 MiB")
        return await call_next(request)

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "limits": {
                "concurrent_solves": MAX_CONCURRENT_SOLVES,
                "queue_depth": QUEUE_DEPTH,
                "default_time_limit": DEFAULT_REQUEST_TIME_LIMIT,
                "max_time_limit": MAX_REQUEST_TIME_LIMIT,
                "body_cap_bytes": BODY_CAP_BYTES,
            },
        }

    @app.post("/api/scorecards", status_code=201)
    def register_scorecard(body: dict = Body(...)):
        # A bare scorecard document is accepted as shorthand for
        # {"scorecard": document} so simple clients stay simple.
        if "scorecard" in body:
            extras = sorted(set(body) - {"scorecard", "rows", "ridge"})
            if extras:
                return _client_error(422, f"body: unknown key(s) {extras}")
            raw_scorecard = body["scorecard"]
            raw_rows = body.get("rows")
            ridge = body.get("ridge")
        else:
            raw_scorecard, raw_rows, ridge = body, None, None
        if ridge is not None and (
            isinstance(ridge, bool) or not isinstance(ridge, (int, float)) or ridge < 0
        ):
            return _client_error(422, "ridge: must be a nonnegative number")
        try:
            scorecard = parse_scorecard(raw_scorecard)
            rows = _parse_rows(raw_rows, scorecard)
        except CLIENT_ERRORS as exc:
            return _client_error(422, str(exc))
        token = registry.add(
            {
                "scorecard": scorecard,
                "document": raw_scorecard,
                "rows": rows,
                "ridge": None if ridge is None else float(ridge),
                "created_at": time.time(),
            }
        )
        return {"id": token}

    @app.get("/api/scorecards/{token}")
    def fetch_scorecard(token: str):
        entry = registry.get(token)
        if entry is None:
            return _client_error(404, f"no scorecard registered under {token!r}")
        return entry["document"]

    @app.post("/api/scorecards/{token}/counterfactuals")
    def counterfactuals(token: str, doc: dict = Body(...)):
        entry = registry.get(token)
        if entry is None:
            return _client_error(404, f"no scorecard registered under {token!r}")
        if not gate.admit():
            return _client_error(503, "solver queue is full, retry shortly")
        try:
            report = run_query(
                entry["scorecard"],
                doc,
                rows=entry["rows"],
                ridge=entry["ridge"],
                default_time_limit=DEFAULT_REQUEST_TIME_LIMIT,
                max_time_limit=MAX_REQUEST_TIME_LIMIT,
            )
        except CLIENT_ERRORS as exc:
            return _client_error(422, str(exc))
        finally:
            gate.leave()
        return report

    ui_path = Path(ui_dir) if ui_dir is not None else default_ui_dir()
    if ui_path.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_path), html=True), name="ui")

    return app
