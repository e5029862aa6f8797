"""Planning session service: the staged planner/query cycle over HTTP.

Sessions are in-memory and identified by short hex ids; each holds one
workspace plus the staged planner spec, the staged query, and the last
solved trajectory. The cycle is strict: solve needs both planner and
query staged, get_path needs a prior successful solve, and calling out
of order returns a structured error, never undefined behavior. Requests
for distinct sessions run concurrently; requests within one session are
serialized by a per-session lock. Nothing persists across restarts.

Every error, transport or domain, reaches the client as JSON with the
same three fields: code, message, detail. Wall-clock timing never
appears in a response body, so identical solves serialize identically.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .collision import check_config
from .grounding import outcome_document, run_task, trajectory_document
from .metrics import DEFAULT_TASK, run_metrics
from .planner import (
    ALGORITHMS,
    PlannerError,
    PlannerSpec,
    PlanningQuery,
    Trajectory,
    plan,
)
from .scene import SceneError, Workspace
from .sceneio import (
    ParseError,
    directory_loader,
    load_problem_directory,
    parse_problem_file,
)
from .symbolic import (
    DEFAULT_LLM_ENDPOINT,
    HttpLlmClient,
    MockLlmClient,
    PlanError,
    TransportError,
)
from .textualize import textualize

SAMPLE_DT = 0.05  # s between timed interpolation samples in path documents


class ServiceError(Exception):
    """Structured service failure: code, human message, optional detail,
    and the HTTP status it maps to."""

    def __init__(self, code: str, message: str, detail=None, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.detail = detail
        self.status = status

    def body(self) -> dict:
        return {"code": self.code, "message": self.message, "detail": self.detail}


@dataclass
class Session:
    sid: str
    ws: Workspace
    planner: Optional[PlannerSpec] = None
    query: Optional[PlanningQuery] = None
    trajectory: Optional[Trajectory] = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    """In-memory session registry; safe to share across request threads."""

    def __init__(self):
        self._sessions = {}
        self._lock = threading.Lock()

    def create(self, ws: Workspace) -> Session:
        sess = Session(sid=uuid.uuid4().hex[:12], ws=ws)
        with self._lock:
            self._sessions[sess.sid] = sess
        return sess

    def get(self, sid: str) -> Session:
        with self._lock:
            sess = self._sessions.get(sid)
        if sess is None:
            raise ServiceError(
                "unknown_session", f"no session {sid!r}", status=404
            )
        return sess

    def ids(self) -> tuple:
        with self._lock:
            return tuple(self._sessions)


# ------------------------------------------------------------------- loading

def load_problem_payload(payload: dict) -> Workspace:
    """Resolve a problem reference from a request body: either 'problem'
    (a problem root directory, or a problem .xml inside <root>/problems/)
    or 'xml' (inline document, with an optional 'root' for model files)."""
    problem = payload.get("problem")
    xml = payload.get("xml")
    if (problem is None) == (xml is None):
        raise ServiceError(
            "invalid_request",
            "provide exactly one of 'problem' (path) or 'xml' (inline document)",
        )
    try:
        if problem is not None:
            if not isinstance(problem, str):
                raise ServiceError("invalid_request", "'problem' must be a path string")
            path = Path(problem)
            if path.is_dir():
                return load_problem_directory(path, payload.get("name"))
            if path.is_file():
                return load_problem_directory(path.parent.parent, path.stem)
            raise ParseError(f"no such problem path {problem!r}")
        if not isinstance(xml, str):
            raise ServiceError("invalid_request", "'xml' must be a document string")
        root = payload.get("root")
        if root is not None:
            loader = directory_loader(root)
        else:
            def loader(rel: str) -> str:
                raise ParseError(
                    f"inline problem references {rel!r} but no 'root' was given"
                )
        return parse_problem_file(xml, loader)
    except (ParseError, SceneError, PlannerError, OSError) as e:
        raise ServiceError("bad_problem", str(e)) from e


# ---------------------------------------------------------------- cycle ops

def set_planner(sess: Session, payload: dict) -> dict:
    algorithm = payload.get("algorithm")
    params = payload.get("params", {})
    if not isinstance(algorithm, str) or algorithm not in ALGORITHMS:
        raise ServiceError(
            "unknown_algorithm",
            f"unknown planner name {algorithm!r}",
            detail={"known": list(ALGORITHMS)},
        )
    if not isinstance(params, dict):
        raise ServiceError("invalid_parameter", "'params' must be an object")
    try:
        spec = PlannerSpec.from_params(algorithm, params)
    except (PlannerError, TypeError, ValueError) as e:
        raise ServiceError("invalid_parameter", str(e)) from e
    sess.planner = spec  # second set wins
    return {"staged": _spec_dict(spec)}


def _spec_dict(spec: PlannerSpec) -> dict:
    return {
        "algorithm": spec.algorithm,
        **{name: getattr(spec, name) for name in PlannerSpec.PARAM_NAMES},
    }


def _checked_config(sess: Session, label: str, values) -> np.ndarray:
    ws = sess.ws
    if (
        not isinstance(values, (list, tuple))
        or not values
        or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        )
    ):
        raise ServiceError(
            "invalid_query", f"{label} must be a non-empty array of numbers",
            detail={"which": label},
        )
    if len(values) != len(ws.controlled):
        raise ServiceError(
            "invalid_query",
            f"{label} has {len(values)} values for "
            f"{len(ws.controlled)} controlled joints",
            detail={"which": label},
        )
    q = np.asarray(values, dtype=float)
    limits = ws.robot.joint_limits
    for k, idx in enumerate(ws.controlled):
        lo, hi = limits[idx]
        if not lo <= q[k] <= hi:
            name = ws.robot.movable_joints[idx].name
            raise ServiceError(
                "invalid_query",
                f"{label} violates limits of joint {name!r}",
                detail={
                    "which": label, "joint": name,
                    "limits": [lo, hi], "value": float(q[k]),
                },
            )
    report = check_config(ws, ws.full_config(q))
    if report.in_collision:
        raise ServiceError(
            "invalid_query",
            f"{label} configuration is in collision",
            detail={"which": label, "witness": list(report.witness)},
        )
    return q


def set_query(sess: Session, payload: dict) -> dict:
    init = _checked_config(sess, "init", payload.get("init"))
    goal = _checked_config(sess, "goal", payload.get("goal"))
    sess.query = PlanningQuery(init, goal)
    sess.trajectory = None  # a staged query owns the next path
    return {
        "staged": {
            "init": [float(v) for v in init],
            "goal": [float(v) for v in goal],
        }
    }


def _stats_dict(stats) -> dict:
    # wall time stays in-process; serialized stats must be reproducible
    return {
        "iterations": int(stats.iterations),
        "tree_sizes": [int(n) for n in stats.tree_sizes],
    }


def solve(sess: Session) -> dict:
    if sess.planner is None:
        raise ServiceError(
            "planner_not_set", "planner not set; call set_planner first",
            status=409,
        )
    if sess.query is None:
        raise ServiceError(
            "query_not_set", "query not set; call set_query first", status=409
        )
    out = plan(sess.ws, sess.planner, sess.query)
    if isinstance(out, Trajectory):
        sess.trajectory = out
        return {"solved": True, "stats": _stats_dict(out.stats)}
    sess.trajectory = None
    body = {"solved": False, "stats": _stats_dict(out.stats), "kind": out.kind}
    if out.witness is not None:
        body["witness"] = list(out.witness)
    return body


def get_path(sess: Session) -> dict:
    if sess.trajectory is None:
        raise ServiceError(
            "no_path",
            "no path available; stage a query and solve it first",
            status=409,
        )
    doc = trajectory_document(sess.ws, sess.trajectory, SAMPLE_DT)
    doc["stats"] = _stats_dict(sess.trajectory.stats)
    return doc


def state_text(sess: Session) -> dict:
    return {"text": textualize(sess.ws).rendered}


# ----------------------------------------------------------------- pipeline

def build_client(cfg: dict):
    if not isinstance(cfg, dict):
        raise ServiceError("invalid_request", "'client' must be an object")
    kind = cfg.get("kind", "mock")
    if kind == "mock":
        try:
            return MockLlmClient(
                error_rate=float(cfg.get("error_rate", 0.0)),
                seed=int(cfg.get("seed", 0)),
            )
        except (TypeError, ValueError) as e:
            raise ServiceError("invalid_request", str(e)) from e
    if kind == "http":
        return HttpLlmClient(
            endpoint=str(cfg.get("endpoint", DEFAULT_LLM_ENDPOINT)),
            model=str(cfg.get("model", "gpt-4")),
            timeout=float(cfg.get("timeout", 60.0)),
        )
    raise ServiceError(
        "invalid_request", f"unknown client kind {kind!r}",
        detail={"known": ["mock", "http"]},
    )


def run_task_op(sess: Session, payload: dict) -> dict:
    task = payload.get("task")
    if not isinstance(task, str) or not task.strip():
        raise ServiceError("invalid_request", "'task' must be a non-empty string")
    client = build_client(payload.get("client", {"kind": "mock"}))
    max_repairs = payload.get("max_repairs", 3)
    seed = payload.get("seed", 0)
    if isinstance(max_repairs, bool) or not isinstance(max_repairs, int) or max_repairs < 0:
        raise ServiceError("invalid_request", "'max_repairs' must be an integer >= 0")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ServiceError("invalid_request", "'seed' must be an integer")
    try:
        run = run_task(sess.ws, task, client, max_repairs=max_repairs, seed=seed)
    except TransportError as e:
        raise ServiceError("transport_error", str(e), status=502) from e
    if isinstance(run.plan, PlanError):
        # symbolic failure codes pass through untouched
        raise ServiceError(
            run.plan.code, run.plan.message,
            detail={"source": "symbolic", "action": run.plan.index},
            status=422,
        )
    result = run.result
    sess.ws = result.workspace  # the scene advances with whatever executed
    return {
        "task": task,
        "status": result.status,
        "repairs_used": result.repairs_used,
        "error": result.error,
        "plan": {
            "task": run.plan.task,
            "actions": [a.to_dict() for a in run.plan.actions],
        },
        "outcomes": [
            outcome_document(result.workspace, o, SAMPLE_DT)
            for o in result.outcomes
        ],
    }


def run_metrics_op(payload: dict) -> dict:
    ws = load_problem_payload(payload)
    fields = {
        "trials": (payload.get("trials", 20), int),
        "seed": (payload.get("seed", 0), int),
        "error_rate": (payload.get("error_rate", 0.0), float),
        "pose_jitter": (payload.get("pose_jitter", 0.02), float),
    }
    clean = {}
    for name, (value, want) in fields.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ServiceError("invalid_request", f"'{name}' must be a number")
        clean[name] = want(value)
    task = payload.get("task", DEFAULT_TASK)
    symbolic_only = payload.get("symbolic_only", False)
    if not isinstance(task, str) or not task.strip():
        raise ServiceError("invalid_request", "'task' must be a non-empty string")
    if not isinstance(symbolic_only, bool):
        raise ServiceError("invalid_request", "'symbolic_only' must be a boolean")
    try:
        report = run_metrics(ws, task=task, symbolic_only=symbolic_only, **clean)
    except ValueError as e:
        raise ServiceError("invalid_request", str(e)) from e
    return report.to_dict()


# ---------------------------------------------------------------------- app

def create_app(store: Optional[SessionStore] = None):
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse

    app = FastAPI(title="manipkit planning service", docs_url=None, redoc_url=None)
    app.state.store = store if store is not None else SessionStore()

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(exc.body(), status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            {
                "code": "invalid_request",
                "message": "malformed request body",
                "detail": exc.errors(),
            },
            status_code=400,
        )

    def _session(sid: str) -> Session:
        return app.state.store.get(sid)

    @app.post("/session")
    def create_session(payload: dict):
        ws = load_problem_payload(payload)
        sess = app.state.store.create(ws)
        return {"session": sess.sid, "problem": ws.name}

    @app.post("/session/{sid}/planner")
    def planner_endpoint(sid: str, payload: dict):
        sess = _session(sid)
        with sess.lock:
            return set_planner(sess, payload)

    @app.post("/session/{sid}/query")
    def query_endpoint(sid: str, payload: dict):
        sess = _session(sid)
        with sess.lock:
            return set_query(sess, payload)

    @app.post("/session/{sid}/solve")
    def solve_endpoint(sid: str):
        sess = _session(sid)
        with sess.lock:
            return solve(sess)

    @app.get("/session/{sid}/path")
    def path_endpoint(sid: str):
        sess = _session(sid)
        with sess.lock:
            return get_path(sess)

    @app.get("/session/{sid}/state/text")
    def state_endpoint(sid: str):
        sess = _session(sid)
        with sess.lock:
            return state_text(sess)

    @app.post("/session/{sid}/task")
    def task_endpoint(sid: str, payload: dict):
        sess = _session(sid)
        with sess.lock:
            return run_task_op(sess, payload)

    @app.post("/metrics")
    def metrics_endpoint(payload: dict):
        return run_metrics_op(payload)

    return app
