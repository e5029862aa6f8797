"""Symbolic task planning: prompt assembly, plan JSON validation, and the
LLM clients (HTTP chat-completion plus a deterministic mock).

A plan is a JSON document with a "task" echo and an "actions" array; each
action instantiates one grammar element a(o, p, r, kappa):

    {"action": "pick", "object": "marker", "approach": "top",
     "planner": "RRTConnect"}

parse_plan validates structure and semantics against a workspace and
returns either a Plan or a PlanError carrying the error class, offending
action index, and message. request_plan drives the repair loop: rejected
responses are re-prompted with the structured error appended until the
plan parses or the repair budget runs out.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import requests

from .geometry import Pose, quat_normalize
from .scene import Workspace
from .textualize import StateText

ACTION_KINDS = ("pick", "place", "move", "push")
APPROACHES = ("top", "side_x+", "side_x-", "side_y+", "side_y-")
PLANNER_NAMES = ("RRT", "RRTConnect")
DEFAULT_PLANNER = "RRTConnect"

ERROR_CODES = (
    "malformed_json",
    "missing_argument",
    "unknown_object",
    "unknown_action",
    "unknown_planner",
    "inconsistent_order",
)

# mock placement geometry: objects go above the destination with a small
# hover and a per-object stacking offset
MOCK_PLACE_CLEARANCE = 0.004
MOCK_STACK_DZ = 0.15

DEFAULT_LLM_ENDPOINT = "http://localhost:8080/v1/chat/completions"
LLM_KEY_ENV = "LANG2MANIP_LLM_KEY"


class TransportError(RuntimeError):
    """LLM endpoint unreachable or returned a non-plan payload; distinct
    from plan validation failures."""


@dataclass(frozen=True)
class PlanError:
    code: str
    message: str
    index: Optional[int] = None  # offending action, None for document level

    def __post_init__(self):
        if self.code not in ERROR_CODES:
            raise ValueError(f"unknown error code {self.code!r}")

    def describe(self) -> str:
        where = "document" if self.index is None else f"action {self.index}"
        return f"{self.code} at {where}: {self.message}"


@dataclass(frozen=True)
class SymbolicAction:
    kind: str
    object: Optional[str] = None
    target_pose: Optional[Pose] = None
    waypoint: Optional[tuple] = None
    approach: Optional[str] = None
    direction: Optional[tuple] = None
    distance: Optional[float] = None
    planner: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"action": self.kind}
        if self.object is not None:
            out["object"] = self.object
        if self.target_pose is not None:
            out["target_pose"] = [
                *(float(v) for v in self.target_pose.position),
                *(float(v) for v in self.target_pose.orientation),
            ]
        if self.waypoint is not None:
            out["waypoint"] = list(self.waypoint)
        if self.approach is not None:
            out["approach"] = self.approach
        if self.direction is not None:
            out["direction"] = list(self.direction)
        if self.distance is not None:
            out["distance"] = self.distance
        if self.planner is not None:
            out["planner"] = self.planner
        return out


@dataclass(frozen=True)
class Plan:
    task: str
    actions: tuple
    source: str = "llm"
    raw: str = ""

    def to_json(self) -> str:
        doc = {
            "task": self.task,
            "actions": [a.to_dict() for a in self.actions],
        }
        return json.dumps(doc, indent=1)


@dataclass(frozen=True)
class PromptBundle:
    """The three prompt parts, concatenated system -> state -> task."""

    system: str
    state: str
    task: str

    def __post_init__(self):
        for name in ("system", "state", "task"):
            if not getattr(self, name).strip():
                raise ValueError(f"empty {name} section")

    @property
    def rendered(self) -> str:
        return (
            f"[system]\n{self.system.rstrip()}\n\n"
            f"[state]\n{self.state.rstrip()}\n\n"
            f"[task]\n{self.task.strip()}\n"
        )


def system_prompt() -> str:
    """The versioned system prompt shipped with the package."""
    return (Path(__file__).parent / "assets" / "system_prompt_v1.txt").read_text()


def compose_prompt(
    task: str, system_template: Optional[str] = None, state: Union[StateText, str] = ""
) -> PromptBundle:
    """Assemble the planning prompt. Pure function: identical inputs give
    byte-identical bundles."""
    if not task or not task.strip():
        raise ValueError("empty task")
    rendered_state = state.rendered if isinstance(state, StateText) else state
    return PromptBundle(
        system=system_template if system_template is not None else system_prompt(),
        state=rendered_state,
        task=task,
    )


# ------------------------------------------------------------- validation

def _num_list(value, n: int) -> Optional[tuple]:
    if not isinstance(value, (list, tuple)) or len(value) != n:
        return None
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return None
        out.append(float(v))
    return tuple(out)


_ACTION_KEYS = {
    "action", "object", "target_pose", "waypoint",
    "approach", "direction", "distance", "planner",
}


def _parse_action(entry, i: int, ws: Workspace) -> Union[SymbolicAction, PlanError]:
    if not isinstance(entry, dict):
        return PlanError("malformed_json", "action entry is not an object", i)
    unknown = set(entry) - _ACTION_KEYS
    if unknown:
        return PlanError(
            "malformed_json", f"unexpected key {sorted(unknown)[0]!r}", i
        )
    kind = entry.get("action")
    if kind is None:
        return PlanError("missing_argument", "missing 'action'", i)
    if kind not in ACTION_KINDS:
        return PlanError("unknown_action", f"unknown action {kind!r}", i)

    def need(key):
        value = entry.get(key)
        if value is None:
            return None, PlanError(
                "missing_argument", f"{kind} requires {key!r}", i
            )
        return value, None

    obj = target_pose = waypoint = approach = direction = distance = None
    if kind in ("pick", "place", "push"):
        obj, err = need("object")
        if err:
            return err
        if not isinstance(obj, str):
            return PlanError("missing_argument", "'object' must be a string", i)
        if not ws.has_obstacle(obj):
            return PlanError("unknown_object", f"no obstacle named {obj!r}", i)
    if kind == "place":
        raw_pose, err = need("target_pose")
        if err:
            return err
        vals = _num_list(raw_pose, 7)
        if vals is None:
            return PlanError(
                "missing_argument", "'target_pose' must be 7 numbers", i
            )
        try:
            quat = quat_normalize(vals[3:], warn=False)
        except ValueError:
            return PlanError(
                "missing_argument", "'target_pose' quaternion is zero", i
            )
        target_pose = Pose(vals[:3], quat)
    if kind == "move":
        raw_wp, err = need("waypoint")
        if err:
            return err
        waypoint = _num_list(raw_wp, 3)
        if waypoint is None:
            return PlanError(
                "missing_argument", "'waypoint' must be 3 numbers", i
            )
    if kind == "push":
        raw_dir, err = need("direction")
        if err:
            return err
        direction = _num_list(raw_dir, 3)
        if direction is None or not np.linalg.norm(direction) > 0:
            return PlanError(
                "missing_argument", "'direction' must be 3 numbers, not all zero", i
            )
        distance, err = need("distance")
        if err:
            return err
        if (
            isinstance(distance, bool)
            or not isinstance(distance, (int, float))
            or not distance > 0
        ):
            return PlanError(
                "missing_argument", "'distance' must be a positive number", i
            )
        distance = float(distance)
    approach = entry.get("approach")
    if approach is not None and approach not in APPROACHES:
        return PlanError(
            "missing_argument",
            f"unknown approach {approach!r}; expected one of {', '.join(APPROACHES)}",
            i,
        )
    planner = entry.get("planner")
    if planner is not None and planner not in PLANNER_NAMES:
        return PlanError("unknown_planner", f"unknown planner {planner!r}", i)
    return SymbolicAction(
        kind=kind, object=obj, target_pose=target_pose, waypoint=waypoint,
        approach=approach, direction=direction, distance=distance,
        planner=planner,
    )


def parse_plan(
    response: str, ws: Workspace, source: str = "llm"
) -> Union[Plan, PlanError]:
    """Strict parse of an LLM response into a validated Plan.

    Structure: JSON object with a string "task" and nonempty "actions"
    array in the documented schema. Semantics: object names resolve in
    the workspace, pick is never issued while something is held, place
    follows a pick of the same object, planner names are known.
    """
    try:
        doc = json.loads(response)
    except (json.JSONDecodeError, TypeError) as exc:
        return PlanError("malformed_json", str(exc))
    if not isinstance(doc, dict):
        return PlanError("malformed_json", "top level is not an object")
    unknown = set(doc) - {"task", "actions", "refusal"}
    if unknown:
        return PlanError(
            "malformed_json", f"unexpected key {sorted(unknown)[0]!r}"
        )
    if isinstance(doc.get("refusal"), str):
        return PlanError(
            "missing_argument", f"model refused: {doc['refusal']}"
        )
    task = doc.get("task")
    if not isinstance(task, str):
        return PlanError("missing_argument", "missing 'task'")
    raw_actions = doc.get("actions")
    if not isinstance(raw_actions, list) or not raw_actions:
        return PlanError("missing_argument", "plan has no actions")

    actions = []
    attached = ws.attached_obstacle()
    held = attached.name if attached is not None else None
    for i, entry in enumerate(raw_actions):
        action = _parse_action(entry, i, ws)
        if isinstance(action, PlanError):
            return action
        if action.kind == "pick":
            if held == action.object:
                return PlanError(
                    "inconsistent_order",
                    f"{action.object!r} is already held", i,
                )
            if held is not None:
                return PlanError(
                    "inconsistent_order",
                    f"cannot pick while holding {held!r}", i,
                )
            held = action.object
        elif action.kind == "place":
            if held != action.object:
                return PlanError(
                    "inconsistent_order",
                    f"place of {action.object!r} without a prior pick", i,
                )
            held = None
        actions.append(action)
    return Plan(task=task, actions=tuple(actions), source=source, raw=response)


# ------------------------------------------------------------ mock client

_TASK_PATTERN = re.compile(
    r"^\s*put\s+the\s+(?P<objs>.+?)\s+(?:in|on)\s+the\s+(?P<dest>\w+)\s*[.!]?\s*$",
    re.IGNORECASE,
)
_STATE_LINE = re.compile(
    r"^  (?P<name>\w+) \| graspable=(?P<graspable>true|false)"
    r"(?: \| held=true)?"
    r" \| position=\((?P<pos>[^)]*)\)"
    r"(?: \| orientation=\([^)]*\))?"
    r" \| bbox=\((?P<bbox>[^)]*)\)$"
)


def _state_objects(state_text: str) -> dict:
    out = {}
    for line in state_text.splitlines():
        m = _STATE_LINE.match(line)
        if m:
            out[m["name"]] = {
                "position": tuple(float(v) for v in m["pos"].split(", ")),
                "bbox": tuple(float(v) for v in m["bbox"].split(", ")),
                "graspable": m["graspable"] == "true",
            }
    return out


def task_template(task: str) -> Optional[tuple]:
    """Decompose a "put the X [and Y ...] in/on the Z" task into
    (object phrases, destination). None when the task has another shape."""
    m = _TASK_PATTERN.match(task)
    if not m:
        return None
    names = [
        n.strip() for n in re.split(r",\s*|\s+and\s+", m["objs"]) if n.strip()
    ]
    names = [n[4:] if n.lower().startswith("the ") else n for n in names]
    return names, m["dest"]


def _refusal(task: str, reason: str) -> str:
    return json.dumps({"task": task, "refusal": reason})


def _misspell(name: str, known) -> str:
    out = name[:-2] + name[-1] + name[-2] if len(name) > 1 else name + "x"
    while out in known:
        out += "q"
    return out


def mock_llm_plan(
    task: str,
    state: Union[StateText, str],
    error_rate: float = 0.0,
    seed: int = 0,
) -> str:
    """Deterministic LLM stand-in.

    Tasks of the form "put the X [and Y ...] in/on the Z" yield a pick/
    place pair per object: top grasps, placements stacked above Z at
    increasing heights, planner RRTConnect. Anything else gets a
    structured refusal. With probability error_rate the response carries
    exactly one fault (dropped argument, swapped pick/place, misspelled
    object, or truncated JSON), chosen uniformly.
    """
    if not 0.0 <= error_rate <= 1.0:
        raise ValueError("error_rate must be within [0, 1]")
    text = state.rendered if isinstance(state, StateText) else state
    objects = _state_objects(text)
    template = task_template(task)
    if template is None:
        return _refusal(task, "task does not match 'put the X in the Z'")
    names, dest = template
    # the task phrasing is case-insensitive, workspace names are not
    lookup = {k.lower(): k for k in objects}
    missing = [n for n in names + [dest] if n.lower() not in lookup]
    if missing:
        return _refusal(task, f"no object named {missing[0]!r} in the workspace")
    names = [lookup[n.lower()] for n in names]
    dest = lookup[dest.lower()]

    dx, dy, _ = objects[dest]["position"]
    dest_top = objects[dest]["position"][2] + objects[dest]["bbox"][2] / 2
    actions = []
    for i, name in enumerate(names):
        half_height = objects[name]["bbox"][2] / 2
        z = dest_top + half_height + MOCK_PLACE_CLEARANCE + i * MOCK_STACK_DZ
        actions.append(
            {
                "action": "pick", "object": name,
                "approach": "top", "planner": DEFAULT_PLANNER,
            }
        )
        actions.append(
            {
                "action": "place", "object": name,
                "target_pose": [dx, dy, round(z, 6), 0.0, 0.0, 0.0, 1.0],
                "planner": DEFAULT_PLANNER,
            }
        )
    doc = {"task": task, "actions": actions}

    rng = np.random.default_rng(seed)
    inject = rng.random() < error_rate
    fault = int(rng.integers(4))  # drawn either way to keep the stream aligned
    if inject:
        if fault == 0:
            del actions[0]["object"]
        elif fault == 1:
            actions[0], actions[1] = actions[1], actions[0]
        elif fault == 2:
            actions[0]["object"] = _misspell(names[0], objects)
        else:
            text = json.dumps(doc)
            return text[: max(1, int(len(text) * 0.6))]
    return json.dumps(doc)


class MockLlmClient:
    """Deterministic in-process client. Each call derives its own seed
    from the base seed, so repair attempts draw fresh faults while the
    whole sequence stays reproducible."""

    def __init__(self, error_rate: float = 0.0, seed: int = 0):
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError("error_rate must be within [0, 1]")
        self.error_rate = error_rate
        self.seed = seed
        self._calls = 0

    @staticmethod
    def _split_prompt(prompt: str):
        m = re.search(
            r"\[state\]\n(?P<state>.*?)\n\n\[task\]\n(?P<task>[^\n]*)",
            prompt, re.DOTALL,
        )
        if not m:
            raise ValueError("prompt lacks [state]/[task] sections")
        return m["state"], m["task"]

    def complete(self, prompt: str) -> str:
        state, task = self._split_prompt(prompt)
        call_seed = np.random.SeedSequence([self.seed, self._calls])
        self._calls += 1
        return mock_llm_plan(
            task, state, self.error_rate,
            seed=call_seed.generate_state(1)[0],
        )


class HttpLlmClient:
    """Chat-completion client. Credential comes from the environment
    (LANG2MANIP_LLM_KEY); endpoint and model are constructor arguments."""

    def __init__(
        self,
        endpoint: str = DEFAULT_LLM_ENDPOINT,
        model: str = "gpt-4",
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(LLM_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            resp = requests.post(
                self.endpoint, json=body, headers=headers, timeout=self.timeout
            )
            resp.raise_for_status()
            payload = resp.json()
            return payload["choices"][0]["message"]["content"]
        except requests.RequestException as exc:
            raise TransportError(f"LLM endpoint failure: {exc}") from exc
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed LLM response envelope: {exc}") from exc


def _repair_prompt(bundle: PromptBundle, error_text: str, raw: str) -> str:
    prompt = bundle.rendered + (
        f"\n[repair]\nThe previous plan was rejected: {error_text}\n"
    )
    if raw:
        prompt += f"Previous response:\n{raw.strip()}\n"
    return prompt + "Return a corrected JSON plan.\n"


def request_plan(
    client,
    bundle: PromptBundle,
    ws: Workspace,
    max_repairs: int = 3,
    feedback: Optional[str] = None,
) -> Union[Plan, PlanError]:
    """Call the client and validate; on rejection, re-prompt with the
    structured error appended, up to max_repairs extra attempts.

    feedback seeds the first attempt with an external failure report
    (e.g. a grounding error from the executor), so the model starts from
    a repair prompt rather than the bare bundle. Transport failures
    raise; validation failures return the final PlanError.
    """
    if max_repairs < 0:
        raise ValueError("max_repairs must be >= 0")
    source = "mock" if isinstance(client, MockLlmClient) else "llm"
    prompt = (
        bundle.rendered if feedback is None
        else _repair_prompt(bundle, feedback, "")
    )
    result = None
    for attempt in range(max_repairs + 1):
        response = client.complete(prompt)
        result = parse_plan(response, ws, source=source)
        if isinstance(result, Plan):
            return result
        prompt = _repair_prompt(bundle, result.describe(), response)
    return result
