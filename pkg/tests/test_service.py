"""Session service: the staged cycle, its error vocabulary, pipeline routes."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from manipkit.geometry import Pose
from manipkit.kinematics import solve_ik
from manipkit.sceneio import demo_root, load_problem_directory
from manipkit.service import create_app
from manipkit.symbolic import ERROR_CODES

DEMO = str(demo_root())
DEMO_TASK = "Put the marker and eraser in the holder"

# the demo problem file stages this exact query
WS = load_problem_directory(demo_root())
INIT = [float(v) for v in WS.query_init]
GOAL = [float(v) for v in WS.query_goal]


@pytest.fixture
def client():
    return TestClient(create_app())


@pytest.fixture
def sid(client):
    r = client.post("/session", json={"problem": DEMO})
    assert r.status_code == 200
    return r.json()["session"]


def stage_planner(client, sid, algorithm="RRTConnect", **params):
    return client.post(
        f"/session/{sid}/planner", json={"algorithm": algorithm, "params": params}
    )


def stage_query(client, sid, init=None, goal=None):
    return client.post(
        f"/session/{sid}/query",
        json={"init": init or INIT, "goal": goal or GOAL},
    )


def err(response, code, status):
    assert response.status_code == status
    body = response.json()
    assert body["code"] == code
    assert set(body) == {"code", "message", "detail"}
    return body


class TestSessionCreation:
    def test_from_directory(self, client):
        r = client.post("/session", json={"problem": DEMO})
        assert r.status_code == 200
        assert r.json()["problem"] == "pick_place"
        assert len(r.json()["session"]) == 12

    def test_from_problem_file_path(self, client):
        path = demo_root() / "problems" / "pick_place.xml"
        r = client.post("/session", json={"problem": str(path)})
        assert r.status_code == 200
        assert r.json()["problem"] == "pick_place"

    def test_from_inline_xml(self, client):
        text = (demo_root() / "problems" / "pick_place.xml").read_text()
        r = client.post("/session", json={"xml": text, "root": DEMO})
        assert r.status_code == 200

    def test_inline_xml_without_root(self, client):
        text = (demo_root() / "problems" / "pick_place.xml").read_text()
        r = client.post("/session", json={"xml": text})
        body = err(r, "bad_problem", 400)
        assert "no 'root'" in body["message"]

    def test_both_sources_rejected(self, client):
        r = client.post("/session", json={"problem": DEMO, "xml": "<problem/>"})
        err(r, "invalid_request", 400)

    def test_neither_source_rejected(self, client):
        err(client.post("/session", json={}), "invalid_request", 400)

    def test_missing_path(self, client):
        r = client.post("/session", json={"problem": "/nowhere/at/all"})
        err(r, "bad_problem", 400)

    def test_unknown_session(self, client):
        err(client.post("/session/feed5eed/solve"), "unknown_session", 404)

    def test_sessions_isolated(self, client):
        a = client.post("/session", json={"problem": DEMO}).json()["session"]
        b = client.post("/session", json={"problem": DEMO}).json()["session"]
        stage_planner(client, a)
        stage_query(client, a)
        assert client.post(f"/session/{a}/solve").json()["solved"] is True
        err(client.get(f"/session/{b}/path"), "no_path", 409)
        err(client.post(f"/session/{b}/solve"), "planner_not_set", 409)


class TestPlannerStaging:
    def test_stage_with_params(self, client, sid):
        r = stage_planner(client, sid, seed=7)
        assert r.status_code == 200
        staged = r.json()["staged"]
        assert staged["algorithm"] == "RRTConnect"
        assert staged["seed"] == 7
        assert staged["max_iterations"] == 5000

    def test_unknown_algorithm(self, client, sid):
        body = err(stage_planner(client, sid, algorithm="PRM"), "unknown_algorithm", 400)
        assert "PRM" in body["message"]
        assert body["detail"]["known"] == ["RRT", "RRTConnect"]

    def test_unknown_parameter(self, client, sid):
        r = stage_planner(client, sid, herringbone=3)
        err(r, "invalid_parameter", 400)

    def test_out_of_range_parameter(self, client, sid):
        r = stage_planner(client, sid, goal_bias=2.0)
        err(r, "invalid_parameter", 400)

    def test_params_must_be_object(self, client, sid):
        r = client.post(
            f"/session/{sid}/planner",
            json={"algorithm": "RRT", "params": [1, 2]},
        )
        err(r, "invalid_parameter", 400)

    def test_second_spec_wins(self, client, sid):
        stage_planner(client, sid, algorithm="RRT")
        r = stage_planner(client, sid, algorithm="RRTConnect", seed=9)
        assert r.json()["staged"]["algorithm"] == "RRTConnect"
        assert r.json()["staged"]["seed"] == 9


class TestQueryStaging:
    def test_valid_query_echoes(self, client, sid):
        r = stage_query(client, sid)
        assert r.status_code == 200
        assert r.json()["staged"]["init"] == INIT
        assert r.json()["staged"]["goal"] == GOAL

    def test_wrong_arity(self, client, sid):
        body = err(stage_query(client, sid, goal=[0.0, 0.1]), "invalid_query", 400)
        assert body["detail"]["which"] == "goal"
        assert "2 values" in body["message"]

    def test_limit_violation_names_joint(self, client, sid):
        bad = list(INIT)
        bad[0] = 10.0
        body = err(stage_query(client, sid, goal=bad), "invalid_query", 400)
        assert body["detail"]["joint"] == "j1"
        assert "j1" in body["message"]
        assert body["detail"]["value"] == 10.0

    def test_colliding_goal_returns_witness(self, client, sid):
        # tool-down pose inside the holder body: kinematically reachable,
        # but the palm overlaps the holder
        q = solve_ik(
            WS.robot, WS.robot_base_pose,
            Pose((0.45, 0.2, 0.035), (0.0, 1.0, 0.0, 0.0)),
            WS.current_config, rng_seed=0,
        )
        body = err(
            stage_query(client, sid, goal=[float(v) for v in q]),
            "invalid_query", 400,
        )
        assert body["detail"]["which"] == "goal"
        assert body["detail"]["witness"] == ["hand", "holder"]

    def test_numbers_only(self, client, sid):
        bad = list(INIT)
        bad[2] = True
        err(stage_query(client, sid, init=bad), "invalid_query", 400)
        err(stage_query(client, sid, init="zeros"), "invalid_query", 400)

    def test_restaging_clears_previous_path(self, client, sid):
        stage_planner(client, sid)
        stage_query(client, sid)
        client.post(f"/session/{sid}/solve")
        assert client.get(f"/session/{sid}/path").status_code == 200
        stage_query(client, sid)
        err(client.get(f"/session/{sid}/path"), "no_path", 409)


class TestCycleOrder:
    def test_in_order_cycle_succeeds(self, client, sid):
        assert stage_planner(client, sid).status_code == 200
        assert stage_query(client, sid).status_code == 200
        solved = client.post(f"/session/{sid}/solve")
        assert solved.status_code == 200
        assert solved.json()["solved"] is True
        assert solved.json()["stats"]["iterations"] >= 1
        path = client.get(f"/session/{sid}/path")
        assert path.status_code == 200
        doc = path.json()
        assert doc["waypoints"][0] == INIT
        assert "wall" not in str(doc["stats"])

    def test_solve_on_fresh_session(self, client, sid):
        err(client.post(f"/session/{sid}/solve"), "planner_not_set", 409)

    def test_solve_with_only_query(self, client, sid):
        stage_query(client, sid)
        err(client.post(f"/session/{sid}/solve"), "planner_not_set", 409)

    def test_solve_with_only_planner(self, client, sid):
        stage_planner(client, sid)
        err(client.post(f"/session/{sid}/solve"), "query_not_set", 409)

    def test_path_on_fresh_session(self, client, sid):
        err(client.get(f"/session/{sid}/path"), "no_path", 409)

    def test_path_with_only_planner(self, client, sid):
        stage_planner(client, sid)
        err(client.get(f"/session/{sid}/path"), "no_path", 409)

    def test_path_before_solve(self, client, sid):
        stage_planner(client, sid)
        stage_query(client, sid)
        err(client.get(f"/session/{sid}/path"), "no_path", 409)

    def test_path_after_failed_solve(self, client, sid):
        # one RRT extend of 0.1 cannot reach a goal over a radian away
        stage_planner(client, sid, algorithm="RRT", max_iterations=1)
        stage_query(client, sid)
        r = client.post(f"/session/{sid}/solve")
        assert r.status_code == 200
        assert r.json()["solved"] is False
        assert r.json()["kind"] == "timeout"
        err(client.get(f"/session/{sid}/path"), "no_path", 409)

    def test_trivial_query_single_waypoint(self, client, sid):
        stage_planner(client, sid)
        stage_query(client, sid, goal=INIT)
        assert client.post(f"/session/{sid}/solve").json()["solved"] is True
        doc = client.get(f"/session/{sid}/path").json()
        assert len(doc["waypoints"]) == 1

    def test_repeated_path_reads_identical(self, client, sid):
        stage_planner(client, sid)
        stage_query(client, sid)
        client.post(f"/session/{sid}/solve")
        a = client.get(f"/session/{sid}/path")
        b = client.get(f"/session/{sid}/path")
        assert a.text == b.text

    def test_resolve_reproduces_path(self, client, sid):
        stage_planner(client, sid, seed=4)
        stage_query(client, sid)
        client.post(f"/session/{sid}/solve")
        a = client.get(f"/session/{sid}/path").text
        client.post(f"/session/{sid}/solve")
        b = client.get(f"/session/{sid}/path").text
        assert a == b


class TestStateText:
    def test_matches_textualizer(self, client, sid):
        from manipkit.textualize import textualize

        r = client.get(f"/session/{sid}/state/text")
        assert r.status_code == 200
        assert r.json()["text"] == textualize(WS).rendered

    def test_names_present(self, client, sid):
        text = client.get(f"/session/{sid}/state/text").json()["text"]
        for name in ("arm7", "marker", "eraser", "holder"):
            assert name in text


class TestTaskEndpoint:
    def test_demo_task_succeeds(self, client, sid):
        r = client.post(
            f"/session/{sid}/task",
            json={"task": DEMO_TASK, "client": {"kind": "mock", "seed": 3}},
        )
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "success"
        assert body["error"] is None
        assert len(body["plan"]["actions"]) == 4
        assert [o["status"] for o in body["outcomes"]] == ["success"] * 4
        assert all(len(o["trajectories"]) == 3 for o in body["outcomes"])

    def test_scene_advances_after_task(self, client, sid):
        client.post(f"/session/{sid}/task", json={"task": DEMO_TASK})
        text = client.get(f"/session/{sid}/state/text").json()["text"]
        assert "on(marker, holder)" in text

    def test_refusal_surfaces_plan_error(self, client, sid):
        r = client.post(f"/session/{sid}/task", json={"task": "juggle the marker"})
        body = err(r, "missing_argument", 422)
        assert "refus" in body["message"]
        assert body["detail"]["source"] == "symbolic"

    def test_fault_codes_pass_through(self, client, sid):
        r = client.post(
            f"/session/{sid}/task",
            json={
                "task": DEMO_TASK,
                "client": {"kind": "mock", "error_rate": 1.0, "seed": 0},
                "max_repairs": 0,
            },
        )
        assert r.status_code == 422
        assert r.json()["code"] in ERROR_CODES

    def test_unreachable_endpoint_is_transport_error(self, client, sid):
        r = client.post(
            f"/session/{sid}/task",
            json={
                "task": DEMO_TASK,
                "client": {
                    "kind": "http",
                    "endpoint": "http://127.0.0.1:9/v1/chat/completions",
                    "timeout": 1.0,
                },
            },
        )
        err(r, "transport_error", 502)

    def test_unknown_client_kind(self, client, sid):
        r = client.post(
            f"/session/{sid}/task",
            json={"task": DEMO_TASK, "client": {"kind": "carrier_pigeon"}},
        )
        err(r, "invalid_request", 400)

    def test_task_required(self, client, sid):
        err(client.post(f"/session/{sid}/task", json={}), "invalid_request", 400)
        r = client.post(f"/session/{sid}/task", json={"task": "   "})
        err(r, "invalid_request", 400)

    def test_bad_budget_rejected(self, client, sid):
        r = client.post(
            f"/session/{sid}/task", json={"task": DEMO_TASK, "max_repairs": -1}
        )
        err(r, "invalid_request", 400)


class TestMetricsEndpoint:
    def test_symbolic_batch(self, client):
        r = client.post(
            "/metrics",
            json={
                "problem": DEMO, "trials": 30, "seed": 0,
                "error_rate": 0.0, "symbolic_only": True,
            },
        )
        assert r.status_code == 200
        body = r.json()
        assert body["rates"]["symbolic_accuracy"] == 1.0
        assert len(body["records"]) == 30

    def test_full_trial(self, client):
        r = client.post(
            "/metrics",
            json={"problem": DEMO, "trials": 1, "seed": 0, "pose_jitter": 0.02},
        )
        assert r.status_code == 200
        assert r.json()["rates"]["task_success"] == 1.0

    def test_deterministic_reports(self, client):
        body = {
            "problem": DEMO, "trials": 5, "seed": 8,
            "error_rate": 0.3, "symbolic_only": True,
        }
        assert client.post("/metrics", json=body).text == client.post(
            "/metrics", json=body
        ).text

    def test_bad_trial_count(self, client):
        r = client.post("/metrics", json={"problem": DEMO, "trials": 0})
        err(r, "invalid_request", 400)

    def test_unloadable_problem(self, client):
        r = client.post("/metrics", json={"problem": "/nowhere", "trials": 1})
        err(r, "bad_problem", 400)

    def test_non_numeric_field(self, client):
        r = client.post("/metrics", json={"problem": DEMO, "trials": "many"})
        err(r, "invalid_request", 400)


class TestRequestShape:
    def test_malformed_body(self, client):
        r = client.post(
            "/session", content=b"not json",
            headers={"content-type": "application/json"},
        )
        body = err(r, "invalid_request", 400)
        assert body["message"] == "malformed request body"
