"""Grasp computation, per-action grounding, and plan execution."""

import json
from dataclasses import replace

import numpy as np
import pytest

from manipkit.collision import check_edge
from manipkit.geometry import Pose, quat_rotate
from manipkit.grounding import (
    PREGRASP_CLEARANCE,
    PUSH_STANDOFF,
    ActionOutcome,
    ExecutionResult,
    GraspError,
    GraspPose,
    compute_grasp,
    execute_plan,
    execution_document,
    ground_action,
    outcome_document,
    trajectory_document,
)
from manipkit.kinematics import IkFailure, fk_ee
from manipkit.planner import PlanFailure
from manipkit.scene import Obstacle, ShapePrimitive, attach_object
from manipkit.sceneio import demo_root, load_problem_directory
from manipkit.symbolic import (
    MockLlmClient,
    SymbolicAction,
    compose_prompt,
    parse_plan,
    request_plan,
)
from manipkit.textualize import textualize

DEMO_TASK = "Put the marker and eraser in the holder"


@pytest.fixture()
def ws():
    return load_problem_directory(demo_root())


def action(kind, **kw):
    return SymbolicAction(kind=kind, **kw)


def add_box(ws, name, center, half, graspable=False):
    obs = Obstacle(
        name=name,
        shape=ShapePrimitive.box(*half),
        pose=Pose(center),
        graspable=graspable,
    )
    return replace(ws, obstacles=ws.obstacles + (obs,))


class ScriptedClient:
    def __init__(self, responses):
        self.responses = list(responses)
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        return self.responses.pop(0)


class TestComputeGrasp:
    def test_marker_top_grasp(self, ws):
        # capsule r=0.01 hl=0.05 standing at z=0.065: AABB top 0.125,
        # finger reach 0.05 < half height 0.06
        g = compute_grasp(ws, "marker", "top")
        assert np.allclose(g.grasp.position, [0.5, 0.0, 0.125 - 0.05])
        assert np.allclose(g.pregrasp.position, [0.5, 0.0, 0.075 + 0.08])
        assert np.allclose(g.approach, [0, 0, -1])

    def test_top_grip_recess_clamps_at_half_height(self, ws):
        # eraser half height 0.015 < finger reach: grip at the center
        g = compute_grasp(ws, "eraser", "top")
        assert np.allclose(g.grasp.position, [0.55, -0.15, 0.02])

    def test_tool_axes_follow_approach(self, ws):
        for name in ("top", "side_x+", "side_x-", "side_y+", "side_y-"):
            g = compute_grasp(ws, "eraser", name)
            tool_z = quat_rotate(g.grasp.orientation, [0, 0, 1])
            assert np.allclose(tool_z, g.approach, atol=1e-12), name
            # fingers close across a horizontal axis perpendicular to it
            tool_y = quat_rotate(g.grasp.orientation, [0, 1, 0])
            assert abs(tool_y[2]) < 1e-12, name
            assert abs(np.dot(tool_y, g.approach)) < 1e-12, name

    def test_top_grip_axis_prefers_shorter_extent(self, ws):
        # eraser AABB is 0.06 x 0.04: fingers close across y
        g = compute_grasp(ws, "eraser", "top")
        tool_y = quat_rotate(g.grasp.orientation, [0, 1, 0])
        assert np.allclose(np.abs(tool_y), [0, 1, 0], atol=1e-12)

    def test_side_grasp_recessed_into_face(self, ws):
        # +x face at 0.58, recess min(reach, half extent) = 0.03
        g = compute_grasp(ws, "eraser", "side_x+")
        assert np.allclose(g.grasp.position, [0.55, -0.15, 0.02])
        assert np.allclose(g.pregrasp.position, [0.63, -0.15, 0.02])
        # across y the recess clamps at the half extent: the grip point
        # lands on the AABB center
        g = compute_grasp(ws, "eraser", "side_y-")
        assert np.allclose(g.grasp.position, [0.55, -0.15, 0.02])
        assert np.allclose(g.pregrasp.position, [0.55, -0.23, 0.02])

    def test_custom_clearance(self, ws):
        g = compute_grasp(ws, "marker", "top", clearance=0.2)
        assert np.allclose(g.pregrasp.position, [0.5, 0.0, 0.075 + 0.2])
        with pytest.raises(ValueError, match="clearance"):
            compute_grasp(ws, "marker", "top", clearance=0.0)

    def test_too_wide(self, ws):
        wide = add_box(ws, "plank", (0.5, 0.3, 0.05), (0.06, 0.05, 0.02),
                       graspable=True)
        with pytest.raises(GraspError) as exc:
            compute_grasp(wide, "plank", "top")
        assert exc.value.code == "too_wide"
        # across x the plank is even wider
        with pytest.raises(GraspError):
            compute_grasp(wide, "plank", "side_y+")

    def test_not_graspable(self, ws):
        with pytest.raises(GraspError) as exc:
            compute_grasp(ws, "holder", "top")
        assert exc.value.code == "not_graspable"

    def test_unknown_object(self, ws):
        with pytest.raises(GraspError) as exc:
            compute_grasp(ws, "stapler", "top")
        assert exc.value.code == "unknown_object"

    def test_unknown_approach(self, ws):
        with pytest.raises(ValueError, match="approach"):
            compute_grasp(ws, "marker", "under")

    def test_grasp_against_wall_collides(self, ws):
        # wall flush against the marker's +x side; approaching from
        # that side puts the palm inside the wall
        walled = add_box(ws, "wall", (0.56, 0.0, 0.2), (0.04, 0.2, 0.2))
        with pytest.raises(GraspError) as exc:
            compute_grasp(walled, "marker", "side_x+")
        err = exc.value
        assert err.code == "grasp_in_collision"
        assert err.witness == ("hand", "wall")
        # the unobstructed side still works
        g = compute_grasp(walled, "marker", "side_x-")
        assert np.allclose(g.approach, [1, 0, 0])

    def test_grasp_pose_invariant(self):
        down = np.array([0.0, 0.0, -1.0])
        grasp = Pose((0.5, 0.0, 0.1))
        with pytest.raises(ValueError, match="behind the grasp"):
            GraspPose(grasp=grasp,
                      pregrasp=Pose((0.5, 0.0, 0.02)), approach=down)


def assert_chained(trajectories):
    # consecutive trajectories hand over without config jumps
    for prev, nxt in zip(trajectories, trajectories[1:]):
        assert np.allclose(prev.waypoints[-1], nxt.waypoints[0], atol=1e-12)


class TestGroundPick:
    def test_demo_pick_marker(self, ws):
        out, ws2 = ground_action(ws, action("pick", object="marker"), seed=3)
        assert out.status == "success"
        assert len(out.trajectories) == 3
        assert_chained(out.trajectories)
        held = ws2.attached_obstacle()
        assert held is not None and held.name == "marker"
        # the object did not jump at the attach instant
        ee = fk_ee(ws2.robot, ws2.robot_base_pose,
                   ws2.full_config(out.trajectories[1].waypoints[-1]))
        derived = ee * held.attached
        assert ws.obstacle("marker").pose.allclose(derived, tol=1e-9)
        # workspace config advanced to the retreat endpoint
        assert np.allclose(ws2.controlled_config(),
                           out.trajectories[2].waypoints[-1])

    def test_pick_ends_at_pregrasp(self, ws):
        out, ws2 = ground_action(ws, action("pick", object="marker"), seed=3)
        ee = fk_ee(ws2.robot, ws2.robot_base_pose, ws2.current_config)
        g = compute_grasp(ws, "marker", "top")
        assert np.linalg.norm(ee.position - g.pregrasp.position) < 2e-4

    def test_side_pick(self, ws):
        # desk-level objects cannot be side-picked (the palm would dip
        # below the floor), so the fixture block sits raised
        raised = add_box(ws, "block", (0.35, 0.05, 0.2), (0.02, 0.02, 0.02),
                         graspable=True)
        out, ws2 = ground_action(
            raised, action("pick", object="block", approach="side_y+"),
            seed=11)
        assert out.status == "success", out.detail
        assert ws2.attached_obstacle().name == "block"

    def test_unreachable_object_rolls_back(self, ws):
        far = ws.with_obstacle(
            replace(ws.obstacle("marker"), pose=Pose((3.0, 0.0, 0.065))))
        out, ws2 = ground_action(far, action("pick", object="marker"), seed=0)
        assert out.status == "ik_failed"
        assert isinstance(out.detail, IkFailure)
        assert out.trajectories == ()
        assert ws2 is far
        assert ws2.attached_obstacle() is None

    def test_not_graspable_reports_grasp_failed(self, ws):
        out, ws2 = ground_action(ws, action("pick", object="holder"), seed=0)
        assert out.status == "grasp_failed"
        assert isinstance(out.detail, GraspError)
        assert ws2 is ws

    def test_index_passthrough(self, ws):
        out, _ = ground_action(ws, action("pick", object="holder"), index=7)
        assert out.index == 7
        assert "action 7" in out.describe()


class TestGroundPlace:
    def pick(self, ws, name="marker", seed=3):
        out, ws2 = ground_action(ws, action("pick", object=name), seed=seed)
        assert out.status == "success"
        return ws2

    def test_place_reaches_target(self, ws):
        held = self.pick(ws)
        target = Pose((0.45, 0.2, 0.13))
        out, ws2 = ground_action(
            held, action("place", object="marker", target_pose=target), seed=5)
        assert out.status == "success"
        assert len(out.trajectories) == 3
        assert_chained(out.trajectories)
        assert ws2.attached_obstacle() is None
        placed = ws2.obstacle("marker")
        assert np.linalg.norm(placed.pose.position - target.position) < 2e-4

    def test_place_without_holding(self, ws):
        with pytest.raises(ValueError, match="not the held object"):
            ground_action(ws, action(
                "place", object="marker", target_pose=Pose((0.4, 0, 0.2))))

    def test_place_of_wrong_object(self, ws):
        held = self.pick(ws)
        with pytest.raises(ValueError, match="not the held object"):
            ground_action(held, action(
                "place", object="eraser", target_pose=Pose((0.4, 0, 0.2))))

    def test_place_inside_obstacle_rolls_back(self, ws):
        held = self.pick(ws)
        # target pose buries the marker in the holder body
        out, ws2 = ground_action(
            held,
            action("place", object="marker",
                   target_pose=Pose((0.45, 0.2, 0.035))),
            seed=5)
        assert out.status in ("ik_failed", "plan_failed")
        assert ws2 is held
        assert ws2.attached_obstacle().name == "marker"


class TestGroundMove:
    def test_move_to_free_waypoint(self, ws):
        before = fk_ee(ws.robot, ws.robot_base_pose, ws.current_config)
        out, ws2 = ground_action(
            ws, action("move", waypoint=(0.35, -0.1, 0.4)), seed=2)
        assert out.status == "success"
        assert len(out.trajectories) == 1
        after = fk_ee(ws2.robot, ws2.robot_base_pose, ws2.current_config)
        assert np.linalg.norm(after.position - [0.35, -0.1, 0.4]) < 2e-4
        # orientation is carried over, not re-chosen
        assert after.allclose(Pose((0.35, -0.1, 0.4), before.orientation),
                              tol=2e-3)

    def test_move_to_current_pose_is_degenerate(self, ws):
        here = fk_ee(ws.robot, ws.robot_base_pose, ws.current_config)
        out, ws2 = ground_action(
            ws, action("move", waypoint=tuple(here.position)), seed=2)
        assert out.status == "success"
        assert len(out.trajectories) == 1
        assert len(out.trajectories[0].waypoints) == 1
        assert np.allclose(ws2.current_config, ws.current_config)

    def test_move_unreachable(self, ws):
        out, ws2 = ground_action(
            ws, action("move", waypoint=(4.0, 0.0, 0.3)), seed=2)
        assert out.status == "ik_failed"
        assert ws2 is ws


class TestGroundPush:
    def test_push_translates_object(self, ws):
        out, ws2 = ground_action(
            ws,
            action("push", object="eraser", direction=(1.0, 0.0, 0.0),
                   distance=0.05),
            seed=4)
        assert out.status == "success"
        assert len(out.trajectories) == 2
        assert_chained(out.trajectories)
        moved = ws2.obstacle("eraser")
        assert np.allclose(moved.pose.position, [0.60, -0.15, 0.02])
        assert moved.pose.allclose(
            Pose([0.60, -0.15, 0.02], ws.obstacle("eraser").pose.orientation))
        # 0.05 m at <= 0.01 m per step: five tracked steps
        assert len(out.trajectories[1].waypoints) == 6

    def test_push_starts_at_standoff(self, ws):
        out, ws2 = ground_action(
            ws,
            action("push", object="eraser", direction=(1.0, 0.0, 0.0),
                   distance=0.05),
            seed=4)
        start = ws.full_config(out.trajectories[1].waypoints[0])
        ee = fk_ee(ws.robot, ws.robot_base_pose, start)
        # eraser +x half extent 0.03 plus the standoff
        expected = np.array([0.55 - 0.03 - PUSH_STANDOFF, -0.15, 0.02])
        assert np.linalg.norm(ee.position - expected) < 2e-4

    def test_push_direction_is_normalized(self, ws):
        out, ws2 = ground_action(
            ws,
            action("push", object="eraser", direction=(2.0, 0.0, 0.0),
                   distance=0.04),
            seed=4)
        assert out.status == "success"
        assert np.allclose(ws2.obstacle("eraser").pose.position,
                           [0.59, -0.15, 0.02])

    def test_push_into_wall_rolls_back(self, ws):
        walled = add_box(ws, "wall", (0.64, -0.15, 0.1), (0.01, 0.1, 0.1))
        out, ws2 = ground_action(
            walled,
            action("push", object="eraser", direction=(1.0, 0.0, 0.0),
                   distance=0.15),
            seed=4)
        assert out.status in ("plan_failed", "ik_failed")
        assert ws2 is walled
        assert np.allclose(ws2.obstacle("eraser").pose.position,
                           [0.55, -0.15, 0.02])

    def test_push_held_object_rejected(self, ws):
        held = attach_object(ws, "marker", Pose((0, 0, -0.05)))
        with pytest.raises(ValueError, match="holding"):
            ground_action(held, action(
                "push", object="marker", direction=(1, 0, 0), distance=0.05))


class TestStageCollisionModel:
    def stage_workspaces(self, ws, ws_after, obj):
        # pick stages: full scene, target permeable, target attached
        no_obj = replace(
            ws, obstacles=tuple(o for o in ws.obstacles if o.name != obj))
        attached = ws_after
        return no_obj, attached

    def test_pick_trajectories_revalidate(self, ws):
        out, ws2 = ground_action(ws, action("pick", object="marker"), seed=3)
        approach, descend, retreat = out.trajectories
        no_marker, attached = self.stage_workspaces(ws, ws2, "marker")
        resolution = ws.active_planner.edge_resolution / 2
        for traj, stage in ((approach, ws), (descend, no_marker),
                            (retreat, attached)):
            for a, b in zip(traj.waypoints, traj.waypoints[1:]):
                assert check_edge(stage, stage.full_config(a),
                                  stage.full_config(b), resolution)

    def test_attached_pose_tracks_ee_along_retreat(self, ws):
        out, ws2 = ground_action(ws, action("pick", object="marker"), seed=3)
        held = ws2.attached_obstacle()
        retreat = out.trajectories[2]
        poses = [
            fk_ee(ws2.robot, ws2.robot_base_pose, ws2.full_config(w))
            * held.attached
            for w in retreat.waypoints
        ]
        # the retreat lifts the held marker by the pregrasp clearance,
        # keeping it upright (within IK tolerances)
        lift = poses[-1].position - poses[0].position
        assert np.linalg.norm(lift - [0, 0, PREGRASP_CLEARANCE]) < 5e-4
        for p in (poses[0], poses[-1]):
            axis = quat_rotate(p.orientation, [0, 0, 1])
            assert np.linalg.norm(axis - [0, 0, 1]) < 5e-3


class TestExecutePlan:
    def demo_plan(self, ws):
        raw = MockLlmClient().complete(
            compose_prompt(DEMO_TASK, state=textualize(ws)).rendered)
        plan = parse_plan(raw, ws, source="mock")
        assert not isinstance(plan, tuple)
        return plan

    def test_clean_demo_run(self, ws):
        plan = self.demo_plan(ws)
        result = execute_plan(ws, plan, MockLlmClient(), max_repairs=3, seed=0)
        assert result.status == "success"
        assert result.repairs_used == 0
        assert [o.status for o in result.outcomes] == ["success"] * 4
        holder = result.workspace.obstacle("holder").world_aabb()
        for name in ("marker", "eraser"):
            p = result.workspace.obstacle(name).pose.position
            assert holder.lo[0] <= p[0] <= holder.hi[0]
            assert holder.lo[1] <= p[1] <= holder.hi[1]
            assert p[2] > holder.lo[2]

    def test_no_teleportation_across_actions(self, ws):
        plan = self.demo_plan(ws)
        result = execute_plan(ws, plan, MockLlmClient(), seed=0)
        flat = [t for o in result.outcomes for t in o.trajectories]
        assert_chained(flat)

    def test_exhausted_repairs_at_zero_budget(self, ws):
        doc = {"task": "t",
               "actions": [{"action": "pick", "object": "holder"}]}
        plan = parse_plan(json.dumps(doc), ws)
        result = execute_plan(ws, plan, MockLlmClient(), max_repairs=0, seed=0)
        assert result.status == "exhausted_repairs"
        assert result.repairs_used == 0
        assert result.outcomes[-1].status == "grasp_failed"
        assert "grasp_failed" in result.error
        assert result.workspace is ws

    def test_repair_recovers_with_new_plan(self, ws):
        bad = parse_plan(json.dumps(
            {"task": DEMO_TASK,
             "actions": [{"action": "pick", "object": "holder"}]}), ws)
        good = MockLlmClient().complete(
            compose_prompt(DEMO_TASK, state=textualize(ws)).rendered)
        client = ScriptedClient([good])
        result = execute_plan(ws, bad, client, max_repairs=1, seed=0)
        assert result.status == "success"
        assert result.repairs_used == 1
        assert [o.status for o in result.outcomes] == [
            "grasp_failed"] + ["success"] * 4
        assert "[repair]" in client.prompts[0]
        assert "grasp_failed" in client.prompts[0]

    def test_replan_failure_is_terminal(self, ws):
        bad = parse_plan(json.dumps(
            {"task": "t", "actions": [{"action": "pick", "object": "holder"}]}),
            ws)
        client = ScriptedClient(["garbage", "more garbage", "still garbage"])
        result = execute_plan(ws, bad, client, max_repairs=2, seed=0)
        assert result.status == "exhausted_repairs"
        assert result.error.startswith("replanning failed")

    def test_negative_budget_rejected(self, ws):
        plan = self.demo_plan(ws)
        with pytest.raises(ValueError, match="max_repairs"):
            execute_plan(ws, plan, MockLlmClient(), max_repairs=-1)

    def test_deterministic_execution_documents(self, ws):
        plan = self.demo_plan(ws)
        docs = []
        for _ in range(2):
            result = execute_plan(ws, plan, MockLlmClient(), seed=9)
            docs.append(execution_document(result))
        assert docs[0] == docs[1]
        parsed = json.loads(docs[0])
        assert parsed["status"] == "success"
        assert len(parsed["outcomes"]) == 4


class TestDocuments:
    def test_trajectory_document_shape(self, ws):
        out, ws2 = ground_action(ws, action("pick", object="marker"), seed=3)
        doc = trajectory_document(ws2, out.trajectories[0], dt=0.1)
        assert doc["controlled"] == list(ws.controlled)
        assert doc["waypoints"][0] == pytest.approx(
            list(ws.controlled_config()))
        ts = [s["t"] for s in doc["samples"]]
        assert ts == sorted(ts)
        assert ts[0] == 0.0
        assert all(len(s["ee"]) == 7 for s in doc["samples"])
        assert all(len(s["config"]) == len(ws.controlled)
                   for s in doc["samples"])
        # endpoints are sampled exactly
        assert doc["samples"][-1]["config"] == pytest.approx(
            list(out.trajectories[0].waypoints[-1]))

    def test_outcome_document_for_failure(self, ws):
        out, _ = ground_action(ws, action("pick", object="holder"), index=2)
        doc = outcome_document(ws, out)
        assert doc["status"] == "grasp_failed"
        assert doc["index"] == 2
        assert "not graspable" in doc["detail"]
        assert doc["trajectories"] == []

    def test_documents_are_json_serializable(self, ws):
        out, ws2 = ground_action(ws, action("pick", object="eraser"), seed=1)
        json.dumps(outcome_document(ws2, out))
