"""Metrics harness: trial randomization, goal predicate, aggregate rates."""

import json
from dataclasses import replace

import numpy as np
import pytest

from manipkit.collision import check_config
from manipkit.geometry import Pose
from manipkit.metrics import (
    DEFAULT_TASK,
    MetricsReport,
    TrialRecord,
    goal_met,
    jitter_object_poses,
    run_metrics,
)
from manipkit.sceneio import demo_root, load_problem_directory
from manipkit.symbolic import ERROR_CODES


@pytest.fixture
def ws():
    return load_problem_directory(demo_root())


def record(**kw):
    base = dict(
        trial=0, seed=1, symbolic_valid=True, ik_ok=True, plans_ok=True,
        task_success=True, failure=None, queries_issued=4, queries_solved=4,
    )
    base.update(kw)
    return TrialRecord(**base)


class TestTrialRecord:
    def test_success_requires_valid_symbolic(self):
        with pytest.raises(ValueError, match="successful trial"):
            record(symbolic_valid=False, failure="malformed_json")

    def test_success_requires_solved_plans(self):
        with pytest.raises(ValueError, match="successful trial"):
            record(plans_ok=False, queries_solved=3)

    def test_success_carries_no_failure_class(self):
        with pytest.raises(ValueError, match="failure class"):
            record(failure="plan_failed")

    def test_unknown_failure_class_rejected(self):
        with pytest.raises(ValueError, match="unknown failure"):
            record(task_success=False, failure="gremlins")

    def test_solved_bounded_by_issued(self):
        with pytest.raises(ValueError, match="queries_solved"):
            record(queries_solved=5)
        with pytest.raises(ValueError, match="queries_solved"):
            record(task_success=False, failure="plan_failed", queries_solved=-1)

    def test_every_symbolic_code_is_a_trial_failure(self):
        for code in ERROR_CODES:
            r = record(symbolic_valid=False, task_success=False, failure=code,
                       queries_issued=0, queries_solved=0)
            assert r.failure == code


class TestJitter:
    def test_graspables_move_within_bounds(self, ws):
        rng = np.random.default_rng(5)
        out = jitter_object_poses(ws, 0.02, rng)
        moved = 0
        for name in ("marker", "eraser"):
            before = ws.obstacle(name).pose.position
            after = out.obstacle(name).pose.position
            delta = after - before
            assert abs(delta[0]) <= 0.02 and abs(delta[1]) <= 0.02
            assert delta[2] == 0.0
            if abs(delta[0]) > 0 or abs(delta[1]) > 0:
                moved += 1
        assert moved == 2

    def test_non_graspables_stay_put(self, ws):
        rng = np.random.default_rng(5)
        out = jitter_object_poses(ws, 0.02, rng)
        assert np.array_equal(
            out.obstacle("holder").pose.position,
            ws.obstacle("holder").pose.position,
        )

    def test_scene_stays_collision_free(self, ws):
        for seed in range(20):
            out = jitter_object_poses(ws, 0.02, np.random.default_rng(seed))
            assert not check_config(out, out.current_config).in_collision

    def test_zero_jitter_is_identity(self, ws):
        assert jitter_object_poses(ws, 0.0, np.random.default_rng(0)) is ws

    def test_input_workspace_unchanged(self, ws):
        before = ws.obstacle("marker").pose.position.copy()
        jitter_object_poses(ws, 0.02, np.random.default_rng(3))
        assert np.array_equal(ws.obstacle("marker").pose.position, before)

    def test_negative_jitter_rejected(self, ws):
        with pytest.raises(ValueError, match=">= 0"):
            jitter_object_poses(ws, -0.01, np.random.default_rng(0))

    def test_deterministic_for_seed(self, ws):
        a = jitter_object_poses(ws, 0.02, np.random.default_rng(9))
        b = jitter_object_poses(ws, 0.02, np.random.default_rng(9))
        for name in ("marker", "eraser"):
            assert np.array_equal(
                a.obstacle(name).pose.position, b.obstacle(name).pose.position
            )

    def test_blocked_object_keeps_original_pose(self, ws):
        from manipkit.scene import Obstacle, ShapePrimitive

        # a slab swallowing the whole jitter square rejects every candidate
        crowded = replace(
            ws,
            obstacles=ws.obstacles
            + (
                Obstacle(
                    name="slab",
                    shape=ShapePrimitive.box(0.06, 0.06, 0.06),
                    pose=Pose((0.5, 0.0, 0.065), (0, 0, 0, 1)),
                ),
            ),
        )
        out = jitter_object_poses(crowded, 0.02, np.random.default_rng(0), tries=30)
        assert np.array_equal(
            out.obstacle("marker").pose.position,
            ws.obstacle("marker").pose.position,
        )


class TestGoalPredicate:
    def put(self, ws, name, xyz):
        obs = ws.obstacle(name)
        return ws.with_obstacle(replace(obs, pose=Pose(xyz, obs.pose.orientation)))

    def test_initial_scene_misses_goal(self, ws):
        assert goal_met(ws, DEFAULT_TASK) is False

    def test_objects_inside_footprint_meet_goal(self, ws):
        ws = self.put(ws, "marker", (0.45, 0.2, 0.129))
        ws = self.put(ws, "eraser", (0.46, 0.21, 0.234))
        assert goal_met(ws, DEFAULT_TASK) is True

    def test_single_object_task(self, ws):
        ws = self.put(ws, "marker", (0.45, 0.2, 0.129))
        assert goal_met(ws, "Put the marker in the holder") is True
        assert goal_met(ws, "Put the eraser in the holder") is False

    def test_xy_outside_footprint_fails(self, ws):
        ws = self.put(ws, "marker", (0.51, 0.2, 0.129))
        assert goal_met(ws, "Put the marker in the holder") is False

    def test_z_at_or_below_base_fails(self, ws):
        base_z = ws.obstacle("holder").world_aabb().lo[2]
        ws = self.put(ws, "marker", (0.45, 0.2, base_z))
        assert goal_met(ws, "Put the marker in the holder") is False

    def test_attached_object_fails(self, ws):
        from manipkit.scene import attach_object

        ws = self.put(ws, "marker", (0.45, 0.2, 0.129))
        held = attach_object(ws, "marker", Pose((0, 0, -0.1), (0, 0, 0, 1)))
        assert goal_met(held, "Put the marker in the holder") is False

    def test_unmatched_task_is_indeterminate(self, ws):
        assert goal_met(ws, "juggle the marker") is None

    def test_unknown_names_are_indeterminate(self, ws):
        assert goal_met(ws, "Put the stapler in the holder") is None
        assert goal_met(ws, "Put the marker in the drawer") is None

    def test_case_insensitive(self, ws):
        ws = self.put(ws, "marker", (0.45, 0.2, 0.129))
        assert goal_met(ws, "PUT THE MARKER IN THE HOLDER") is True


class TestRunMetrics:
    def test_clean_trials_succeed(self, ws):
        rep = run_metrics(ws, trials=2, seed=0, error_rate=0.0, pose_jitter=0.02)
        assert rep.symbolic_accuracy == 1.0
        assert rep.task_success_rate == 1.0
        assert rep.motion_feasibility == 1.0
        for t in rep.trials:
            # 4 actions, 3 legs each: per-query counting on the demo task
            assert t.queries_issued == 12
            assert t.queries_solved == 12
            assert t.failure is None

    def test_reports_byte_identical_across_runs(self, ws):
        a = run_metrics(ws, trials=2, seed=7, error_rate=0.2, pose_jitter=0.02)
        fresh = load_problem_directory(demo_root())
        b = run_metrics(fresh, trials=2, seed=7, error_rate=0.2, pose_jitter=0.02)
        assert a.to_json() == b.to_json()

    def test_forced_faults_fail_at_symbolic_stage(self, ws):
        rep = run_metrics(ws, trials=3, seed=4, error_rate=1.0, pose_jitter=0.0)
        assert rep.symbolic_accuracy == 0.0
        assert rep.task_success_rate == 0.0
        assert rep.motion_feasibility is None
        for t in rep.trials:
            assert t.failure in ERROR_CODES
            assert t.queries_issued == 0
            assert t.task_success is False

    def test_unreachable_object_records_ik_failure(self, ws):
        obs = ws.obstacle("marker")
        far = ws.with_obstacle(
            replace(obs, pose=Pose((3.0, 0.0, 0.065), obs.pose.orientation))
        )
        rep = run_metrics(
            far, trials=1, seed=0, error_rate=0.0, pose_jitter=0.0,
            task="Put the marker in the holder",
        )
        t = rep.trials[0]
        assert t.symbolic_valid is True
        assert t.task_success is False
        assert t.failure == "ik_failed"
        assert t.ik_ok is False

    def test_symbolic_only_skips_grounding(self, ws):
        rep = run_metrics(ws, trials=50, seed=0, error_rate=0.0, symbolic_only=True)
        assert rep.symbolic_accuracy == 1.0
        assert rep.task_success_rate is None
        assert rep.motion_feasibility is None
        assert all(t.task_success is None for t in rep.trials)
        assert all(t.queries_issued == 0 for t in rep.trials)

    def test_fault_rate_calibration(self, ws):
        rep = run_metrics(
            ws, trials=300, seed=2, error_rate=0.10, symbolic_only=True
        )
        invalid = 1.0 - rep.symbolic_accuracy
        assert 0.05 <= invalid <= 0.17
        for t in rep.trials:
            if not t.symbolic_valid:
                assert t.failure in ERROR_CODES

    def test_trial_seeds_differ_but_reproduce(self, ws):
        rep = run_metrics(ws, trials=5, seed=3, error_rate=0.0, symbolic_only=True)
        seeds = [t.seed for t in rep.trials]
        assert len(set(seeds)) == 5
        again = run_metrics(ws, trials=5, seed=3, error_rate=0.0, symbolic_only=True)
        assert [t.seed for t in again.trials] == seeds

    def test_rates_recomputable_from_dump(self, ws):
        rep = run_metrics(ws, trials=2, seed=1, error_rate=0.5, pose_jitter=0.02)
        doc = json.loads(rep.to_json())
        recs = doc["records"]
        assert doc["rates"]["symbolic_accuracy"] == (
            sum(1 for r in recs if r["symbolic_valid"]) / len(recs)
        )
        done = [r for r in recs if r["task_success"] is not None]
        assert doc["rates"]["task_success"] == (
            sum(1 for r in done if r["task_success"]) / len(done)
        )
        issued = sum(r["queries_issued"] for r in recs)
        if issued:
            assert doc["rates"]["motion_feasibility"] == (
                sum(r["queries_solved"] for r in recs) / issued
            )
        else:
            assert doc["rates"]["motion_feasibility"] is None

    def test_summary_lines(self, ws):
        rep = run_metrics(ws, trials=1, seed=0, error_rate=0.0, pose_jitter=0.0)
        text = rep.summary()
        assert "symbolic accuracy" in text
        assert "task success rate" in text
        assert "0.85" in text and "0.92" in text

    def test_symbolic_only_summary_has_no_reference(self, ws):
        rep = run_metrics(ws, trials=1, seed=0, symbolic_only=True)
        assert "0.85" not in rep.summary()

    def test_bad_trial_count_rejected(self, ws):
        with pytest.raises(ValueError, match="trials"):
            run_metrics(ws, trials=0)

    def test_report_carries_configuration(self, ws):
        rep = run_metrics(ws, trials=1, seed=6, error_rate=0.25, symbolic_only=True)
        doc = json.loads(rep.to_json())
        assert doc["problem"] == "pick_place"
        assert doc["task"] == DEFAULT_TASK
        assert doc["seed"] == 6
        assert doc["error_rate"] == 0.25
