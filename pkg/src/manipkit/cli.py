"""Command-line entry points: one-shot planning, the language pipeline,
state textualization, the metrics harness, the HTTP service, and file
validation.

Every command takes a problem reference as either a problem root
directory or a problem .xml inside <root>/problems/. A JSON config file
passed via --config supplies per-command option defaults (flags win):

    {"plan": {"algorithm": "RRT"}, "metrics": {"trials": 50}}

Credentials for a live LLM endpoint come from the LANG2MANIP_LLM_KEY
environment variable, never from flags or config files.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import replace
from pathlib import Path

import click

from .metrics import DEFAULT_TASK
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
    load_problem_directory,
    parse_obstacle_model,
    parse_problem,
    parse_robot_model,
)
from .service import (
    SAMPLE_DT,
    ServiceError,
    Session,
    create_app,
    run_metrics_op,
    run_task_op,
)
from .symbolic import DEFAULT_LLM_ENDPOINT
from .textualize import textualize


def _load_ws(problem: str, name) -> Workspace:
    path = Path(problem)
    try:
        if path.is_dir():
            return load_problem_directory(path, name)
        return load_problem_directory(path.parent.parent, path.stem)
    except (ParseError, SceneError, PlannerError) as e:
        raise click.ClickException(str(e)) from e


def _parse_config_list(raw: str, label: str) -> list:
    try:
        return [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise click.ClickException(
            f"--{label} must be a comma- or space-separated list of numbers"
        )


def _emit(text: str, out) -> None:
    if out is None:
        click.echo(text)
    else:
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}", err=True)


problem_argument = click.argument("problem", type=click.Path(exists=True))
name_option = click.option(
    "--name", default=None,
    help="Problem file name when the root directory holds several.",
)
out_option = click.option(
    "--out", type=click.Path(dir_okay=False, writable=True), default=None,
    help="Write the result here instead of stdout.",
)


@click.group()
@click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), default=None,
    help="JSON file with per-command option defaults.",
)
@click.pass_context
def main(ctx, config):
    """Language-driven manipulation planning tools."""
    if config:
        try:
            loaded = json.loads(Path(config).read_text())
        except json.JSONDecodeError as e:
            raise click.ClickException(f"config file is not valid JSON: {e}")
        if not isinstance(loaded, dict):
            raise click.ClickException("config file must hold a JSON object")
        ctx.default_map = loaded


@main.command(name="plan")
@problem_argument
@name_option
@click.option("--init", default=None, help="Start configuration (comma-separated).")
@click.option("--goal", default=None, help="Goal configuration (comma-separated).")
@click.option(
    "--algorithm", type=click.Choice(ALGORITHMS), default=None,
    help="Override the problem's planner.",
)
@click.option("--seed", type=int, default=None, help="Override the planner seed.")
@click.option("--max-iterations", type=int, default=None)
@out_option
def plan_command(problem, name, init, goal, algorithm, seed, max_iterations, out):
    """Solve one motion query and print the path document as JSON.

    Init and goal default to the query staged in the problem file.
    Exits with status 1 when no path is found, still printing the
    failure document."""
    ws = _load_ws(problem, name)
    spec = ws.active_planner or PlannerSpec(algorithm="RRTConnect")
    overrides = {}
    if algorithm is not None:
        overrides["algorithm"] = algorithm
    if seed is not None:
        overrides["seed"] = seed
    if max_iterations is not None:
        overrides["max_iterations"] = max_iterations
    if overrides:
        try:
            spec = replace(spec, **overrides)
        except PlannerError as e:
            raise click.ClickException(str(e)) from e
    start = _parse_config_list(init, "init") if init else ws.query_init
    end = _parse_config_list(goal, "goal") if goal else ws.query_goal
    if start is None or end is None:
        raise click.ClickException(
            "the problem stages no query; pass --init and --goal"
        )
    try:
        query = PlanningQuery(start, end)
        result = plan(ws, spec, query)
    except (PlannerError, SceneError) as e:
        raise click.ClickException(str(e)) from e
    if isinstance(result, Trajectory):
        from .grounding import trajectory_document

        doc = trajectory_document(ws, result, SAMPLE_DT)
        doc["stats"] = {
            "iterations": int(result.stats.iterations),
            "tree_sizes": [int(n) for n in result.stats.tree_sizes],
        }
        _emit(json.dumps({"solved": True, **doc}, indent=1), out)
        return
    failure = {
        "solved": False,
        "kind": result.kind,
        "stats": {
            "iterations": int(result.stats.iterations),
            "tree_sizes": [int(n) for n in result.stats.tree_sizes],
        },
    }
    if result.witness is not None:
        failure["witness"] = list(result.witness)
    _emit(json.dumps(failure, indent=1), out)
    raise SystemExit(1)


@main.command(name="task")
@problem_argument
@click.argument("task_text")
@name_option
@click.option(
    "--client", "client_kind", type=click.Choice(["mock", "http"]),
    default="mock", show_default=True,
)
@click.option(
    "--error-rate", type=float, default=0.0,
    help="Mock client fault-injection rate.",
)
@click.option(
    "--endpoint", default=DEFAULT_LLM_ENDPOINT, show_default=True,
    help="Chat-completion URL for the http client "
    "(credential from LANG2MANIP_LLM_KEY).",
)
@click.option("--model", default="gpt-4", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-repairs", type=int, default=3, show_default=True)
@out_option
def task_command(
    problem, task_text, name, client_kind, error_rate, endpoint, model,
    seed, max_repairs, out,
):
    """Run the full pipeline on one task and print the execution report."""
    ws = _load_ws(problem, name)
    if client_kind == "mock":
        client_cfg = {"kind": "mock", "error_rate": error_rate, "seed": seed}
    else:
        client_cfg = {"kind": "http", "endpoint": endpoint, "model": model}
    sess = Session(sid="cli", ws=ws)
    try:
        report = run_task_op(
            sess,
            {
                "task": task_text,
                "client": client_cfg,
                "max_repairs": max_repairs,
                "seed": seed,
            },
        )
    except ServiceError as e:
        raise click.ClickException(f"{e.code}: {e.message}") from e
    _emit(json.dumps(report, indent=1), out)
    if report["status"] != "success":
        raise SystemExit(1)


@main.command(name="textualize")
@problem_argument
@name_option
@out_option
def textualize_command(problem, name, out):
    """Print the structured text description of the scene."""
    ws = _load_ws(problem, name)
    _emit(textualize(ws).rendered, out)


@main.command(name="metrics")
@problem_argument
@name_option
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--error-rate", type=float, default=0.0, show_default=True)
@click.option("--pose-jitter", type=float, default=0.02, show_default=True)
@click.option("--task", default=DEFAULT_TASK, show_default=True)
@click.option(
    "--symbolic-only", is_flag=True,
    help="Skip grounding; measure only first-plan validity.",
)
@click.option(
    "--json", "as_json", is_flag=True,
    help="Emit the full report as JSON instead of the summary.",
)
@out_option
def metrics_command(
    problem, name, trials, seed, error_rate, pose_jitter, task,
    symbolic_only, as_json, out,
):
    """Run randomized trials and report the aggregate rates."""
    payload = {
        "problem": problem, "name": name, "trials": trials, "seed": seed,
        "error_rate": error_rate, "pose_jitter": pose_jitter, "task": task,
        "symbolic_only": symbolic_only,
    }
    try:
        report = run_metrics_op(payload)
    except ServiceError as e:
        raise click.ClickException(f"{e.code}: {e.message}") from e
    if as_json:
        _emit(json.dumps(report, indent=1), out)
        return
    lines = [
        f"problem: {report['problem']}  trials: {report['trials']}  "
        f"error_rate: {report['error_rate']:g}  "
        f"pose_jitter: {report['pose_jitter']:g}",
        f"symbolic accuracy:  {report['rates']['symbolic_accuracy']:.3f}",
    ]
    if report["rates"]["task_success"] is not None:
        lines.append(f"task success rate:  {report['rates']['task_success']:.3f}")
    if report["rates"]["motion_feasibility"] is not None:
        lines.append(
            f"motion feasibility: {report['rates']['motion_feasibility']:.3f}"
        )
    if report["rates"]["task_success"] is not None:
        lines.append(
            "reference (GPT-4 baseline, informational): "
            "task success 0.85, motion feasibility 0.92"
        )
    _emit("\n".join(lines), out)


@main.command(name="serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8008, show_default=True)
def serve_command(host, port):
    """Start the HTTP planning service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


def _validate_file(path: Path) -> str:
    text = path.read_text()
    try:
        root_tag = ET.fromstring(text).tag
    except ET.ParseError as e:
        raise ParseError(f"not well-formed XML: {e}")
    if root_tag == "Problem":
        pf = parse_problem(text)
        base = path.parent.parent
        if (base / "models").is_dir():
            load_problem_directory(base, path.stem)
            return f"problem {pf.name!r} (workspace builds)"
        return f"problem {pf.name!r} (structure only; no models/ nearby)"
    if root_tag == "Model":
        if ET.fromstring(text).find("Joint") is not None:
            robot = parse_robot_model(text)
            return f"robot model {robot.name!r} ({robot.dof}-DOF)"
        name, _, _ = parse_obstacle_model(text)
        return f"obstacle model {name!r}"
    raise ParseError(f"unknown document root <{root_tag}>")


@main.command(name="validate")
@click.argument(
    "paths", nargs=-1, required=True, type=click.Path(exists=True)
)
def validate_command(paths):
    """Parse-check problem and model files (or whole problem roots).

    Prints one line per input; exits with status 1 if any fails."""
    failed = False
    for raw in paths:
        path = Path(raw)
        try:
            if path.is_dir():
                ws = load_problem_directory(path)
                verdict = (
                    f"problem root ({ws.robot.name!r}, "
                    f"{len(ws.obstacles)} obstacles)"
                )
            else:
                verdict = _validate_file(path)
            click.echo(f"{raw}: ok, {verdict}")
        except (ParseError, SceneError, PlannerError, OSError) as e:
            click.echo(f"{raw}: FAIL, {e}")
            failed = True
    if failed:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
