"""XML scene formats: robot/obstacle models, problem files, controls.

Model documents describe one serial chain (or a single-link obstacle):

    <Model name="arm">
      <Link name="base">
        <Shape kind="box" hx="0.05" hy="0.05" hz="0.05"/>
        <Offset x="0" y="0" z="0" qx="0" qy="0" qz="0" qw="1"/>
      </Link>
      <Joint name="j1" kind="revolute" parent="base" child="link1">
        <Origin z="0.333"/>
        <Axis z="1"/>
        <Limits lower="-2.9" upper="2.9" velocity="2.0" default="0"/>
      </Joint>
      <EndEffector link="hand" grip_width="0.08" finger_reach="0.05"/>
    </Model>

Problem documents bind models into a workspace:

    <Problem name="demo">
      <Robot model="models/arm.xml" controls="problems/controls/arm.ctl">
        <Pose x="0"/>
      </Robot>
      <Obstacle name="marker" model="models/marker.xml" graspable="true">
        <Pose x="0.5" z="0.1"/>
      </Obstacle>
      <Bounds lo="-5 -5 -0.05" hi="5 5 5"/>
      <Planner type="RRT"> <Param name="seed" value="0"/> </Planner>
      <Query> <Init>0 0</Init> <Goal>1 1</Goal> </Query>
    </Problem>

Shape attributes per kind: box hx/hy/hz (half extents), sphere radius,
cylinder and capsule radius/half_length. Pose-valued elements (Pose,
Offset, Origin, EndEffector) take x y z qx qy qz qw, defaulting to the
identity. All referenced paths are relative; parsing rejects absolute
paths. Controls files list one controlled joint name per line.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional
from xml.etree import ElementTree as ET

import numpy as np

from .geometry import Aabb, Pose
from .planner import PlannerSpec
from .scene import (
    Gripper,
    Joint,
    Link,
    Obstacle,
    RobotModel,
    SceneError,
    ShapePrimitive,
    Workspace,
)

DEFAULT_BOUNDS_LO = (-5.0, -5.0, -0.05)
DEFAULT_BOUNDS_HI = (5.0, 5.0, 5.0)

_POSE_ATTRS = ("x", "y", "z", "qx", "qy", "qz", "qw")
_SHAPE_ATTRS = {
    "box": ("hx", "hy", "hz"),
    "sphere": ("radius",),
    "cylinder": ("radius", "half_length"),
    "capsule": ("radius", "half_length"),
}


class ParseError(SceneError):
    """Malformed or invalid scene document; messages carry the element
    path of the offending node."""


@dataclass(frozen=True)
class ObstacleRef:
    name: str
    model: str
    pose: Pose
    graspable: bool


@dataclass(frozen=True)
class ProblemFile:
    """Parsed problem document, paths still unresolved."""

    name: str
    robot_model: str
    robot_controls: str
    robot_base_pose: Pose
    obstacles: tuple
    planner_type: str
    planner_params: tuple  # (name, value) string pairs in file order
    query_init: tuple
    query_goal: tuple
    bounds_lo: tuple = DEFAULT_BOUNDS_LO
    bounds_hi: tuple = DEFAULT_BOUNDS_HI


# ---------------------------------------------------------------- parsing

def _xml_root(text: str, expected: str) -> ET.Element:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc
    if root.tag != expected:
        raise ParseError(f"expected <{expected}> root, got <{root.tag}>")
    return root


def _check_attrs(el: ET.Element, path: str, allowed, required=()):
    for name in el.attrib:
        if name not in allowed:
            raise ParseError(f"{path}: unexpected attribute {name!r}")
    for name in required:
        if name not in el.attrib:
            raise ParseError(f"{path}: missing attribute {name!r}")


def _check_children(el: ET.Element, path: str, allowed):
    for child in el:
        if child.tag not in allowed:
            raise ParseError(f"{path}: unexpected element <{child.tag}>")


def _float_attr(el: ET.Element, path: str, name: str, default=None) -> float:
    raw = el.get(name)
    if raw is None:
        if default is None:
            raise ParseError(f"{path}: missing attribute {name!r}")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"{path}: attribute {name}={raw!r} is not a number")


def _pose_from_attrs(el: ET.Element, path: str) -> Pose:
    vals = [
        _float_attr(el, path, name, default)
        for name, default in zip(_POSE_ATTRS, (0, 0, 0, 0, 0, 0, 1))
    ]
    try:
        return Pose(vals[:3], vals[3:])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _parse_pose(el: Optional[ET.Element], path: str) -> Pose:
    if el is None:
        return Pose.identity()
    _check_attrs(el, path, _POSE_ATTRS)
    _check_children(el, path, ())
    return _pose_from_attrs(el, path)


def _single_child(el: ET.Element, tag: str, path: str, required=True):
    found = [c for c in el if c.tag == tag]
    if len(found) > 1:
        raise ParseError(f"{path}: more than one <{tag}>")
    if not found:
        if required:
            raise ParseError(f"{path}: missing <{tag}>")
        return None
    return found[0]


def _parse_shape(el: ET.Element, path: str) -> ShapePrimitive:
    kind = el.get("kind")
    if kind not in _SHAPE_ATTRS:
        raise ParseError(f"{path}: unknown shape kind {kind!r}")
    attrs = _SHAPE_ATTRS[kind]
    _check_attrs(el, path, ("kind",) + attrs, required=("kind",) + attrs)
    _check_children(el, path, ())
    dims = tuple(_float_attr(el, path, a) for a in attrs)
    try:
        return ShapePrimitive(kind, dims)
    except SceneError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _parse_link(el: ET.Element, path: str) -> Link:
    _check_attrs(el, path, ("name",), required=("name",))
    _check_children(el, path, ("Shape", "Offset"))
    shape_el = _single_child(el, "Shape", path, required=False)
    shape = _parse_shape(shape_el, f"{path}/Shape") if shape_el is not None else None
    offset = _parse_pose(
        _single_child(el, "Offset", path, required=False), f"{path}/Offset"
    )
    return Link(el.get("name"), shape, offset)


def _parse_joint(el: ET.Element, path: str) -> Joint:
    _check_attrs(
        el, path, ("name", "kind", "parent", "child"),
        required=("name", "kind", "parent", "child"),
    )
    _check_children(el, path, ("Origin", "Axis", "Limits"))
    kind = el.get("kind")
    origin = _parse_pose(
        _single_child(el, "Origin", path, required=False), f"{path}/Origin"
    )
    axis = None
    axis_el = _single_child(el, "Axis", path, required=False)
    if axis_el is not None:
        apath = f"{path}/Axis"
        _check_attrs(axis_el, apath, ("x", "y", "z"))
        axis = tuple(_float_attr(axis_el, apath, a, 0.0) for a in "xyz")
    limits = (0.0, 0.0)
    velocity = 1.0
    default = 0.0
    lim_el = _single_child(el, "Limits", path, required=False)
    if lim_el is not None:
        lpath = f"{path}/Limits"
        _check_attrs(
            lim_el, lpath, ("lower", "upper", "velocity", "default"),
            required=("lower", "upper"),
        )
        limits = (
            _float_attr(lim_el, lpath, "lower"),
            _float_attr(lim_el, lpath, "upper"),
        )
        velocity = _float_attr(lim_el, lpath, "velocity", 1.0)
        default = _float_attr(lim_el, lpath, "default", 0.0)
    elif kind in ("revolute", "prismatic"):
        raise ParseError(f"{path}: missing <Limits> for {kind} joint")
    try:
        return Joint(
            name=el.get("name"), kind=kind,
            parent_link=el.get("parent"), child_link=el.get("child"),
            origin=origin, axis=axis, limits=limits,
            max_velocity=velocity, default=default,
        )
    except SceneError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def parse_robot_model(text: str) -> RobotModel:
    """Parse a Model document into a validated base-to-tip chain."""
    root = _xml_root(text, "Model")
    _check_attrs(root, "Model", ("name",), required=("name",))
    _check_children(root, "Model", ("Link", "Joint", "EndEffector"))
    links = []
    joints = []
    li = ji = 0
    for el in root:
        if el.tag == "Link":
            li += 1
            links.append(_parse_link(el, f"Model/Link[{li}]"))
        elif el.tag == "Joint":
            ji += 1
            joints.append(_parse_joint(el, f"Model/Joint[{ji}]"))
    if not links:
        raise ParseError("Model: no <Link> elements")
    ee_el = _single_child(root, "EndEffector", "Model", required=False)
    gripper = None
    ee_offset = Pose.identity()
    if ee_el is not None:
        epath = "Model/EndEffector"
        _check_attrs(
            ee_el, epath,
            ("link", "grip_width", "finger_reach") + _POSE_ATTRS,
            required=("link",),
        )
        ee_link = ee_el.get("link")
        if (ee_el.get("grip_width") is None) != (ee_el.get("finger_reach") is None):
            raise ParseError(
                f"{epath}: grip_width and finger_reach come together"
            )
        if ee_el.get("grip_width") is not None:
            try:
                gripper = Gripper(
                    _float_attr(ee_el, epath, "grip_width"),
                    _float_attr(ee_el, epath, "finger_reach"),
                )
            except SceneError as exc:
                raise ParseError(f"{epath}: {exc}") from exc
        ee_offset = _pose_from_attrs(ee_el, epath)
    else:
        # default to the chain tip: the link that is nobody's parent
        parents = {j.parent_link for j in joints}
        tips = [l.name for l in links if l.name not in parents]
        ee_link = tips[-1] if tips else links[-1].name
    try:
        return RobotModel(
            name=root.get("name"), links=tuple(links), joints=tuple(joints),
            ee_link=ee_link, gripper=gripper, ee_offset=ee_offset,
        )
    except SceneError as exc:
        raise ParseError(f"Model: {exc}") from exc


def parse_obstacle_model(text: str):
    """Parse a single-link Model document; returns (model_name, shape,
    shape_offset)."""
    root = _xml_root(text, "Model")
    _check_attrs(root, "Model", ("name",), required=("name",))
    _check_children(root, "Model", ("Link",))
    links = [c for c in root if c.tag == "Link"]
    if len(links) != 1:
        raise ParseError("Model: obstacle model needs exactly one <Link>")
    link = _parse_link(links[0], "Model/Link[1]")
    if link.shape is None:
        raise ParseError("Model/Link[1]: obstacle link needs a <Shape>")
    return root.get("name"), link.shape, link.offset


def _rel_path(raw: Optional[str], path: str) -> str:
    if raw is None:
        raise ParseError(f"{path}: missing attribute")
    if os.path.isabs(raw):
        raise ParseError(f"{path}: absolute path forbidden: {raw!r}")
    return raw


def _parse_bool(raw: str, path: str) -> bool:
    if raw == "true":
        return True
    if raw == "false":
        return False
    raise ParseError(f"{path}: expected true or false, got {raw!r}")


def _parse_vector(text: Optional[str], path: str) -> tuple:
    try:
        return tuple(float(v) for v in (text or "").split())
    except ValueError:
        raise ParseError(f"{path}: expected whitespace-separated numbers")


def _parse_triple(el: ET.Element, path: str, name: str) -> tuple:
    vals = _parse_vector(el.get(name), f"{path}@{name}")
    if len(vals) != 3:
        raise ParseError(f"{path}: attribute {name!r} needs three numbers")
    return vals


def parse_problem(text: str) -> ProblemFile:
    """Parse a Problem document to its file-level structure; referenced
    model paths stay unresolved."""
    root = _xml_root(text, "Problem")
    _check_attrs(root, "Problem", ("name",), required=("name",))
    _check_children(
        root, "Problem", ("Robot", "Obstacle", "Bounds", "Planner", "Query")
    )

    robot_el = _single_child(root, "Robot", "Problem")
    _check_attrs(
        robot_el, "Problem/Robot", ("model", "controls"),
        required=("model", "controls"),
    )
    _check_children(robot_el, "Problem/Robot", ("Pose",))
    base_pose = _parse_pose(
        _single_child(robot_el, "Pose", "Problem/Robot", required=False),
        "Problem/Robot/Pose",
    )

    obstacles = []
    oi = 0
    for el in root:
        if el.tag != "Obstacle":
            continue
        oi += 1
        path = f"Problem/Obstacle[{oi}]"
        _check_attrs(
            el, path, ("name", "model", "graspable"), required=("name", "model")
        )
        _check_children(el, path, ("Pose",))
        obstacles.append(
            ObstacleRef(
                name=el.get("name"),
                model=_rel_path(el.get("model"), f"{path}@model"),
                pose=_parse_pose(
                    _single_child(el, "Pose", path, required=False),
                    f"{path}/Pose",
                ),
                graspable=_parse_bool(el.get("graspable", "false"), path),
            )
        )

    bounds_lo, bounds_hi = DEFAULT_BOUNDS_LO, DEFAULT_BOUNDS_HI
    bounds_el = _single_child(root, "Bounds", "Problem", required=False)
    if bounds_el is not None:
        _check_attrs(bounds_el, "Problem/Bounds", ("lo", "hi"), required=("lo", "hi"))
        bounds_lo = _parse_triple(bounds_el, "Problem/Bounds", "lo")
        bounds_hi = _parse_triple(bounds_el, "Problem/Bounds", "hi")

    planner_el = _single_child(root, "Planner", "Problem")
    _check_attrs(planner_el, "Problem/Planner", ("type",), required=("type",))
    _check_children(planner_el, "Problem/Planner", ("Param",))
    params = []
    for pi, el in enumerate(planner_el, start=1):
        path = f"Problem/Planner/Param[{pi}]"
        _check_attrs(el, path, ("name", "value"), required=("name", "value"))
        params.append((el.get("name"), el.get("value")))

    query_el = _single_child(root, "Query", "Problem")
    _check_attrs(query_el, "Problem/Query", ())
    _check_children(query_el, "Problem/Query", ("Init", "Goal"))
    init_el = _single_child(query_el, "Init", "Problem/Query")
    goal_el = _single_child(query_el, "Goal", "Problem/Query")
    for el, path in ((init_el, "Problem/Query/Init"), (goal_el, "Problem/Query/Goal")):
        _check_attrs(el, path, ())
        _check_children(el, path, ())

    return ProblemFile(
        name=root.get("name"),
        robot_model=_rel_path(robot_el.get("model"), "Problem/Robot@model"),
        robot_controls=_rel_path(robot_el.get("controls"), "Problem/Robot@controls"),
        robot_base_pose=base_pose,
        obstacles=tuple(obstacles),
        planner_type=planner_el.get("type"),
        planner_params=tuple(params),
        query_init=_parse_vector(init_el.text, "Problem/Query/Init"),
        query_goal=_parse_vector(goal_el.text, "Problem/Query/Goal"),
        bounds_lo=bounds_lo,
        bounds_hi=bounds_hi,
    )


def parse_controls(text: str, robot: RobotModel) -> tuple:
    """Controls file: one controlled joint name per line (# comments and
    blank lines skipped). Returns DOF indices in file order."""
    movable = {j.name: i for i, j in enumerate(robot.movable_joints)}
    indices = []
    seen = set()
    for ln, raw in enumerate(text.splitlines(), start=1):
        name = raw.strip()
        if not name or name.startswith("#"):
            continue
        if name not in movable:
            raise ParseError(
                f"controls line {ln}: unknown or fixed joint {name!r}"
            )
        if name in seen:
            raise ParseError(f"controls line {ln}: duplicate joint {name!r}")
        seen.add(name)
        indices.append(movable[name])
    if not indices:
        raise ParseError("controls file lists no joints")
    return tuple(indices)


def build_workspace(pf: ProblemFile, loader: Callable[[str], str]) -> Workspace:
    """Resolve a ProblemFile's references through loader (relative path ->
    file text) and assemble the Workspace."""

    def load(rel: str) -> str:
        try:
            return loader(rel)
        except (OSError, KeyError) as exc:
            raise ParseError(f"unresolvable path {rel!r}") from exc

    robot = parse_robot_model(load(pf.robot_model))
    controlled = parse_controls(load(pf.robot_controls), robot)

    obstacles = []
    for ref in pf.obstacles:
        model_name, shape, offset = parse_obstacle_model(load(ref.model))
        obstacles.append(
            Obstacle(
                name=ref.name, shape=shape, pose=ref.pose,
                graspable=ref.graspable, shape_offset=offset,
                model_ref=ref.model, model_name=model_name,
            )
        )

    try:
        spec = PlannerSpec.from_params(pf.planner_type, dict(pf.planner_params))
    except ValueError as exc:  # PlannerError and bad numeric strings alike
        raise ParseError(f"Problem/Planner: {exc}") from exc

    n = len(controlled)
    if len(pf.query_init) != n or len(pf.query_goal) != n:
        raise ParseError(
            f"Problem/Query: init/goal need {n} values for {n} controlled "
            f"joints, got {len(pf.query_init)}/{len(pf.query_goal)}"
        )
    config = robot.default_config()
    config[list(controlled)] = pf.query_init
    try:
        return Workspace(
            robot=robot,
            robot_base_pose=pf.robot_base_pose,
            obstacles=tuple(obstacles),
            bounds=Aabb.from_bounds(pf.bounds_lo, pf.bounds_hi),
            current_config=config,
            active_planner=spec,
            controlled=controlled,
            query_init=np.array(pf.query_init),
            query_goal=np.array(pf.query_goal),
            name=pf.name,
        )
    except SceneError as exc:
        raise ParseError(f"Problem: {exc}") from exc


def parse_problem_file(text: str, loader: Callable[[str], str]) -> Workspace:
    return build_workspace(parse_problem(text), loader)


def directory_loader(root) -> Callable[[str], str]:
    """Resolver reading relative paths under root, rejecting escapes."""
    base = Path(root).resolve()

    def load(rel: str) -> str:
        target = (base / rel).resolve()
        if base != target and base not in target.parents:
            raise ParseError(f"path escapes the problem root: {rel!r}")
        if not target.is_file():
            raise ParseError(f"unresolvable path {rel!r}")
        return target.read_text()

    return load


def demo_root() -> Path:
    """Directory of the bundled demo problem tree (7-DOF arm, three
    desk objects)."""
    return Path(__file__).parent / "assets" / "demo"


def load_problem_directory(root, problem: Optional[str] = None) -> Workspace:
    """Load a problem from a <root>/{models,problems} tree. With several
    problem files present the caller names one (with or without .xml)."""
    base = Path(root)
    for sub in ("models", "problems"):
        if not (base / sub).is_dir():
            raise ParseError(f"missing {sub}/ subdirectory under {base}")
    if problem is not None:
        name = problem if problem.endswith(".xml") else problem + ".xml"
        candidate = base / "problems" / name
        if not candidate.is_file():
            raise ParseError(f"no problem file named {name!r}")
    else:
        found = sorted((base / "problems").glob("*.xml"))
        if not found:
            raise ParseError("no problem file")
        if len(found) > 1:
            names = ", ".join(p.name for p in found)
            raise ParseError(f"several problem files ({names}); name one")
        candidate = found[0]
    return parse_problem_file(candidate.read_text(), directory_loader(base))


# ------------------------------------------------------------ serializing

def _fmt(v: float) -> str:
    return repr(float(v))


def _pose_attrs(el: ET.Element, pose: Pose):
    vals = tuple(pose.position) + tuple(pose.orientation)
    for name, v in zip(_POSE_ATTRS, vals):
        el.set(name, _fmt(v))


def _to_text(root: ET.Element) -> str:
    tree = ET.ElementTree(root)
    ET.indent(tree, space="  ")
    return ET.tostring(root, encoding="unicode") + "\n"


def _shape_element(shape: ShapePrimitive) -> ET.Element:
    el = ET.Element("Shape", kind=shape.kind)
    for name, v in zip(_SHAPE_ATTRS[shape.kind], shape.dimensions):
        el.set(name, _fmt(v))
    return el


def serialize_robot_model(robot: RobotModel) -> str:
    root = ET.Element("Model", name=robot.name)
    for link in robot.links:
        el = ET.SubElement(root, "Link", name=link.name)
        if link.shape is not None:
            el.append(_shape_element(link.shape))
        off = ET.SubElement(el, "Offset")
        _pose_attrs(off, link.offset)
    for joint in robot.joints:
        el = ET.SubElement(
            root, "Joint", name=joint.name, kind=joint.kind,
            parent=joint.parent_link, child=joint.child_link,
        )
        origin = ET.SubElement(el, "Origin")
        _pose_attrs(origin, joint.origin)
        if joint.kind != "fixed":
            axis = ET.SubElement(el, "Axis")
            for name, v in zip("xyz", joint.axis):
                axis.set(name, _fmt(v))
            ET.SubElement(
                el, "Limits",
                lower=_fmt(joint.limits[0]), upper=_fmt(joint.limits[1]),
                velocity=_fmt(joint.max_velocity), default=_fmt(joint.default),
            )
    ee = ET.SubElement(root, "EndEffector", link=robot.ee_link)
    if robot.gripper is not None:
        ee.set("grip_width", _fmt(robot.gripper.max_opening))
        ee.set("finger_reach", _fmt(robot.gripper.finger_reach))
    _pose_attrs(ee, robot.ee_offset)
    return _to_text(root)


def serialize_obstacle_model(
    name: str, shape: ShapePrimitive, offset: Pose = None
) -> str:
    root = ET.Element("Model", name=name)
    link = ET.SubElement(root, "Link", name="body")
    link.append(_shape_element(shape))
    off = ET.SubElement(link, "Offset")
    _pose_attrs(off, offset if offset is not None else Pose.identity())
    return _to_text(root)


def serialize_problem(pf: ProblemFile) -> str:
    root = ET.Element("Problem", name=pf.name)
    robot = ET.SubElement(
        root, "Robot", model=pf.robot_model, controls=pf.robot_controls
    )
    pose = ET.SubElement(robot, "Pose")
    _pose_attrs(pose, pf.robot_base_pose)
    for ref in pf.obstacles:
        el = ET.SubElement(
            root, "Obstacle", name=ref.name, model=ref.model,
            graspable="true" if ref.graspable else "false",
        )
        p = ET.SubElement(el, "Pose")
        _pose_attrs(p, ref.pose)
    ET.SubElement(
        root, "Bounds",
        lo=" ".join(_fmt(v) for v in pf.bounds_lo),
        hi=" ".join(_fmt(v) for v in pf.bounds_hi),
    )
    planner = ET.SubElement(root, "Planner", type=pf.planner_type)
    for name, value in pf.planner_params:
        ET.SubElement(planner, "Param", name=name, value=str(value))
    query = ET.SubElement(root, "Query")
    ET.SubElement(query, "Init").text = " ".join(_fmt(v) for v in pf.query_init)
    ET.SubElement(query, "Goal").text = " ".join(_fmt(v) for v in pf.query_goal)
    return _to_text(root)
