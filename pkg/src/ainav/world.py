"""World model: scenario geometry, belief state and egocentric observation.

The world is 2.5-D: every object is an oriented box standing on a base height,
and the robot stands on whatever surface is highest under its centre.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import shapely
from shapely.geometry import Polygon

ROBOT_RADIUS = 0.25
GOAL_TOLERANCE = 0.3


class ScenarioError(ValueError):
    """Raised when a scenario document is malformed or violates an invariant."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w < 0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class Pose3:
    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.x, self.y, self.z, self.yaw)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"pose components must be finite, got {vals}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "z", float(self.z))
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def horizontal_distance(self, other: "Pose3") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.z, self.yaw]


class ObjectKind(str, Enum):
    BOX = "box"
    HURDLE = "hurdle"
    WALL = "wall"
    PLATFORM = "platform"


class PushClass(str, Enum):
    LIGHT = "light"
    HEAVY = "heavy"


FIXED_KINDS = frozenset({ObjectKind.WALL, ObjectKind.PLATFORM, ObjectKind.HURDLE})
OCCLUDING_KINDS = frozenset({ObjectKind.WALL, ObjectKind.HURDLE})


@dataclass(frozen=True)
class SceneObject:
    id: str
    kind: ObjectKind
    pose: Pose3
    size: tuple[float, float, float]
    movable: bool = False
    push_class: PushClass = PushClass.LIGHT

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ObjectKind(self.kind))
        object.__setattr__(self, "push_class", PushClass(self.push_class))
        size = tuple(float(s) for s in self.size)
        if len(size) != 3:
            raise ScenarioError(f"{self.id}: size must have three components")
        if not all(math.isfinite(s) and s > 0 for s in size):
            raise ScenarioError(f"{self.id}: size components strictly positive")
        object.__setattr__(self, "size", size)
        if self.kind in FIXED_KINDS and self.movable:
            raise ScenarioError(f"{self.id}: a {self.kind.value} cannot be movable")

    @property
    def top(self) -> float:
        return self.pose.z + self.size[2]

    @property
    def height(self) -> float:
        return self.size[2]

    @cached_property
    def footprint(self) -> Polygon:
        return Polygon(self.corners())

    def corners(self) -> np.ndarray:
        hl, hw = self.size[0] / 2.0, self.size[1] / 2.0
        c, s = math.cos(self.pose.yaw), math.sin(self.pose.yaw)
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.pose.x, self.pose.y])

    def half_extent_along(self, ux: float, uy: float) -> float:
        """Support distance of the footprint along the unit direction (ux, uy)."""
        c, s = math.cos(self.pose.yaw), math.sin(self.pose.yaw)
        along = abs(ux * c + uy * s)
        across = abs(-ux * s + uy * c)
        return along * self.size[0] / 2.0 + across * self.size[1] / 2.0

    def contains_xy(self, x: float, y: float) -> bool:
        return bool(shapely.intersects_xy(self.footprint, x, y))

    def with_pose(self, pose: Pose3) -> "SceneObject":
        return replace(self, pose=pose)

    def with_size(self, size: tuple[float, float, float]) -> "SceneObject":
        return replace(self, size=size)


@dataclass(frozen=True)
class ConstraintSet:
    max_climb_height: float = 0.3
    sim_time_budget: float = 120.0

    def __post_init__(self) -> None:
        if not (self.max_climb_height > 0 and self.sim_time_budget > 0):
            raise ScenarioError("constraints must be strictly positive")


@dataclass(frozen=True)
class Bounds:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self) -> None:
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ScenarioError("bounds must have positive extent")

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    @cached_property
    def polygon(self) -> Polygon:
        return shapely.box(self.xmin, self.ymin, self.xmax, self.ymax)

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


@dataclass(frozen=True)
class Scenario:
    id: str
    objects: tuple[SceneObject, ...]
    robot_start: Pose3
    goal: Pose3
    bounds: Bounds
    constraints: ConstraintSet = ConstraintSet()

    def __post_init__(self) -> None:
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ScenarioError(f"object ids must be unique, duplicated: {dup}")
        for name, pose in (("robot_start", self.robot_start), ("goal", self.goal)):
            if not self.bounds.contains(pose.x, pose.y):
                raise ScenarioError(f"{name} lies outside bounds")
        outer = self.bounds.polygon.buffer(1e-9)
        for o in self.objects:
            if not outer.contains(o.footprint):
                raise ScenarioError(f"object {o.id} footprint lies outside bounds")

    def object(self, object_id: str) -> SceneObject:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)


# -- serialization ------------------------------------------------------------


def _require(d: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in d:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return d[key]


def _pose(value: Any, where: str) -> Pose3:
    if not isinstance(value, (list, tuple)) or len(value) not in (3, 4):
        raise ScenarioError(f"{where}: expected [x, y, z] or [x, y, z, yaw]")
    try:
        return Pose3(*[float(v) for v in value])
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


def scenario_from_dict(doc: Mapping[str, Any]) -> Scenario:
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be a JSON object")
    b = _require(doc, "bounds", "scenario")
    if not isinstance(b, (list, tuple)) or len(b) != 4:
        raise ScenarioError("bounds: expected [xmin, ymin, xmax, ymax]")
    bounds = Bounds(*[float(v) for v in b])
    c = doc.get("constraints", {})
    constraints = ConstraintSet(
        max_climb_height=float(c.get("max_climb_height", 0.3)),
        sim_time_budget=float(c.get("sim_time_budget", 120.0)),
    )
    objects = []
    for i, od in enumerate(_require(doc, "objects", "scenario")):
        where = f"objects[{i}]"
        try:
            objects.append(
                SceneObject(
                    id=str(_require(od, "id", where)),
                    kind=ObjectKind(_require(od, "kind", where)),
                    pose=_pose(_require(od, "pose", where), f"{where}.pose"),
                    size=tuple(_require(od, "size", where)),
                    movable=bool(od.get("movable", False)),
                    push_class=PushClass(od.get("push_class", "light")),
                )
            )
        except ScenarioError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
        except ValueError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    return Scenario(
        id=str(_require(doc, "scenario_id", "scenario")),
        objects=tuple(objects),
        robot_start=_pose(_require(doc, "robot_start", "scenario"), "robot_start"),
        goal=_pose(_require(doc, "goal", "scenario"), "goal"),
        bounds=bounds,
        constraints=constraints,
    )


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    return {
        "scenario_id": scenario.id,
        "bounds": scenario.bounds.as_list(),
        "robot_start": scenario.robot_start.as_list(),
        "goal": scenario.goal.as_list(),
        "constraints": {
            "max_climb_height": scenario.constraints.max_climb_height,
            "sim_time_budget": scenario.constraints.sim_time_budget,
        },
        "objects": [
            {
                "id": o.id,
                "kind": o.kind.value,
                "pose": o.pose.as_list(),
                "size": list(o.size),
                "movable": o.movable,
                "push_class": o.push_class.value,
            }
            for o in scenario.objects
        ],
    }


def load_scenario(path: str | Path) -> Scenario:
    """Read and validate a scenario JSON file."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return scenario_from_dict(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


# -- simulation state -----------------------------------------------------------


def support_height(objects: Iterable[SceneObject], x: float, y: float) -> float:
    """Height of the highest surface under (x, y); the ground is at 0."""
    h = 0.0
    for o in objects:
        if o.top > h and o.contains_xy(x, y):
            h = o.top
    return h


@dataclass
class World:
    """Ground-truth simulation state. Mutated by the skill executors."""

    scenario: Scenario
    objects: dict[str, SceneObject]
    robot: Pose3

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "World":
        start = scenario.robot_start
        objs = {o.id: o for o in scenario.objects}
        z = support_height(objs.values(), start.x, start.y)
        return cls(scenario=scenario, objects=objs, robot=replace(start, z=z))

    @property
    def bounds(self) -> Bounds:
        return self.scenario.bounds

    @property
    def constraints(self) -> ConstraintSet:
        return self.scenario.constraints

    @property
    def goal(self) -> Pose3:
        return self.scenario.goal

    def object_list(self) -> list[SceneObject]:
        return [self.objects[k] for k in sorted(self.objects)]

    def support_height(self, x: float, y: float, exclude: Iterable[str] = ()) -> float:
        skip = set(exclude)
        return support_height((o for o in self.objects.values() if o.id not in skip), x, y)


@dataclass(frozen=True)
class BeliefObject:
    obj: SceneObject
    observed_movable: bool | None = None
    last_seen_time: float = 0.0
    obs_distance: float = math.inf
    size_sigma: float = 0.0


@dataclass
class BeliefState:
    known_objects: dict[str, BeliefObject]
    robot_pose: Pose3
    goal: Pose3
    bounds: Bounds
    constraints: ConstraintSet = ConstraintSet()

    @classmethod
    def initial(cls, scenario: Scenario, robot_pose: Pose3 | None = None) -> "BeliefState":
        return cls(
            known_objects={},
            robot_pose=robot_pose or scenario.robot_start,
            goal=scenario.goal,
            bounds=scenario.bounds,
            constraints=scenario.constraints,
        )

    @classmethod
    def omniscient(cls, world: World) -> "BeliefState":
        """A belief holding exact copies of every world object."""
        known = {
            oid: BeliefObject(
                obj=o,
                observed_movable=None,
                obs_distance=0.0,
            )
            for oid, o in world.objects.items()
        }
        return cls(known, world.robot, world.goal, world.bounds, world.constraints)

    def copy(self) -> "BeliefState":
        return BeliefState(
            dict(self.known_objects), self.robot_pose, self.goal, self.bounds, self.constraints
        )

    def object_list(self) -> list[SceneObject]:
        return [self.known_objects[k].obj for k in sorted(self.known_objects)]

    def geometry_key(self) -> tuple[SceneObject, ...]:
        return tuple(self.object_list())

    def get(self, object_id: str) -> SceneObject | None:
        bo = self.known_objects.get(object_id)
        return bo.obj if bo else None

    def support_height(self, x: float, y: float, exclude: Iterable[str] = ()) -> float:
        skip = set(exclude)
        return support_height(
            (b.obj for k, b in self.known_objects.items() if k not in skip), x, y
        )

    def set_object_pose(self, object_id: str, pose: Pose3) -> None:
        bo = self.known_objects[object_id]
        self.known_objects[object_id] = replace(bo, obj=bo.obj.with_pose(pose))

    def record_movability(self, object_id: str, movable: bool) -> None:
        bo = self.known_objects[object_id]
        self.known_objects[object_id] = replace(bo, observed_movable=movable)

    def is_usable_box(self, object_id: str) -> bool:
        bo = self.known_objects.get(object_id)
        return (
            bo is not None
            and bo.obj.kind == ObjectKind.BOX
            and bo.observed_movable is not False
        )


# -- observation --------------------------------------------------------------


@dataclass(frozen=True)
class FovParams:
    radius: float = 6.0
    half_angle: float = math.pi / 3.0
    noise_k: float = 0.02

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("fov radius must be positive")
        if not (0 < self.half_angle <= math.pi):
            raise ValueError("fov half_angle must lie in (0, pi]")


@dataclass(frozen=True)
class ObservedEntry:
    id: str
    status: str  # "NEW" | "UPDATED"
    distance: float
    changed: bool


@dataclass(frozen=True)
class ObservationDelta:
    entries: tuple[ObservedEntry, ...] = ()

    @property
    def new_ids(self) -> list[str]:
        return [e.id for e in self.entries if e.status == "NEW"]

    @property
    def changed_ids(self) -> list[str]:
        return [e.id for e in self.entries if e.status == "UPDATED" and e.changed]

    def __bool__(self) -> bool:
        return bool(self.entries)


def _sample_points(obj: SceneObject, spacing: float = 0.3) -> np.ndarray:
    nl = max(2, int(math.ceil(obj.size[0] / spacing)) + 1)
    nw = max(2, int(math.ceil(obj.size[1] / spacing)) + 1)
    # the centre plus a lattice over the footprint, edges included
    u = np.linspace(-0.5, 0.5, nl) * obj.size[0]
    v = np.linspace(-0.5, 0.5, nw) * obj.size[1]
    uu, vv = np.meshgrid(u, v, indexing="ij")
    local = np.column_stack([np.concatenate([[0.0], uu.ravel()]), np.concatenate([[0.0], vv.ravel()])])
    c, s = math.cos(obj.pose.yaw), math.sin(obj.pose.yaw)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([obj.pose.x, obj.pose.y])


def _visible_distance(
    obj: SceneObject,
    robot: Pose3,
    fov: FovParams,
    occluders: list[SceneObject],
) -> float | None:
    """Distance to the nearest visible footprint point, or None if unseen."""
    pts = _sample_points(obj)
    d = pts - np.array([robot.x, robot.y])
    dist = np.hypot(d[:, 0], d[:, 1])
    bearing = np.arctan2(d[:, 1], d[:, 0]) - robot.yaw
    bearing = (bearing + math.pi) % (2 * math.pi) - math.pi
    in_fov = (dist <= fov.radius) & ((np.abs(bearing) <= fov.half_angle) | (dist < 1e-9))
    if not in_fov.any():
        return None
    pts, dist = pts[in_fov], dist[in_fov]
    order = np.argsort(dist, kind="stable")
    pts, dist = pts[order], dist[order]
    if not occluders:
        return float(dist[0])
    lines = shapely.linestrings(
        [[(robot.x, robot.y), (float(p[0]), float(p[1]))] for p in pts]
    )
    blocked = np.zeros(len(pts), dtype=bool)
    for occ in occluders:
        blocked |= shapely.intersects(lines, occ.footprint)
    free = np.flatnonzero(~blocked)
    if free.size == 0:
        return None
    return float(dist[free[0]])


def observe(
    world: World | Scenario,
    belief: BeliefState,
    fov: FovParams,
    rng: np.random.Generator,
    time: float = 0.0,
) -> ObservationDelta:
    """Sense objects in the field of view and fold them into the belief.

    Each visible object receives a size sample perturbed per dimension by
    zero-mean Gaussian noise with standard deviation ``noise_k * d``. A known
    object's size is replaced only when the new observation is closer.
    """
    objects = world.object_list() if isinstance(world, World) else list(world.objects)
    objects.sort(key=lambda o: o.id)
    robot = belief.robot_pose
    entries = []
    for obj in objects:
        occluders = [
            o for o in objects if o.id != obj.id and o.kind in OCCLUDING_KINDS
        ]
        d = _visible_distance(obj, robot, fov, occluders)
        if d is None:
            continue
        sigma = fov.noise_k * d
        noise = rng.normal(0.0, 1.0, size=3) * sigma
        noisy = tuple(max(0.01, s + float(n)) for s, n in zip(obj.size, noise))
        prior = belief.known_objects.get(obj.id)
        if prior is None:
            belief.known_objects[obj.id] = BeliefObject(
                obj=obj.with_size(noisy),
                observed_movable=None,
                last_seen_time=time,
                obs_distance=d,
                size_sigma=sigma,
            )
            entries.append(ObservedEntry(obj.id, "NEW", d, True))
            continue
        changed = False
        updated = replace(prior, last_seen_time=time)
        if prior.obj.pose != obj.pose:
            updated = replace(updated, obj=updated.obj.with_pose(obj.pose))
            changed = True
        if d < prior.obs_distance:
            updated = replace(
                updated,
                obj=updated.obj.with_size(noisy),
                obs_distance=d,
                size_sigma=sigma,
            )
            changed = True
        belief.known_objects[obj.id] = updated
        entries.append(ObservedEntry(obj.id, "UPDATED", d, changed))
    return ObservationDelta(tuple(entries))


# -- queries --------------------------------------------------------------------


def is_goal_reached(
    robot_pose: Pose3,
    goal: Pose3,
    tol: float = GOAL_TOLERANCE,
    max_climb: float = 0.3,
) -> bool:
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    return (
        robot_pose.horizontal_distance(goal) <= tol + 1e-12
        and abs(robot_pose.z - goal.z) <= max_climb + 1e-12
    )


def _objects_and_frame(source: Any) -> tuple[list[SceneObject], Bounds, ConstraintSet]:
    if isinstance(source, BeliefState):
        return source.object_list(), source.bounds, source.constraints
    if isinstance(source, World):
        return source.object_list(), source.bounds, source.constraints
    if isinstance(source, Scenario):
        return sorted(source.objects, key=lambda o: o.id), source.bounds, source.constraints
    raise TypeError(f"unsupported world source: {type(source).__name__}")


def free_path_exists(
    source: Scenario | World | BeliefState,
    start: Pose3,
    goal: Pose3,
    robot_radius: float = ROBOT_RADIUS,
    cell: float = 0.1,
    snap: float = 0.35,
) -> bool:
    """True iff start and goal are connected on the traversability grid.

    Either end may sit up to ``snap`` from the nearest valid cell, which covers
    a robot standing in contact with an object.
    """
    from .grid import get_grid

    objects, bounds, constraints = _objects_and_frame(source)
    grid = get_grid(bounds, tuple(objects), cell, robot_radius, constraints.max_climb_height)
    return grid.connected(start.x, start.y, goal.x, goal.y, snap=snap, z0=start.z, z1=goal.z)


__all__ = [
    "Bounds",
    "BeliefObject",
    "BeliefState",
    "ConstraintSet",
    "FovParams",
    "GOAL_TOLERANCE",
    "ObjectKind",
    "ObservationDelta",
    "ObservedEntry",
    "Pose3",
    "PushClass",
    "ROBOT_RADIUS",
    "Scenario",
    "ScenarioError",
    "SceneObject",
    "World",
    "free_path_exists",
    "is_goal_reached",
    "load_scenario",
    "observe",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "support_height",
    "wrap_angle",
]
