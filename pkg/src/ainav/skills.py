"""Kinematic executors for the walk, climb, navigate and push skills.

The executors advance a ground-truth :class:`~ainav.world.World` in fixed
time steps. Collisions are judged on the world's traversability grid at the
true robot radius; planning (navigate, push approach) uses the belief grid
with an extra safety margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .grid import TraversalGrid, get_grid
from .world import (
    ROBOT_RADIUS,
    BeliefState,
    ConstraintSet,
    ObjectKind,
    Pose3,
    PushClass,
    World,
)


class Skill(str, Enum):
    WALK = "walk"
    CLIMB = "climb"
    NAVIGATE = "navigate"
    PUSH = "push"


@dataclass(frozen=True)
class SkillInvocation:
    skill: Skill
    symbolic_param: str
    resolved_target: Pose3 | None = None
    object_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "skill", Skill(self.skill))
        if self.skill == Skill.PUSH and not self.object_id:
            raise ValueError("push requires an object_id")
        if self.skill != Skill.PUSH and self.object_id is not None:
            raise ValueError(f"{self.skill.value} takes no object_id")

    def resolved(self, target: Pose3) -> "SkillInvocation":
        return replace(self, resolved_target=target)

    @property
    def key(self) -> tuple[str, str, str | None]:
        return (self.skill.value, self.symbolic_param, self.object_id)

    def to_dict(self) -> dict:
        t = self.resolved_target
        return {
            "skill": self.skill.value,
            "symbolic_param": self.symbolic_param,
            "object_id": self.object_id,
            "resolved_target": None if t is None else [round(v, 6) for v in t.as_list()],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SkillInvocation":
        t = d.get("resolved_target")
        return cls(
            skill=Skill(d["skill"]),
            symbolic_param=d["symbolic_param"],
            resolved_target=None if t is None else Pose3(*t),
            object_id=d.get("object_id"),
        )

    def __str__(self) -> str:
        if self.skill == Skill.PUSH:
            return f"push('{self.object_id}','{self.symbolic_param}')"
        return f"{self.skill.value}-to('{self.symbolic_param}')"


class OutcomeStatus(str, Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"


class FailureCause(str, Enum):
    STALL = "Stall"
    INFEASIBLE = "Infeasible"
    COLLISION = "Collision"
    TIMEOUT = "Timeout"


@dataclass
class SkillOutcome:
    status: OutcomeStatus
    failure_cause: FailureCause | None = None
    elapsed_sim_time: float = 0.0
    trajectory: list[tuple[float, Pose3]] = field(default_factory=list)
    moved_objects: dict[str, Pose3] = field(default_factory=dict)
    # the robot ended in a state it cannot recover from (fell, stepped into a void)
    irrecoverable: bool = False
    # stopped because the caller's time limit ran out, not the per-skill budget
    interrupted: bool = False
    detail: str = ""

    def __post_init__(self) -> None:
        if self.status == OutcomeStatus.SUCCESS and self.failure_cause is not None:
            raise ValueError("a successful outcome carries no failure cause")

    @property
    def success(self) -> bool:
        return self.status == OutcomeStatus.SUCCESS


@dataclass(frozen=True)
class SkillParams:
    walk_speed: float = 1.0
    navigate_speed: float = 1.0
    push_speed: float = 0.5
    climb_duration: float = 2.0
    dt: float = 0.05
    skill_budget: float = 30.0
    stall_window: float = 2.0
    goal_tol: float = 0.15
    push_tol: float = 0.2
    climb_reach: float = 1.5
    support_tol: float = 0.05
    robot_radius: float = ROBOT_RADIUS
    plan_margin: float = 0.1
    cell: float = 0.1
    contact_gap: float = 0.02
    sense_period: float = 0.5
    start_snap: float = 0.35
    target_snap: float = 0.15

    def __post_init__(self) -> None:
        for name in ("walk_speed", "navigate_speed", "push_speed", "dt", "skill_budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def plan_radius(self) -> float:
        return self.robot_radius + self.plan_margin


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.feasible


SenseHook = Callable[[float], None]


# -- grids ----------------------------------------------------------------------


def world_grid(world: World, params: SkillParams, exclude: tuple[str, ...] = ()) -> TraversalGrid:
    objs = tuple(o for o in world.object_list() if o.id not in exclude)
    return get_grid(
        world.bounds, objs, params.cell, params.robot_radius, world.constraints.max_climb_height
    )


def belief_grid(
    belief: BeliefState, params: SkillParams, radius: float | None = None
) -> TraversalGrid:
    """Planning grid over the belief; footprints grow by two sigma of their size noise."""
    r = params.plan_radius if radius is None else radius
    return get_grid(
        belief.bounds, planning_geometry(belief), params.cell, r, belief.constraints.max_climb_height
    )


def planning_geometry(belief: BeliefState) -> tuple:
    out = []
    for o in belief.object_list():
        grow = 2.0 * belief.known_objects[o.id].size_sigma
        out.append(o if grow <= 0 else o.with_size((o.size[0] + grow, o.size[1] + grow, o.size[2])))
    return tuple(out)


def plan_path(
    grid: TraversalGrid,
    start: tuple[float, float],
    goal: tuple[float, float],
    params: SkillParams,
    goal_snap: float | None = None,
    start_z: float | None = None,
    goal_z: float | None = None,
) -> list[tuple[float, float]] | None:
    """Smoothed waypoint path from ``start`` to ``goal`` on ``grid`` or None."""
    a = grid.nearest_valid(*start, params.start_snap, start_z)
    b = grid.nearest_valid(*goal, params.target_snap if goal_snap is None else goal_snap, goal_z)
    if a is None or b is None:
        return None
    cells = grid.astar(a, b)
    if cells is None:
        return None
    pts = grid.smooth(cells)
    if cells[-1] == grid.cell_of(*goal):
        pts[-1] = goal
    # begin from the true position; keep the snapped cell only when it differs
    if a == grid.cell_of(*start) and len(pts) > 1:
        return [start] + pts[1:]
    return [start] + pts


# -- motion primitive -----------------------------------------------------------


class _Motion:
    """Fixed-step integrator shared by the executors."""

    def __init__(
        self,
        world: World,
        belief: BeliefState,
        params: SkillParams,
        sense: SenseHook | None,
        time_limit: float | None,
    ) -> None:
        self.world = world
        self.belief = belief
        self.params = params
        self.sense = sense
        self.steps = 0
        self.trajectory: list[tuple[float, Pose3]] = []
        self.moved: dict[str, Pose3] = {}
        self.limit = params.skill_budget
        self.interrupt = False
        if time_limit is not None and time_limit < self.limit:
            self.limit = max(0.0, time_limit)
            self.interrupt = True
        self._next_sense = params.sense_period

    @property
    def t(self) -> float:
        return self.steps * self.params.dt

    def out_of_time(self) -> bool:
        return self.t + self.params.dt > self.limit + 1e-9

    def tick(self, pose: Pose3) -> None:
        self.steps += 1
        self.world.robot = pose
        self.belief.robot_pose = pose
        self.trajectory.append((self.t, pose))
        if self.sense is not None and self.t >= self._next_sense - 1e-9:
            self._next_sense += self.params.sense_period
            self.sense(self.t)

    def hold(self) -> None:
        """Spend one step without moving (e.g. straining against a heavy box)."""
        self.tick(self.world.robot)

    def outcome(self, cause: FailureCause | None = None, **kw) -> SkillOutcome:
        if cause is None:
            status = OutcomeStatus.SUCCESS
        else:
            status = OutcomeStatus.FAILURE
        interrupted = cause == FailureCause.TIMEOUT and self.interrupt
        return SkillOutcome(
            status=status,
            failure_cause=cause,
            elapsed_sim_time=self.t,
            trajectory=list(self.trajectory),
            moved_objects=dict(self.moved),
            interrupted=interrupted,
            **kw,
        )

    def timeout(self) -> SkillOutcome:
        return self.outcome(FailureCause.TIMEOUT, detail="time limit reached")

    def move_line(
        self,
        goal: tuple[float, float],
        speed: float,
        grid_fn: Callable[[], TraversalGrid],
        fall_on_drop: bool,
        yaw: float | None = None,
        on_sense: Callable[[], bool] | None = None,
    ) -> SkillOutcome | None:
        """Advance in a straight line to ``goal``. Returns an outcome on failure.

        ``on_sense`` is polled after each sensing tick; returning True aborts
        the segment early with None so the caller can replan.
        """
        p = self.params
        step = speed * p.dt
        while True:
            r = self.world.robot
            dx, dy = goal[0] - r.x, goal[1] - r.y
            dist = math.hypot(dx, dy)
            if dist <= 1e-9:
                return None
            if self.out_of_time():
                return self.timeout()
            k = min(1.0, step / dist)
            nx, ny = r.x + dx * k, r.y + dy * k
            grid = grid_fn()
            why = grid.step_violation(grid.cell_of(r.x, r.y), grid.cell_of(nx, ny))
            if why == "drop" and fall_on_drop:
                z = self.world.support_height(nx, ny)
                self.tick(Pose3(nx, ny, z, r.yaw if yaw is None else yaw))
                return self.outcome(
                    FailureCause.COLLISION, irrecoverable=True, detail="fell from a ledge"
                )
            if why is not None:
                return self.outcome(FailureCause.COLLISION, detail=f"blocked ({why})")
            heading = math.atan2(dy, dx) if yaw is None else yaw
            sensed_before = self._next_sense
            self.tick(Pose3(nx, ny, self.world.support_height(nx, ny), heading))
            if on_sense is not None and self._next_sense != sensed_before and on_sense():
                return None

    def follow(
        self,
        goal: tuple[float, float],
        speed: float,
        snap: float,
        goal_z: float | None = None,
    ) -> SkillOutcome | None:
        """Plan on the belief grid and follow the path, replanning when the belief changes."""
        p = self.params
        wgrid = lambda: world_grid(self.world, p)  # noqa: E731
        while True:
            r = self.world.robot
            if math.hypot(goal[0] - r.x, goal[1] - r.y) <= 1e-9:
                return None
            grid = belief_grid(self.belief, p)
            path = plan_path(grid, r.xy, goal, p, goal_snap=snap, start_z=r.z, goal_z=goal_z)
            if path is None:
                return self.outcome(FailureCause.INFEASIBLE, detail="no path in belief")
            key = self.belief.geometry_key()
            stale = False

            def changed() -> bool:
                nonlocal stale
                if self.belief.geometry_key() == key:
                    return False
                g = belief_grid(self.belief, p)
                here = self.world.robot.xy
                rest = [here] + path[idx + 1 :]
                for a, b in zip(rest, rest[1:]):
                    if not g.segment_clear(a, b) and a is not here:
                        stale = True
                        return True
                return False

            for idx in range(1, len(path)):
                res = self.move_line(path[idx], speed, wgrid, fall_on_drop=False, on_sense=changed)
                if res is not None:
                    return res
                if stale:
                    break
            else:
                return None


# -- executors ------------------------------------------------------------------


def _target_required(target: Pose3 | None) -> Pose3:
    if target is None:
        raise ValueError("resolved target required before execution")
    return target


def execute_walk(
    world: World,
    belief: BeliefState,
    target: Pose3,
    speed: float | None = None,
    dt: float | None = None,
    params: SkillParams = SkillParams(),
    sense: SenseHook | None = None,
    time_limit: float | None = None,
) -> SkillOutcome:
    """Straight-line walk toward ``target``; obstacles are not avoided."""
    target = _target_required(target)
    params = replace(params, dt=dt or params.dt)
    m = _Motion(world, belief, params, sense, time_limit)
    res = m.move_line(
        target.xy, speed or params.walk_speed, lambda: world_grid(world, params), fall_on_drop=True
    )
    if res is not None:
        return res
    return m.outcome()


def execute_navigate(
    world: World,
    belief: BeliefState,
    target: Pose3,
    speed: float | None = None,
    dt: float | None = None,
    params: SkillParams = SkillParams(),
    sense: SenseHook | None = None,
    time_limit: float | None = None,
) -> SkillOutcome:
    """Follow an A* path planned on the belief grid to ``target``."""
    target = _target_required(target)
    params = replace(params, dt=dt or params.dt)
    if not world.bounds.contains(target.x, target.y):
        return SkillOutcome(OutcomeStatus.FAILURE, FailureCause.INFEASIBLE, detail="target out of bounds")
    m = _Motion(world, belief, params, sense, time_limit)
    res = m.follow(target.xy, speed or params.navigate_speed, params.target_snap, target.z)
    if res is not None:
        return res
    r = world.robot
    climb = world.constraints.max_climb_height
    if r.horizontal_distance(target) <= params.goal_tol + 1e-9 and abs(r.z - target.z) <= climb + 1e-9:
        return m.outcome()
    return m.outcome(FailureCause.INFEASIBLE, detail="ended away from target")


def execute_climb(
    world: World,
    belief: BeliefState,
    target: Pose3,
    speed: float | None = None,
    dt: float | None = None,
    params: SkillParams = SkillParams(),
    sense: SenseHook | None = None,
    time_limit: float | None = None,
) -> SkillOutcome:
    """Step up or down onto the surface at ``target``. ``speed`` is unused."""
    target = _target_required(target)
    params = replace(params, dt=dt or params.dt)
    climb = world.constraints.max_climb_height
    r = world.robot
    fail = lambda detail, **kw: SkillOutcome(  # noqa: E731
        OutcomeStatus.FAILURE, FailureCause.INFEASIBLE, detail=detail, **kw
    )
    if r.horizontal_distance(target) > params.climb_reach + 1e-9:
        return fail("target out of reach")
    surface = world.support_height(target.x, target.y)
    if abs(target.z - surface) > params.support_tol + 1e-9:
        if target.z - surface > climb:
            # nothing left where a surface was expected: the step lands in a void
            return fail("support vanished", irrecoverable=True)
        return fail("no supporting surface")
    if abs(surface - r.z) > climb + 1e-9:
        return fail("exceeds max climb")
    grid = world_grid(world, params)
    if not grid.valid[grid.cell_of(target.x, target.y)]:
        return fail("target surface obstructed")
    m = _Motion(world, belief, params, sense, time_limit)
    n = max(1, int(round(params.climb_duration / params.dt)))
    yaw = math.atan2(target.y - r.y, target.x - r.x) if r.horizontal_distance(target) > 1e-9 else r.yaw
    for k in range(1, n + 1):
        if m.out_of_time():
            return m.timeout()
        a = k / n
        z = r.z + (surface - r.z) * a
        m.tick(Pose3(r.x + (target.x - r.x) * a, r.y + (target.y - r.y) * a, z, yaw))
    return m.outcome()


def contact_points(world_obj, ux: float, uy: float, params: SkillParams):
    he = world_obj.half_extent_along(ux, uy)
    cx, cy = world_obj.pose.x, world_obj.pose.y
    d_contact = he + params.robot_radius + params.contact_gap
    d_pre = he + params.plan_radius + params.cell
    return (cx - ux * d_contact, cy - uy * d_contact), (cx - ux * d_pre, cy - uy * d_pre)


def execute_push(
    world: World,
    belief: BeliefState,
    object_id: str,
    target: Pose3,
    speed: float | None = None,
    dt: float | None = None,
    params: SkillParams = SkillParams(),
    sense: SenseHook | None = None,
    time_limit: float | None = None,
) -> SkillOutcome:
    """Approach the face opposite the push direction and push the box to ``target``."""
    target = _target_required(target)
    params = replace(params, dt=dt or params.dt)
    fail = lambda cause, detail: SkillOutcome(OutcomeStatus.FAILURE, cause, detail=detail)  # noqa: E731
    obj = world.objects.get(object_id)
    bo = belief.known_objects.get(object_id)
    if obj is None or bo is None:
        return fail(FailureCause.INFEASIBLE, f"unknown object {object_id}")
    if obj.kind != ObjectKind.BOX or not obj.movable:
        return fail(FailureCause.INFEASIBLE, f"{object_id} is not movable")
    if bo.observed_movable is False:
        return fail(FailureCause.INFEASIBLE, f"{object_id} is known to be immovable")
    dx, dy = target.x - obj.pose.x, target.y - obj.pose.y
    length = math.hypot(dx, dy)
    if length <= params.push_tol:
        return SkillOutcome(OutcomeStatus.SUCCESS)
    ux, uy = dx / length, dy / length
    contact, pre = contact_points(obj, ux, uy, params)

    m = _Motion(world, belief, params, sense, time_limit)
    res = m.follow(pre, params.navigate_speed, params.start_snap, obj.pose.z)
    if res is not None:
        if res.failure_cause == FailureCause.INFEASIBLE:
            res.detail = "contact point unreachable"
        return res
    others = lambda: world_grid(world, params, exclude=(object_id,))  # noqa: E731
    yaw = math.atan2(uy, ux)
    res = m.move_line(contact, params.walk_speed, others, fall_on_drop=False, yaw=yaw)
    if res is not None:
        return res

    start = world.objects[object_id].pose
    yaw0, dyaw = start.yaw, _yaw_delta(start.yaw, target.yaw)
    step = (speed or params.push_speed) * params.dt
    pushed = 0.0
    stalled = 0.0
    obstacles = [o for o in world.object_list() if o.id != object_id]
    grid = others()
    while pushed < length - 1e-9:
        if m.out_of_time():
            return m.timeout()
        if obj.push_class == PushClass.HEAVY:
            m.hold()
            stalled += params.dt
            if stalled >= params.stall_window - 1e-9:
                belief.record_movability(object_id, False)
                return m.outcome(FailureCause.STALL, detail=f"{object_id} did not move")
            continue
        s = min(step, length - pushed)
        a = (pushed + s) / length
        box_pose = Pose3(
            start.x + dx * a, start.y + dy * a, start.z, yaw0 + dyaw * a
        )
        moved = world.objects[object_id].with_pose(box_pose)
        if not world.bounds.polygon.buffer(1e-9).contains(moved.footprint) or any(
            moved.footprint.intersection(o.footprint).area > 1e-9 for o in obstacles
        ):
            if math.hypot(target.x - world.objects[object_id].pose.x, target.y - world.objects[object_id].pose.y) <= params.push_tol:
                return m.outcome()
            return m.outcome(FailureCause.COLLISION, detail=f"{object_id} jammed")
        r = world.robot
        nx, ny = r.x + ux * s, r.y + uy * s
        if grid.step_violation(grid.cell_of(r.x, r.y), grid.cell_of(nx, ny)) is not None:
            return m.outcome(FailureCause.COLLISION, detail="robot blocked while pushing")
        world.objects[object_id] = moved
        if object_id in belief.known_objects:
            belief.set_object_pose(object_id, box_pose)
        m.moved[object_id] = box_pose
        pushed += s
        m.tick(Pose3(nx, ny, world.support_height(nx, ny), yaw))
    return m.outcome()


def _yaw_delta(a: float, b: float) -> float:
    d = math.fmod(b - a + math.pi, 2 * math.pi)
    if d < 0:
        d += 2 * math.pi
    return d - math.pi


_EXECUTORS = {
    Skill.WALK: execute_walk,
    Skill.CLIMB: execute_climb,
    Skill.NAVIGATE: execute_navigate,
}


def execute(
    invocation: SkillInvocation,
    world: World,
    belief: BeliefState,
    params: SkillParams = SkillParams(),
    sense: SenseHook | None = None,
    time_limit: float | None = None,
) -> SkillOutcome:
    """Dispatch a resolved invocation to its executor."""
    target = _target_required(invocation.resolved_target)
    if invocation.skill == Skill.PUSH:
        return execute_push(
            world, belief, invocation.object_id, target, params=params, sense=sense, time_limit=time_limit
        )
    return _EXECUTORS[invocation.skill](
        world, belief, target, params=params, sense=sense, time_limit=time_limit
    )


# -- static feasibility -----------------------------------------------------------


def _supporting_sigma(belief: BeliefState, x: float, y: float) -> float:
    best, sigma = 0.0, 0.0
    for bo in belief.known_objects.values():
        if bo.obj.top > best and bo.obj.contains_xy(x, y):
            best, sigma = bo.obj.top, bo.size_sigma
    return sigma


def _walk_blocked(grid: TraversalGrid, start: Pose3, goal: Pose3, step: float) -> str | None:
    x, y = start.x, start.y
    while True:
        dx, dy = goal.x - x, goal.y - y
        dist = math.hypot(dx, dy)
        if dist <= 1e-9:
            return None
        k = min(1.0, step / dist)
        nx, ny = x + dx * k, y + dy * k
        why = grid.step_violation(grid.cell_of(x, y), grid.cell_of(nx, ny))
        if why is not None:
            return why
        x, y = nx, ny


def skill_feasible(
    invocation: SkillInvocation,
    belief: BeliefState,
    constraints: ConstraintSet | None = None,
    params: SkillParams = SkillParams(),
) -> FeasibilityVerdict:
    """Static check of an invocation against the belief, without simulating."""
    constraints = constraints or belief.constraints
    climb = constraints.max_climb_height
    target = invocation.resolved_target
    if target is None:
        return FeasibilityVerdict(False, "unresolved target")
    robot = belief.robot_pose
    if not belief.bounds.contains(target.x, target.y):
        return FeasibilityVerdict(False, "target out of bounds")
    skill = invocation.skill

    if skill == Skill.WALK:
        grid = belief_grid(belief, params, radius=params.robot_radius)
        why = _walk_blocked(grid, robot, target, params.walk_speed * params.dt)
        if why is not None:
            return FeasibilityVerdict(False, f"straight line blocked ({why})")
        return FeasibilityVerdict(True, "clear line")

    if skill == Skill.CLIMB:
        if robot.horizontal_distance(target) > params.climb_reach + 1e-9:
            return FeasibilityVerdict(False, "target out of reach")
        surface = belief.support_height(target.x, target.y)
        margin = 2.0 * _supporting_sigma(belief, target.x, target.y)
        if abs(target.z - surface) > params.support_tol + margin + 1e-9:
            return FeasibilityVerdict(False, "no supporting surface")
        if abs(target.z - robot.z) > climb + margin + 1e-9:
            return FeasibilityVerdict(False, "exceeds max climb")
        return FeasibilityVerdict(True, "within climb limit")

    if skill == Skill.NAVIGATE:
        grid = belief_grid(belief, params)
        a = grid.nearest_valid(robot.x, robot.y, params.start_snap, robot.z)
        b = grid.nearest_valid(target.x, target.y, params.target_snap, target.z)
        if a is None or b is None or grid.labels[a] != grid.labels[b]:
            return FeasibilityVerdict(False, "no path in belief")
        return FeasibilityVerdict(True, "path exists")

    bo = belief.known_objects.get(invocation.object_id)
    if bo is None:
        return FeasibilityVerdict(False, f"unknown object {invocation.object_id}")
    if bo.obj.kind != ObjectKind.BOX:
        return FeasibilityVerdict(False, f"{bo.obj.kind.value} is not movable")
    if bo.observed_movable is False:
        return FeasibilityVerdict(False, "known immovable")
    dx, dy = target.x - bo.obj.pose.x, target.y - bo.obj.pose.y
    length = math.hypot(dx, dy)
    if length <= params.push_tol:
        return FeasibilityVerdict(True, "already in place")
    _, pre = contact_points(bo.obj, dx / length, dy / length, params)
    grid = belief_grid(belief, params)
    a = grid.nearest_valid(robot.x, robot.y, params.start_snap, robot.z)
    b = grid.nearest_valid(pre[0], pre[1], params.start_snap, bo.obj.pose.z)
    if a is None or b is None or grid.labels[a] != grid.labels[b]:
        return FeasibilityVerdict(False, "contact point unreachable")
    return FeasibilityVerdict(True, "contact reachable")
