"""Geometric reasoning used by the rule-based agents.

Resolves the symbolic parameter vocabulary to poses, searches push targets
that open a route, and simulates a skill's effect on a belief copy.
"""

from __future__ import annotations

import math
import re

import numpy as np
import shapely

from ..grid import TraversalGrid, add_object_heights, get_grid
from ..skills import Skill, SkillInvocation, SkillParams, belief_grid, contact_points, planning_geometry
from ..world import BeliefState, ObjectKind, Pose3, SceneObject


class UnresolvableSymbol(ValueError):
    pass


FACE_OFFSET = 0.2
PUSH_DISTANCES = tuple(round(0.6 + 0.3 * k, 2) for k in range(9))  # 0.6 .. 3.0 m
PUSH_DIRECTIONS = tuple(k * math.pi / 4.0 for k in range(8))

_PHRASE = re.compile(
    r"^\s*(?:(top|front|behind|left|right|base)\s+of|push\s+target\s+for)\s+([A-Za-z][\w\-]*)\s*$"
)


def _unit(dx: float, dy: float) -> tuple[float, float]:
    n = math.hypot(dx, dy)
    return (1.0, 0.0) if n < 1e-9 else (dx / n, dy / n)


def face_normal_toward(obj: SceneObject, x: float, y: float) -> tuple[float, float]:
    """Outward normal of the footprint face that best faces the point (x, y)."""
    c, s = math.cos(obj.pose.yaw), math.sin(obj.pose.yaw)
    normals = [(c, s), (-s, c), (-c, -s), (s, -c)]
    dx, dy = x - obj.pose.x, y - obj.pose.y
    # scale by the half extents so the chosen face is the one the point lies beyond
    hl, hw = obj.size[0] / 2.0, obj.size[1] / 2.0
    scores = [
        (dx * n[0] + dy * n[1]) / (hl if k % 2 == 0 else hw) for k, n in enumerate(normals)
    ]
    return normals[int(np.argmax(scores))]


def _ground_pose(belief: BeliefState, x: float, y: float, yaw: float = 0.0, exclude=()) -> Pose3:
    return Pose3(x, y, belief.support_height(x, y, exclude=exclude), yaw)


def resolve_symbol(
    inv: SkillInvocation,
    belief: BeliefState,
    robot: Pose3 | None = None,
    params: SkillParams = SkillParams(),
) -> Pose3:
    """Map a symbolic parameter to a concrete pose under ``belief``."""
    robot = robot or belief.robot_pose
    phrase = inv.symbolic_param.strip()
    if phrase == "goal":
        return belief.goal
    m = _PHRASE.match(phrase)
    if not m:
        raise UnresolvableSymbol(f"unknown phrase {phrase!r}")
    form, oid = m.group(1), m.group(2)
    obj = belief.get(oid)
    if obj is None:
        raise UnresolvableSymbol(f"unknown object {oid!r}")
    if inv.skill == Skill.PUSH and belief.get(inv.object_id) is None:
        raise UnresolvableSymbol(f"unknown object {inv.object_id!r}")

    if form is None:  # push target for <id>
        target = find_push_target(belief, oid, params)
        if target is None:
            raise UnresolvableSymbol(f"no push target opens a route for {oid}")
        return target
    if form == "top":
        return Pose3(obj.pose.x, obj.pose.y, obj.top, robot.yaw)
    if form == "base":
        nx, ny = face_normal_toward(obj, robot.x, robot.y)
        if inv.skill == Skill.PUSH:
            pushed = belief.get(inv.object_id)
            off = pushed.half_extent_along(nx, ny) + params.contact_gap
            d = obj.half_extent_along(nx, ny) + off
            return Pose3(obj.pose.x + nx * d, obj.pose.y + ny * d, pushed.pose.z, pushed.pose.yaw)
        d = obj.half_extent_along(nx, ny) + params.robot_radius + FACE_OFFSET
        x, y = obj.pose.x + nx * d, obj.pose.y + ny * d
        return _ground_pose(belief, x, y, math.atan2(-ny, -nx))
    ux, uy = _unit(obj.pose.x - robot.x, obj.pose.y - robot.y)
    dirs = {
        "front": (-ux, -uy),
        "behind": (ux, uy),
        "left": (-uy, ux),
        "right": (uy, -ux),
    }
    nx, ny = dirs[form]
    d = obj.half_extent_along(nx, ny) + params.robot_radius + FACE_OFFSET
    x, y = obj.pose.x + nx * d, obj.pose.y + ny * d
    return _ground_pose(belief, x, y, math.atan2(-ny, -nx), exclude=(oid,))


# -- push target search ---------------------------------------------------------


def sweep_clear(belief: BeliefState, obj: SceneObject, target: Pose3) -> bool:
    moved = obj.with_pose(target)
    hull = shapely.union(obj.footprint, moved.footprint).convex_hull
    if not belief.bounds.polygon.buffer(1e-9).contains(moved.footprint):
        return False
    for o in belief.object_list():
        if o.id != obj.id and hull.intersection(o.footprint).area > 1e-9:
            return False
    return True


def _robot_line_clear(grid: TraversalGrid, a: tuple[float, float], b: tuple[float, float]) -> bool:
    n = max(1, int(math.ceil(math.hypot(b[0] - a[0], b[1] - a[1]) / (grid.cell * 0.5))))
    prev = grid.cell_of(*a)
    for k in range(1, n + 1):
        t = k / n
        cur = grid.cell_of(a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t)
        if grid.step_violation(prev, cur) is not None:
            return False
        prev = cur
    return True


def find_push_target(
    belief: BeliefState,
    box_id: str,
    params: SkillParams = SkillParams(),
    verify_opening: bool = True,
) -> Pose3 | None:
    """Nearest box displacement that leaves a route from the robot to the goal.

    Candidates are the eight compass directions at distances 0.6 m to 3.0 m.
    A candidate must sweep clear of other objects, have a reachable contact
    point and, when ``verify_opening`` is set, open a route to the goal.
    Among the shortest working distance the cheapest detour wins.
    """
    box = belief.get(box_id)
    if box is None:
        return None
    robot, goal = belief.robot_pose, belief.goal
    climb = belief.constraints.max_climb_height
    planned = planning_geometry(belief)
    others = tuple(o for o in planned if o.id != box_id)
    inflated = next(o for o in planned if o.id == box_id)
    base = get_grid(belief.bounds, others, params.cell, params.plan_radius, climb)
    # the push stroke is checked at the true body radius against the nominal geometry
    nominal = tuple(o for o in belief.object_list() if o.id != box_id)
    body = get_grid(belief.bounds, nominal, params.cell, params.robot_radius, climb)
    current = belief_grid(belief, params)
    start = current.nearest_valid(robot.x, robot.y, params.start_snap, robot.z)
    if start is None:
        return None
    for dist in PUSH_DISTANCES:
        found = []
        for k, ang in enumerate(PUSH_DIRECTIONS):
            ux, uy = math.cos(ang), math.sin(ang)
            target = Pose3(box.pose.x + ux * dist, box.pose.y + uy * dist, box.pose.z, box.pose.yaw)
            if not sweep_clear(belief, box, target):
                continue
            contact, pre = contact_points(box, ux, uy, params)
            pc = current.nearest_valid(pre[0], pre[1], params.start_snap, box.pose.z)
            if pc is None or current.labels[pc] != current.labels[start]:
                continue
            end = (contact[0] + ux * dist, contact[1] + uy * dist)
            if not _robot_line_clear(body, contact, end):
                continue
            if verify_opening:
                heights = base.heights.copy()
                add_object_heights(heights, inflated.with_pose(target), belief.bounds, params.cell)
                g = TraversalGrid(belief.bounds, heights, params.cell, params.plan_radius, climb)
                a = g.nearest_valid(end[0], end[1], params.start_snap, box.pose.z)
                b = g.nearest_valid(goal.x, goal.y, params.target_snap, goal.z)
                if a is None or b is None or g.labels[a] != g.labels[b]:
                    continue
            cost = math.hypot(pre[0] - robot.x, pre[1] - robot.y) + math.hypot(
                goal.x - end[0], goal.y - end[1]
            )
            found.append((cost, k, target))
        if found:
            return min(found, key=lambda c: (c[0], c[1]))[2]
    return None


def naive_push_target(belief: BeliefState, box_id: str, params: SkillParams = SkillParams()) -> Pose3 | None:
    """Push sideways to the start-goal line by 1.5 m without checking the result."""
    box = belief.get(box_id)
    if box is None:
        return None
    robot, goal = belief.robot_pose, belief.goal
    gx, gy = _unit(goal.x - robot.x, goal.y - robot.y)
    side = 1.0 if (box.pose.x - robot.x) * -gy + (box.pose.y - robot.y) * gx >= 0 else -1.0
    ux, uy = -gy * side, gx * side
    return Pose3(box.pose.x + 1.5 * ux, box.pose.y + 1.5 * uy, box.pose.z, box.pose.yaw)


# -- step simulation --------------------------------------------------------------


def simulate_step(inv: SkillInvocation, belief: BeliefState, params: SkillParams = SkillParams()) -> BeliefState:
    """Belief after ``inv`` succeeds, assuming ideal execution."""
    target = inv.resolved_target
    out = belief.copy()
    if target is None:
        return out
    r = belief.robot_pose
    if inv.skill == Skill.PUSH:
        obj = belief.get(inv.object_id)
        if obj is None:
            return out
        dx, dy = target.x - obj.pose.x, target.y - obj.pose.y
        length = math.hypot(dx, dy)
        out.set_object_pose(inv.object_id, target)
        if length > 1e-9:
            ux, uy = dx / length, dy / length
            contact, _ = contact_points(obj, ux, uy, params)
            ex, ey = contact[0] + dx, contact[1] + dy
            out.robot_pose = Pose3(ex, ey, out.support_height(ex, ey), math.atan2(uy, ux))
        return out
    yaw = math.atan2(target.y - r.y, target.x - r.x) if r.horizontal_distance(target) > 1e-9 else r.yaw
    out.robot_pose = Pose3(target.x, target.y, out.support_height(target.x, target.y), yaw)
    return out


def goal_support(belief: BeliefState) -> SceneObject | None:
    """The known object under the goal whose measured top is closest to the goal height.

    The goal height is given exactly while measured tops are noisy, so no
    tolerance is applied; a goal on the ground has no support.
    """
    g = belief.goal
    if g.z <= 1e-9:
        return None
    under = [o for o in belief.object_list() if o.contains_xy(g.x, g.y)]
    if not under:
        return None
    return min(under, key=lambda o: (abs(o.top - g.z), o.id))


def is_box(obj: SceneObject) -> bool:
    return obj.kind == ObjectKind.BOX
