"""Agent context: instructions plus a textual rendering of the belief."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..skills import SkillParams
from ..world import BeliefState, ConstraintSet, Pose3, free_path_exists

SKILL_LIBRARY = (
    "walk-to('target position')",
    "climb-to('target position')",
    "navigate-to('target position')",
    "push('object id','target position')",
)


def fmt_vec(values) -> str:
    return "[" + ", ".join(f"{v:.2f}" for v in values) + "]"


def describe_objects(belief: BeliefState) -> str:
    lines = []
    for o in belief.object_list():
        bo = belief.known_objects[o.id]
        if bo.observed_movable is False:
            movable = "false (failed to move when pushed)"
        else:
            movable = "true" if o.movable or o.kind.value == "box" else "false"
        lines.append(
            f"{o.id} ({o.kind.value}): position {fmt_vec((o.pose.x, o.pose.y, o.pose.z))}, "
            f"size {fmt_vec(o.size)}, movable: {movable}"
        )
    return "; ".join(lines) if lines else "no objects observed yet"


def describe_constraints(c: ConstraintSet) -> str:
    return (
        f"the maximum climbing height is {c.max_climb_height:.2f} m; "
        f"the task must finish within {c.sim_time_budget:.0f} s of simulation time"
    )


def summarize_scene(belief: BeliefState, params: SkillParams) -> str:
    r, g = belief.robot_pose, belief.goal
    kinds: dict[str, int] = {}
    for o in belief.object_list():
        kinds[o.kind.value] = kinds.get(o.kind.value, 0) + 1
    seen = ", ".join(f"{k} x{n}" for k, n in sorted(kinds.items()))
    open_path = free_path_exists(belief, r, g, robot_radius=params.plan_radius, cell=params.cell)
    dist = math.hypot(g.x - r.x, g.y - r.y)
    return (
        f"the robot stands at {fmt_vec((r.x, r.y, r.z))} facing {math.degrees(r.yaw):.0f} degrees; "
        f"the goal is {dist:.2f} m away at height {g.z:.2f} m; "
        f"visible objects: {seen or 'none'}; "
        f"a collision-free route to the goal {'exists' if open_path else 'does not exist'} in the current map"
    )


@dataclass
class AgentContext:
    goal: Pose3
    skill_library: tuple[str, ...]
    constraints: ConstraintSet
    scene_summary: str
    object_descriptions: str
    belief: BeliefState = field(repr=False)
    params: SkillParams = field(default_factory=SkillParams, repr=False)

    @classmethod
    def from_belief(cls, belief: BeliefState, params: SkillParams = SkillParams()) -> "AgentContext":
        return cls(
            goal=belief.goal,
            skill_library=SKILL_LIBRARY,
            constraints=belief.constraints,
            scene_summary=summarize_scene(belief, params),
            object_descriptions=describe_objects(belief),
            belief=belief,
            params=params,
        )

    @property
    def known_ids(self) -> set[str]:
        return set(self.belief.known_objects)

    def slots(self) -> dict[str, str]:
        return {
            "goal point": fmt_vec((self.goal.x, self.goal.y, self.goal.z)),
            "scene understanding": self.scene_summary,
            "object description": self.object_descriptions,
            "skill library": ", ".join(self.skill_library),
            "constraints": describe_constraints(self.constraints),
            "robot pose": fmt_vec(
                (self.belief.robot_pose.x, self.belief.robot_pose.y, self.belief.robot_pose.z)
            ),
        }
