"""Procedural scenarios for the three interactive navigation tasks.

All dimensions are synthetic: a 10 m x 6 m arena, 1.0 m walls, a 0.45 m
hurdle and a 0.5 m platform. A seed only jitters box placement, so every
variant keeps the structure its difficulty level promises.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..world import Bounds, ConstraintSet, ObjectKind, Pose3, PushClass, Scenario, SceneObject

BOUNDS = Bounds(0.0, 0.0, 10.0, 6.0)
WALL_HEIGHT = 1.0
WALL_THICKNESS = 0.2
HURDLE_HEIGHT = 0.45
PLATFORM_HEIGHT = 0.5


class Task(str, Enum):
    BOX_OBSTRUCTION = "box_obstruction"
    BOX_USAGE = "box_usage"
    STAIR_BUILDING = "stair_building"


class Difficulty(str, Enum):
    L = "L"
    M = "M"
    H = "H"


@dataclass(frozen=True)
class TaskSpec:
    task: Task
    difficulty: Difficulty
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", Task(self.task))
        object.__setattr__(self, "difficulty", Difficulty(self.difficulty))

    @property
    def label(self) -> str:
        return f"{self.task.value}_{self.difficulty.value}"


def _block(oid: str, kind: ObjectKind, x0: float, x1: float, y0: float, y1: float, h: float, z: float = 0.0) -> SceneObject:
    return SceneObject(
        oid, kind, Pose3((x0 + x1) / 2.0, (y0 + y1) / 2.0, z, 0.0), (x1 - x0, y1 - y0, h)
    )


def _box(oid: str, x: float, y: float, size: tuple[float, float, float], heavy: bool = False) -> SceneObject:
    return SceneObject(
        oid,
        ObjectKind.BOX,
        Pose3(x, y, 0.0, 0.0),
        size,
        movable=True,
        push_class=PushClass.HEAVY if heavy else PushClass.LIGHT,
    )


def _wall_with_doors(x: float, doors: list[tuple[float, float]], prefix: str = "wall") -> list[SceneObject]:
    """Wall segments spanning the arena at ``x`` with the given y-intervals open."""
    edges = [BOUNDS.ymin]
    for lo, hi in sorted(doors):
        edges += [lo, hi]
    edges.append(BOUNDS.ymax)
    out = []
    half = WALL_THICKNESS / 2.0
    for k in range(0, len(edges), 2):
        y0, y1 = edges[k], edges[k + 1]
        if y1 - y0 > 1e-9:
            out.append(_block(f"{prefix}_{k // 2 + 1}", ObjectKind.WALL, x - half, x + half, y0, y1, WALL_HEIGHT))
    return out


def _box_obstruction(d: Difficulty, rng: np.random.Generator) -> tuple[list[SceneObject], Pose3, Pose3]:
    jitter = float(rng.uniform(-0.1, 0.1))
    if d == Difficulty.H:
        side = 1.0 if rng.random() < 0.5 else -1.0
        heavy_y, light_y = 3.0 + 1.2 * side, 3.0 - 1.2 * side
        objects = _wall_with_doors(5.0, [(1.2, 2.4), (3.6, 4.8)])
        objects += [
            _box("box_1", 4.5 + jitter, heavy_y, (0.6, 1.0, 0.5), heavy=True),
            _box("box_2", 4.5 - jitter, light_y, (0.6, 1.0, 0.5)),
        ]
        # start and goal lean toward the heavy box's doorway
        y = heavy_y
        return objects, Pose3(1.0, y, 0.0, 0.0), Pose3(9.0, y, 0.0, 0.0)
    objects = _wall_with_doors(5.0, [(2.4, 3.6)])
    if d == Difficulty.M:
        objects.append(_box("box_1", 4.5 + jitter, 3.0, (0.6, 1.4, 0.5)))
    else:
        objects.append(_box("box_1", 3.0 + jitter, 1.0, (0.6, 0.6, 0.5)))
    return objects, Pose3(1.0, 3.0, 0.0, 0.0), Pose3(9.0, 3.0, 0.0, 0.0)


def _box_usage(d: Difficulty, rng: np.random.Generator) -> tuple[list[SceneObject], Pose3, Pose3]:
    jx, jy = (float(v) for v in rng.uniform(-0.2, 0.2, size=2))
    hurdle = _block("hurdle_1", ObjectKind.HURDLE, 7.0, 8.2, BOUNDS.ymin, BOUNDS.ymax, HURDLE_HEIGHT)
    objects = [hurdle]
    if d == Difficulty.L:
        objects.append(_block("step_1", ObjectKind.PLATFORM, 6.4, 7.0, 2.4, 3.6, 0.25))
    elif d == Difficulty.M:
        objects.append(_box("box_1", 4.5 + jx, 1.5 + jy, (0.6, 0.6, 0.25)))
    else:
        objects += [
            _box("box_1", 4.0 + jx, 2.0 + jy, (0.6, 0.6, 0.25), heavy=True),
            _box("box_2", 5.6, 5.0, (0.6, 0.6, 0.25)),
            _block("wall_1", ObjectKind.WALL, 4.4, 4.6, 4.0, BOUNDS.ymax, WALL_HEIGHT),
        ]
    return objects, Pose3(1.5, 3.0, 0.0, 0.0), Pose3(7.6, 3.0, HURDLE_HEIGHT, 0.0)


def _stair_building(d: Difficulty, rng: np.random.Generator) -> tuple[list[SceneObject], Pose3, Pose3]:
    jx, jy = (float(v) for v in rng.uniform(-0.2, 0.2, size=2))
    platform = _block("platform_1", ObjectKind.PLATFORM, 8.0, 9.2, BOUNDS.ymin, BOUNDS.ymax, PLATFORM_HEIGHT)
    objects = [platform]
    if d == Difficulty.L:
        objects += [
            _block("step_1", ObjectKind.PLATFORM, 6.8, 7.4, 2.4, 3.6, 0.2),
            _block("step_2", ObjectKind.PLATFORM, 7.4, 8.0, 2.4, 3.6, 0.4),
        ]
    else:
        objects += [
            _box("box_1", 5.0 + jx, 1.5 + jy, (0.6, 0.6, 0.25)),
            _box("box_2", 5.5 - jx, 4.5 - jy, (0.6, 0.6, 0.45)),
        ]
        if d == Difficulty.H:
            objects.append(_box("box_3", 4.5 + jy, 3.0 + jx, (0.6, 0.6, 0.25), heavy=True))
    return objects, Pose3(2.5, 3.0, 0.0, 0.0), Pose3(8.6, 3.0, PLATFORM_HEIGHT, 0.0)


_BUILDERS = {
    Task.BOX_OBSTRUCTION: _box_obstruction,
    Task.BOX_USAGE: _box_usage,
    Task.STAIR_BUILDING: _stair_building,
}


def generate_scenario(spec: TaskSpec) -> Scenario:
    """Deterministic scenario for ``spec``."""
    rng = np.random.default_rng([spec.seed, list(Task).index(spec.task), list(Difficulty).index(spec.difficulty)])
    objects, start, goal = _BUILDERS[spec.task](spec.difficulty, rng)
    return Scenario(
        id=f"{spec.label}_{spec.seed}",
        objects=tuple(objects),
        robot_start=start,
        goal=goal,
        bounds=BOUNDS,
        constraints=ConstraintSet(),
    )


__all__ = ["Difficulty", "Task", "TaskSpec", "generate_scenario"]
