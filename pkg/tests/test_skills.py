import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ainav.grid import TraversalGrid
from ainav.skills import (
    FailureCause,
    OutcomeStatus,
    Skill,
    SkillInvocation,
    SkillOutcome,
    SkillParams,
    execute,
    execute_climb,
    execute_navigate,
    execute_push,
    execute_walk,
    skill_feasible,
    world_grid,
)
from ainav.world import BeliefState, ObjectKind, Pose3, World

from builders import block, box, scenario

P = SkillParams()


def setup(objects=(), start=Pose3(1.0, 1.5, 0.0, 0.0), bounds=(0, 0, 6, 3)):
    world = World.from_scenario(scenario(objects, start=start, goal=Pose3(5.0, 1.5, 0.0, 0.0), bounds=bounds))
    return world, BeliefState.omniscient(world)


def assert_sane(out: SkillOutcome, speed: float, start: Pose3):
    times = [t for t, _ in out.trajectory]
    assert all(b > a for a, b in zip(times, times[1:]))
    prev = start
    for _, p in out.trajectory:
        assert p.horizontal_distance(prev) <= speed * P.dt + 1e-9
        prev = p


# -- invocations --------------------------------------------------------------------------


def test_push_needs_an_object_and_others_refuse_one():
    with pytest.raises(ValueError):
        SkillInvocation(Skill.PUSH, "goal")
    with pytest.raises(ValueError):
        SkillInvocation(Skill.WALK, "goal", object_id="box_1")
    inv = SkillInvocation(Skill.PUSH, "front of box_1", Pose3(1, 2, 0, 0), "box_1")
    assert SkillInvocation.from_dict(inv.to_dict()) == inv
    assert str(inv) == "push('box_1','front of box_1')"


def test_success_carries_no_cause():
    with pytest.raises(ValueError):
        SkillOutcome(OutcomeStatus.SUCCESS, FailureCause.STALL)


# -- walk --------------------------------------------------------------------------------


def test_walk_in_place():
    world, belief = setup()
    out = execute_walk(world, belief, world.robot)
    assert out.success and out.elapsed_sim_time == 0.0 and out.trajectory == []


def test_walk_three_metres():
    world, belief = setup()
    start = world.robot
    out = execute_walk(world, belief, Pose3(4.0, 1.5, 0.0, 0.0))
    assert out.success
    assert out.elapsed_sim_time == pytest.approx(3.0, abs=P.dt)
    assert world.robot.x == pytest.approx(4.0)
    assert_sane(out, 1.0, start)


def test_walk_into_a_wall_collides():
    wall = block("wall", ObjectKind.WALL, 2.4, 2.6, 0.0, 3.0, 1.0)
    world, belief = setup([wall])
    out = execute_walk(world, belief, Pose3(4.0, 1.5, 0.0, 0.0))
    assert out.failure_cause == FailureCause.COLLISION
    assert world.robot.x < 2.4


def test_walk_times_out():
    world, belief = setup(bounds=(0, 0, 40, 3))
    out = execute_walk(world, belief, Pose3(38.0, 1.5, 0.0, 0.0), speed=1.0)
    assert out.failure_cause == FailureCause.TIMEOUT
    assert out.elapsed_sim_time == pytest.approx(30.0)


# -- climb --------------------------------------------------------------------------------


def test_climb_onto_low_box():
    world, belief = setup([box("b", 2.0, 1.5)])
    out = execute_climb(world, belief, Pose3(2.0, 1.5, 0.25, 0.0))
    assert out.success and out.elapsed_sim_time == pytest.approx(2.0)
    assert world.robot.z == pytest.approx(0.25)


def test_climb_onto_hurdle_fails():
    hurdle = block("h", ObjectKind.HURDLE, 1.8, 2.2, 0.0, 3.0, 0.45)
    world, belief = setup([hurdle])
    out = execute_climb(world, belief, Pose3(2.0, 1.5, 0.45, 0.0))
    assert out.failure_cause == FailureCause.INFEASIBLE and out.detail == "exceeds max climb"


def test_climb_box_then_platform():
    plat = block("p", ObjectKind.PLATFORM, 3.0, 4.0, 0.0, 3.0, 0.5)
    world, belief = setup([box("b", 2.2, 1.5), plat])
    assert execute_climb(world, belief, Pose3(2.2, 1.5, 0.25, 0.0)).success
    assert execute_climb(world, belief, Pose3(3.3, 1.5, 0.5, 0.0)).success
    assert world.robot.z == pytest.approx(0.5)


def test_climb_needs_support_and_reach():
    world, belief = setup()
    assert execute_climb(world, belief, Pose3(2.0, 1.5, 0.25, 0.0)).detail == "no supporting surface"
    assert execute_climb(world, belief, Pose3(4.0, 1.5, 0.0, 0.0)).detail == "target out of reach"


# -- navigate --------------------------------------------------------------------------------


def test_navigate_free_corridor_is_near_straight():
    world, belief = setup()
    out = execute_navigate(world, belief, Pose3(5.0, 1.5, 0.0, 0.0))
    assert out.success
    travelled = sum(a.horizontal_distance(b) for (_, a), (_, b) in zip(out.trajectory, out.trajectory[1:]))
    travelled += Pose3(1.0, 1.5, 0.0, 0.0).horizontal_distance(out.trajectory[0][1])
    assert travelled <= 4.0 * 1.05


def test_navigate_into_wall_is_infeasible():
    wall = block("wall", ObjectKind.WALL, 2.0, 3.0, 0.0, 3.0, 1.0)
    world, belief = setup([wall])
    out = execute_navigate(world, belief, Pose3(2.5, 1.5, 0.0, 0.0))
    assert out.failure_cause == FailureCause.INFEASIBLE
    assert world.robot == Pose3(1.0, 1.5, 0.0, 0.0)


def test_navigate_around_a_bend_avoids_walls():
    walls = [
        block("w1", ObjectKind.WALL, 0.0, 4.0, 1.0, 1.2, 1.0),
        block("w2", ObjectKind.WALL, 4.0, 4.2, 1.0, 4.0, 1.0),
    ]
    world, belief = setup(walls, start=Pose3(1.0, 0.5, 0.0, 0.0), bounds=(0, 0, 6, 5))
    out = execute_navigate(world, belief, Pose3(1.0, 3.0, 0.0, 0.0))
    assert out.success
    grid = world_grid(world, P)
    assert all(grid.valid[grid.cell_of(p.x, p.y)] for _, p in out.trajectory)
    assert max(p.x for _, p in out.trajectory) > 4.2


# -- push ------------------------------------------------------------------------------------


def test_push_light_box_two_metres():
    world, belief = setup([box("b", 2.0, 1.5)], start=Pose3(0.8, 1.5, 0.0, 0.0), bounds=(0, 0, 7, 3))
    out = execute_push(world, belief, "b", Pose3(4.0, 1.5, 0.0, 0.0))
    assert out.success
    bx = world.objects["b"].pose
    assert math.hypot(bx.x - 4.0, bx.y - 1.5) <= 0.2
    assert out.moved_objects["b"] == bx
    assert belief.get("b").pose == bx


def test_heavy_box_stalls_and_updates_belief():
    world, belief = setup([box("b", 2.0, 1.5, heavy=True)], start=Pose3(0.8, 1.5, 0.0, 0.0))
    out = execute_push(world, belief, "b", Pose3(4.0, 1.5, 0.0, 0.0))
    assert out.failure_cause == FailureCause.STALL
    assert world.objects["b"].pose == Pose3(2.0, 1.5, 0.0, 0.0)
    assert belief.known_objects["b"].observed_movable is False
    held = [p for _, p in out.trajectory][-int(round(2.0 / P.dt)):]
    assert len(set(held)) == 1
    inv = SkillInvocation(Skill.PUSH, "x", Pose3(4.0, 1.5, 0.0, 0.0), "b")
    assert skill_feasible(inv, belief).reason == "known immovable"


def test_push_in_place_and_wrong_kind():
    wall = block("w", ObjectKind.WALL, 4.0, 4.2, 0.0, 1.0, 1.0)
    world, belief = setup([box("b", 2.0, 1.5), wall])
    out = execute_push(world, belief, "b", Pose3(2.05, 1.5, 0.0, 0.0))
    assert out.success and out.elapsed_sim_time == 0.0
    assert execute_push(world, belief, "w", Pose3(4.1, 2.0, 0.0, 0.0)).failure_cause == FailureCause.INFEASIBLE


def test_push_moves_only_the_named_box():
    objs = [box("b", 2.0, 1.0), box("other", 4.5, 2.4)]
    world, belief = setup(objs, start=Pose3(0.8, 1.0, 0.0, 0.0))
    before = world.objects["other"]
    assert execute_push(world, belief, "b", Pose3(3.0, 1.0, 0.0, 0.0)).success
    assert world.objects["other"] == before


# -- feasibility -----------------------------------------------------------------------------


def test_feasibility_examples():
    plat = block("p", ObjectKind.PLATFORM, 1.6, 2.6, 0.0, 3.0, 0.5)
    world, belief = setup([plat])
    climb = SkillInvocation(Skill.CLIMB, "top of p", Pose3(2.0, 1.5, 0.5, 0.0))
    assert skill_feasible(climb, belief).reason == "exceeds max climb"
    walk = SkillInvocation(Skill.WALK, "here", world.robot)
    assert skill_feasible(walk, belief).feasible
    assert not skill_feasible(SkillInvocation(Skill.WALK, "x"), belief)


@given(st.floats(0.3, 5.7), st.floats(0.3, 2.7), st.sampled_from([Skill.WALK, Skill.NAVIGATE, Skill.CLIMB]))
@settings(max_examples=30, deadline=None)
def test_infeasible_verdicts_fail_in_execution(x, y, skill):
    objs = [block("wall", ObjectKind.WALL, 3.0, 3.2, 0.0, 2.0, 1.0), box("b", 2.0, 2.3)]
    world, belief = setup(objs, start=Pose3(1.0, 1.0, 0.0, 0.0))
    z = world.support_height(x, y)
    inv = SkillInvocation(skill, "p", Pose3(x, y, z, 0.0))
    if not skill_feasible(inv, belief):
        assert not execute(inv, world, belief).success


def test_execution_is_deterministic():
    def run():
        world, belief = setup([box("b", 2.0, 1.5)], start=Pose3(0.8, 1.5, 0.0, 0.0))
        inv = SkillInvocation(Skill.PUSH, "x", Pose3(3.5, 1.0, 0.0, 0.0), "b")
        return execute(inv, world, belief)

    a, b = run(), run()
    assert a.trajectory == b.trajectory and a.moved_objects == b.moved_objects
