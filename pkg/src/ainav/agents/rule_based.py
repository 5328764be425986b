"""Deterministic rule-based backend standing in for the language model.

Plans come from a small set of geometric strategies; rewards come from a
one-step simulation of each skill on a copy of the belief.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import shapely

from ..skills import Skill, SkillInvocation, SkillParams, belief_grid, skill_feasible
from ..tree import ROOT, NodeScore, NodeStatus, PlanTree, SkillLevelPlan
from ..world import BeliefState, ObjectKind, SceneObject, is_goal_reached
from .context import AgentContext
from .geometry import (
    UnresolvableSymbol,
    find_push_target,
    goal_support,
    resolve_symbol,
    simulate_step,
)
from .interpretation import Interpretation, InterpretationKind
from .parsing import ObjectLevelPlan

DIFFICULTY = {Skill.WALK: 0.1, Skill.NAVIGATE: 0.2, Skill.CLIMB: 0.5, Skill.PUSH: 0.6}

# modelled seconds per role call, so planning time is reproducible
LATENCY = {
    "proposer_object": 3.0,
    "proposer_skill": 3.0,
    "evaluator": 3.0,
    "param": 0.5,
    "advisor": 1.0,
    "arborist": 2.0,
}

REPLAN_MARGIN = 0.1
# an approach step is only worth it when the target is this far away
APPROACH_MIN = 1.5
MAX_STACK = 3


@dataclass(frozen=True)
class Strategy:
    kind: str  # direct | clear | stack | approach | decoy
    objects: tuple[str, ...]
    steps: tuple[SkillInvocation, ...]
    cost: float
    narrative: str


def _nav_goal() -> SkillInvocation:
    return SkillInvocation(Skill.NAVIGATE, "goal")


def _connected(belief: BeliefState, params: SkillParams) -> bool:
    g = belief_grid(belief, params)
    r, goal = belief.robot_pose, belief.goal
    a = g.nearest_valid(r.x, r.y, params.start_snap, r.z)
    b = g.nearest_valid(goal.x, goal.y, params.target_snap, goal.z)
    return a is not None and b is not None and bool(g.labels[a] == g.labels[b])


def _without(belief: BeliefState, oid: str) -> BeliefState:
    out = belief.copy()
    out.known_objects.pop(oid, None)
    return out


def _usable_boxes(belief: BeliefState, exclude: Iterable[str] = ()) -> list[SceneObject]:
    skip = set(exclude)
    return [
        o for o in belief.object_list() if o.id not in skip and belief.is_usable_box(o.id)
    ]


def _dist(a, b) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def enumerate_strategies(
    belief: BeliefState,
    params: SkillParams = SkillParams(),
    skill_only: bool = False,
    require: str | None = None,
) -> list[Strategy]:
    """Candidate strategies, feasible-looking ones first, decoys last.

    ``skill_only`` drops the object-level reasoning: boxes are taken in id
    order, stacks are not sorted by height and pushes are not checked for
    opening a route. ``require`` keeps only strategies using that object.
    """
    robot, goal = belief.robot_pose, belief.goal
    climb = belief.constraints.max_climb_height
    valid: list[Strategy] = []
    decoys: list[Strategy] = []

    if _connected(belief, params):
        valid.append(
            Strategy("direct", (), (_nav_goal(),), _dist(robot, goal), "I need to use []. First, navigate straight to the goal.")
        )
    else:
        for box in _usable_boxes(belief):
            if not skill_only:
                if not _connected(_without(belief, box.id), params):
                    continue
                if find_push_target(belief, box.id, params) is None:
                    continue
            steps = (
                SkillInvocation(Skill.PUSH, f"push target for {box.id}", object_id=box.id),
                _nav_goal(),
            )
            cost = 2.0 * _dist(robot, box.pose) + _dist(box.pose, goal)
            valid.append(
                Strategy(
                    "clear",
                    (box.id,),
                    steps,
                    cost,
                    f"I need to use [{box.id}]. First, push {box.id} aside to open the way. "
                    f"Second, navigate to the goal.",
                )
            )

    support = goal_support(belief)
    if support is not None and goal.z - robot.z > climb + 1e-9:
        stacks = []
        boxes = _usable_boxes(belief, exclude=(support.id,))
        for k in range(1, min(MAX_STACK, len(boxes)) + 1):
            for subset in combinations(boxes, k):
                chain = list(subset) if skill_only else sorted(subset, key=lambda o: (o.top, o.id))
                if not skill_only:
                    tol = 2.0 * max(belief.known_objects[o.id].size_sigma for o in chain)
                    levels = [robot.z] + [o.top for o in chain] + [goal.z]
                    deltas = [b - a for a, b in zip(levels, levels[1:])]
                    if not all(0.0 < d <= climb + tol for d in deltas):
                        continue
                pushes = []
                base = support.id
                for o in reversed(chain):
                    pushes.append(SkillInvocation(Skill.PUSH, f"base of {base}", object_id=o.id))
                    base = o.id
                climbs = [SkillInvocation(Skill.CLIMB, f"top of {o.id}") for o in chain]
                climbs.append(SkillInvocation(Skill.CLIMB, f"top of {support.id}"))
                cost = 10.0 * k + sum(_dist(o.pose, support.pose) for o in chain)
                names = ", ".join(o.id for o in chain)
                stacks.append(
                    Strategy(
                        "stack",
                        tuple(o.id for o in chain),
                        tuple(pushes + climbs + [_nav_goal()]),
                        cost,
                        f"I need to use [{names}]. First, push the boxes next to {support.id} "
                        f"in ascending height to form steps. Second, climb them one by one onto "
                        f"{support.id} and navigate to the goal.",
                    )
                )
        valid.extend(stacks)

    if not valid:
        target = _nearest_to_route(belief)
        if target is not None and belief.robot_pose.horizontal_distance(target.pose) > APPROACH_MIN:
            valid.append(
                Strategy(
                    "approach",
                    (target.id,),
                    (SkillInvocation(Skill.NAVIGATE, f"front of {target.id}"),),
                    _dist(robot, target.pose),
                    f"I need to use [{target.id}]. First, move in front of {target.id} to observe it closely.",
                )
            )

    fixed = [
        o for o in belief.object_list()
        if o.kind != ObjectKind.BOX and o.top - robot.z > climb + 1e-9
    ]
    if fixed:
        tallest = max(fixed, key=lambda o: (o.top, o.id))
        decoys.append(
            Strategy(
                "decoy",
                (tallest.id,),
                (SkillInvocation(Skill.CLIMB, f"top of {tallest.id}"), _nav_goal()),
                0.0,
                f"I need to use [{tallest.id}]. First, climb onto {tallest.id}. Second, navigate to the goal.",
            )
        )

    if not skill_only:
        valid.sort(key=lambda s: (s.cost, s.kind, s.objects))
    out = valid + decoys
    if require is not None:
        out = [s for s in out if require in s.objects]
    return out


def _nearest_to_route(belief: BeliefState) -> SceneObject | None:
    """The known object on (or nearest to) the robot-goal segment, closest to the robot first."""
    r, g = belief.robot_pose, belief.goal
    route = shapely.LineString([(r.x, r.y), (g.x, g.y)])
    objs = belief.object_list()
    if not objs:
        return None
    here = shapely.Point(r.x, r.y)
    return min(objs, key=lambda o: (round(o.footprint.distance(route), 6), o.footprint.distance(here), o.id))


# -- scoring --------------------------------------------------------------------------


def _cost_to_go(belief: BeliefState, params: SkillParams) -> float:
    g = belief_grid(belief, params)
    goal = belief.goal
    gc = g.nearest_valid(goal.x, goal.y, params.target_snap, goal.z) or g.cell_of(goal.x, goal.y)
    r = belief.robot_pose
    rc = g.nearest_valid(r.x, r.y, params.start_snap, r.z) or g.cell_of(r.x, r.y)
    return float(g.cost_to_go(gc)[rc])


def score_step(
    inv: SkillInvocation, belief: BeliefState, params: SkillParams
) -> tuple[NodeScore, BeliefState, SkillInvocation | None]:
    """Reward one step from ``belief``; returns the score and the simulated belief."""
    try:
        resolved = inv.resolved(resolve_symbol(inv, belief, params=params))
    except UnresolvableSymbol:
        return NodeScore(0.0, False), belief, None
    verdict = skill_feasible(resolved, belief, params=params)
    after = simulate_step(resolved, belief, params)
    if not verdict.feasible:
        return NodeScore(0.0, False), after, resolved
    before_d = _cost_to_go(belief, params)
    after_d = _cost_to_go(after, params)
    progress = 0.0 if before_d <= 1e-9 else min(1.0, max(0.0, (before_d - after_d) / before_d))
    r = 0.5 * progress + 0.5 * (1.0 - DIFFICULTY[inv.skill])
    return NodeScore(r, True), after, resolved


def score_subtree(
    tree: PlanTree, start: int, belief: BeliefState, params: SkillParams
) -> tuple[dict[int, NodeScore], set[int]]:
    """Score every live, unexecuted node below ``start`` from the belief at ``start``."""
    scores: dict[int, NodeScore] = {}
    goals: set[int] = set()
    stack = [(c, belief) for c in reversed(tree.nodes[start].children)]
    while stack:
        n, state = stack.pop()
        node = tree.nodes[n]
        if node.pruned or node.status == NodeStatus.EXECUTED:
            continue
        score, after, _ = score_step(node.invocation, state, params)
        scores[n] = score
        live = [c for c in node.children if not tree.nodes[c].pruned]
        if not live and score.executable and is_goal_reached(
            after.robot_pose, after.goal, max_climb=after.constraints.max_climb_height
        ):
            goals.add(n)
        stack.extend((c, after) for c in reversed(node.children))
    return scores, goals


def chain_value(
    steps: Sequence[SkillInvocation],
    belief: BeliefState,
    params: SkillParams,
    gamma: float,
    bonus: float,
) -> tuple[float, bool]:
    """Discounted backup value of a single chain and whether every step is feasible."""
    rs, ok, state = [], True, belief
    for inv in steps:
        score, state, _ = score_step(inv, state, params)
        rs.append(score.r)
        ok = ok and score.executable
    if not rs:
        return 0.0, ok
    reached = is_goal_reached(state.robot_pose, state.goal, max_climb=state.constraints.max_climb_height)
    q = rs[-1] + (bonus if reached and ok else 0.0)
    for r in reversed(rs[:-1]):
        q = r + gamma * q
    return q, ok


# -- backend ------------------------------------------------------------------------------


def _plan_from(strategy: Strategy, idx: int) -> SkillLevelPlan:
    return SkillLevelPlan(f"plan{idx}", strategy.steps)


class RuleBackend:
    """Rule-based stand-in for every agent role."""

    name = "rule"

    def __init__(self, latency: dict[str, float] | None = None) -> None:
        self.latency = dict(LATENCY if latency is None else latency)
        self.planning_time = 0.0
        self.calls: dict[str, int] = {}

    def _charge(self, role: str) -> None:
        self.planning_time += self.latency.get(role, 0.0)
        self.calls[role] = self.calls.get(role, 0) + 1

    # proposer
    def object_plans(self, ctx: AgentContext, n_plans: int) -> list[ObjectLevelPlan]:
        self._charge("proposer_object")
        strategies = enumerate_strategies(ctx.belief, ctx.params)[:n_plans]
        return [
            ObjectLevelPlan(f"plan{i}", s.objects, s.narrative) for i, s in enumerate(strategies, 1)
        ]

    def skill_plans(
        self,
        ctx: AgentContext,
        object_plans: Sequence[ObjectLevelPlan],
        n_plans: int,
        skill_only: bool = False,
    ) -> list[SkillLevelPlan]:
        self._charge("proposer_skill")
        strategies = enumerate_strategies(ctx.belief, ctx.params, skill_only=skill_only)
        if not skill_only:
            wanted = [p.narrative for p in object_plans]
            strategies = [s for s in strategies if s.narrative in wanted]
        return [_plan_from(s, i) for i, s in enumerate(strategies[:n_plans], 1)]

    # evaluator
    def score(
        self, ctx: AgentContext, tree: PlanTree, start: int = ROOT
    ) -> tuple[dict[int, NodeScore], set[int]]:
        self._charge("evaluator")
        return score_subtree(tree, start, ctx.belief, ctx.params)

    # parameter calculation
    def resolve(self, ctx: AgentContext, inv: SkillInvocation):
        self._charge("param")
        return resolve_symbol(inv, ctx.belief, params=ctx.params)

    # advisor
    def advise(
        self,
        ctx: AgentContext,
        tree: PlanTree,
        remaining: Sequence[int],
        candidate: Interpretation,
    ) -> Interpretation:
        self._charge("advisor")
        steps = [tree.nodes[n].invocation for n in remaining]
        if candidate.kind == InterpretationKind.FAILURE:
            return candidate.decided(
                True, f"prune node {candidate.subject} ({candidate.detail}) and switch to an alternative branch"
            )
        current_q, feasible = chain_value(steps, ctx.belief, ctx.params, tree.gamma, tree.bonus)
        if not feasible:
            blocker = "a remaining step is no longer feasible"
            return candidate.decided(True, f"{blocker}; prune it and expand alternatives")
        if candidate.kind == InterpretationKind.REVALUATION:
            return candidate.decided(False, "")
        best = -math.inf
        for s in enumerate_strategies(ctx.belief, ctx.params, require=str(candidate.subject)):
            if s.kind == "decoy":
                continue
            q, ok = chain_value(s.steps, ctx.belief, ctx.params, tree.gamma, tree.bonus)
            if ok:
                best = max(best, q)
        if best > current_q + REPLAN_MARGIN:
            return candidate.decided(
                True, f"expand plans that use {candidate.subject}; value {best:.3f} beats {current_q:.3f}"
            )
        return candidate.decided(False, "")

    # arborist
    def arborist(
        self,
        ctx: AgentContext,
        tree: PlanTree,
        current: int,
        interpretation: Interpretation,
        n_plans: int,
        skill_only: bool = False,
    ) -> list[SkillLevelPlan]:
        self._charge("arborist")
        strategies = enumerate_strategies(ctx.belief, ctx.params, skill_only=skill_only)
        return [_plan_from(s, i) for i, s in enumerate(strategies[:n_plans], 1)]
