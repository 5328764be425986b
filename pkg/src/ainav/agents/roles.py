"""Role entry points shared by both backends.

These wrap a backend call with id filtering, retries on malformed replies
and the tree bookkeeping that follows an agent decision.
"""

from __future__ import annotations

import logging
from typing import Protocol, Sequence

from ..skills import SkillInvocation
from ..tree import ROOT, NodeScore, NodeStatus, PlanTree, SkillLevelPlan
from ..world import Pose3
from .context import AgentContext
from .geometry import UnresolvableSymbol
from .interpretation import Interpretation, InterpretationKind
from .parsing import ObjectLevelPlan, ParseError, plan_uses_known_ids
from .remote import RemoteError

log = logging.getLogger(__name__)

N_PLANS = 5
RETRIES = 2


class EmptyProposal(RuntimeError):
    pass


class Backend(Protocol):
    name: str
    planning_time: float

    def object_plans(self, ctx: AgentContext, n_plans: int) -> list[ObjectLevelPlan]: ...

    def skill_plans(
        self, ctx: AgentContext, object_plans: Sequence[ObjectLevelPlan], n_plans: int, skill_only: bool = False
    ) -> list[SkillLevelPlan]: ...

    def score(self, ctx: AgentContext, tree: PlanTree, start: int = ROOT) -> tuple[dict[int, NodeScore], set[int]]: ...

    def resolve(self, ctx: AgentContext, inv: SkillInvocation) -> Pose3: ...

    def advise(
        self, ctx: AgentContext, tree: PlanTree, remaining: Sequence[int], candidate: Interpretation
    ) -> Interpretation: ...

    def arborist(
        self,
        ctx: AgentContext,
        tree: PlanTree,
        current: int,
        interpretation: Interpretation,
        n_plans: int,
        skill_only: bool = False,
    ) -> list[SkillLevelPlan]: ...


def _retrying(what: str, fn):
    last: Exception | None = None
    for attempt in range(RETRIES + 1):
        try:
            return fn()
        except (ParseError, RemoteError) as exc:
            last = exc
            log.warning("%s attempt %d failed: %s", what, attempt + 1, exc)
    raise EmptyProposal(f"{what} failed: {last}") from last


def _known_only(plans: Sequence[SkillLevelPlan], ctx: AgentContext) -> list[SkillLevelPlan]:
    known = ctx.known_ids
    kept = []
    for p in plans:
        if plan_uses_known_ids(p, known):
            kept.append(p)
        else:
            log.warning("dropping %s: it references an unknown object", p.plan_id)
    return kept


def propose(
    backend: Backend, ctx: AgentContext, n_plans: int = N_PLANS, skill_only: bool = False
) -> list[SkillLevelPlan]:
    """Object-level then skill-level proposal; only plans over known ids survive."""

    def attempt() -> list[SkillLevelPlan]:
        objects = [] if skill_only else backend.object_plans(ctx, n_plans)
        return backend.skill_plans(ctx, objects, n_plans, skill_only=skill_only)

    plans = _known_only(_retrying("proposal", attempt), ctx)[:n_plans]
    if not plans:
        raise EmptyProposal("no plan uses only known objects")
    return plans


def evaluate(
    backend: Backend, ctx: AgentContext, tree: PlanTree, start: int = ROOT
) -> tuple[dict[int, NodeScore], set[int]]:
    """Scores for the live, unexecuted nodes below ``start`` and the goal-reaching leaves."""
    return _retrying("evaluation", lambda: backend.score(ctx, tree, start))


def resolve_parameters(backend: Backend, ctx: AgentContext, step: SkillInvocation) -> Pose3:
    if not step.symbolic_param.strip():
        raise UnresolvableSymbol("empty symbolic parameter")
    try:
        return backend.resolve(ctx, step)
    except (ParseError, RemoteError) as exc:
        raise UnresolvableSymbol(str(exc)) from exc


def advise(
    backend: Backend,
    ctx: AgentContext,
    tree: PlanTree,
    remaining: Sequence[int],
    candidate: Interpretation,
) -> Interpretation:
    """Decide whether ``candidate`` warrants replanning; backend errors mean no."""
    try:
        decision = backend.advise(ctx, tree, remaining, candidate)
    except (ParseError, RemoteError) as exc:
        log.warning("advisor failed, keeping the current plan: %s", exc)
        return candidate.decided(False, "")
    return decision


def revise(
    backend: Backend,
    ctx: AgentContext,
    tree: PlanTree,
    current: int,
    interpretation: Interpretation,
    n_plans: int = N_PLANS,
    skill_only: bool = False,
) -> list[int]:
    """Apply a replan decision below ``current`` and return the new skeleton.

    Failed nodes are pruned, the unexecuted suffix is re-scored under the
    current belief, and the arborist grows new suffix plans when an object
    appeared or no viable branch is left. Raises NoViablePlan.
    """
    if interpretation.kind == InterpretationKind.FAILURE:
        failed = tree.node(int(interpretation.subject))
        if failed.status != NodeStatus.EXECUTED and failed.node_id != ROOT:
            tree.prune_node(failed.node_id)

    scores, goals = evaluate(backend, ctx, tree, current)
    tree.annotate(scores, goals, nodes=scores)

    grow = interpretation.kind == InterpretationKind.NEW_OBJECT or tree.best_child(current) is None
    if grow:
        try:
            plans = _known_only(
                _retrying(
                    "arborist",
                    lambda: backend.arborist(ctx, tree, current, interpretation, n_plans, skill_only),
                ),
                ctx,
            )
        except EmptyProposal as exc:
            log.warning("arborist produced nothing: %s", exc)
            plans = []
        if plans:
            tree.add_subtree(current, plans)
            # merged prefixes may gain children, so the whole suffix is re-annotated
            scores, goals = evaluate(backend, ctx, tree, current)
            tree.annotate(scores, goals, nodes=scores)
    tree.backpropagate()
    return tree.select_skeleton(current)
