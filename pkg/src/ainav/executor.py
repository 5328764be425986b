"""Closed-loop episode driver: observe, plan, execute, interpret, replan."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np

from .agents.context import AgentContext
from .agents.geometry import UnresolvableSymbol
from .agents.interpretation import Interpretation, InterpretationKind
from .agents.parsing import referenced_ids
from .agents.remote import EndpointConfig, RemoteBackend, RemoteClient
from .agents.roles import EmptyProposal, advise, evaluate, propose, resolve_parameters, revise
from .agents.rule_based import RuleBackend
from .skills import FailureCause, OutcomeStatus, Skill, SkillInvocation, SkillOutcome, SkillParams, execute
from .tree import ROOT, NodeStatus, NoViablePlan, PlanTree
from .world import BeliefState, FovParams, Pose3, Scenario, World, is_goal_reached, observe

log = logging.getLogger(__name__)

BUDGET = 120.0
HEIGHT_REVISION = 0.05
MAX_IDLE_FAILURES = 3


class TimeAccounting(str, Enum):
    PLANNING_COUNTS = "planning_counts"
    PLANNING_FREE = "planning_free"


class BackendKind(str, Enum):
    RULE = "rule"
    REMOTE = "remote"


class Ablation(str, Enum):
    NONE = "none"
    SINGLE = "single"
    SKILL = "skill"
    NOREPLAN = "noreplan"
    FAILUREONLY = "failureonly"


class FailureClass(str, Enum):
    SCENE_UNDERSTANDING = "SceneUnderstandingError"
    TASK_DECOMPOSITION = "IncorrectTaskDecomposition"
    SKILL_UNFINISHED = "SkillExecutionUnfinished"
    INTRA_SKILL = "IntraSkillFailure"
    SKILL_TRANSITION = "SkillTransitionFailure"


@dataclass(frozen=True)
class EpisodeConfig:
    gamma: float = 0.9
    terminal_bonus: float = 1.0
    seed: int = 0
    fov: FovParams = FovParams()
    time_accounting: TimeAccounting = TimeAccounting.PLANNING_COUNTS
    skill_params: SkillParams = SkillParams()
    backend: BackendKind = BackendKind.RULE
    ablation: Ablation = Ablation.NONE
    budget: float = BUDGET
    n_plans: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.terminal_bonus < 0:
            raise ValueError("terminal bonus must be non-negative")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.n_plans < 1:
            raise ValueError("n_plans must be at least 1")
        object.__setattr__(self, "time_accounting", TimeAccounting(self.time_accounting))
        object.__setattr__(self, "backend", BackendKind(self.backend))
        object.__setattr__(self, "ablation", Ablation(self.ablation))

    @property
    def effective_plans(self) -> int:
        return 1 if self.ablation == Ablation.SINGLE else self.n_plans


def _rounded(value: Any) -> Any:
    if isinstance(value, float):
        return round(value, 6) + 0.0
    if isinstance(value, dict):
        return {str(k): _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    return value


@dataclass
class Trace:
    events: list[dict] = field(default_factory=list)

    def emit(self, t: float, event: str, /, **payload: Any) -> None:
        self.events.append({"t": _rounded(float(t)), "kind": event, "payload": _rounded(payload)})

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in self.events)

    def kinds(self, kind: str) -> list[dict]:
        return [e for e in self.events if e["kind"] == kind]


@dataclass
class EpisodeResult:
    success: bool
    overall_time: float
    planning_time: float
    execution_time: float
    trajectory_length: float
    replan_events: list[tuple[float, Interpretation]]
    failure_class: FailureClass | None
    trace: Trace
    executed: list[SkillInvocation] = field(default_factory=list)

    @property
    def pushes(self) -> int:
        return sum(1 for s in self.executed if s.skill == Skill.PUSH)

    @property
    def climbs(self) -> list[SkillInvocation]:
        return [s for s in self.executed if s.skill == Skill.CLIMB]

    def replans(self, kind: InterpretationKind | None = None) -> int:
        return sum(1 for _, i in self.replan_events if kind is None or i.kind == kind)


def make_backend(cfg: EpisodeConfig):
    if cfg.backend == BackendKind.REMOTE:
        return RemoteBackend(RemoteClient(EndpointConfig.from_env()))
    return RuleBackend()


def _step_length(a: Pose3, b: Pose3) -> float:
    return math.sqrt((b.x - a.x) ** 2 + (b.y - a.y) ** 2 + (b.z - a.z) ** 2)


def _pose(p: Pose3 | None) -> list[float] | None:
    return None if p is None else [p.x, p.y, p.z, p.yaw]


def belief_mismatch(world: World, belief: BeliefState, tol: float = HEIGHT_REVISION) -> bool:
    """True when a known object's believed height or pose is off from the truth."""
    for oid, bo in belief.known_objects.items():
        true = world.objects.get(oid)
        if true is None:
            continue
        if abs(true.size[2] - bo.obj.size[2]) > tol or true.pose.horizontal_distance(bo.obj.pose) > tol:
            return True
    return False


def classify_failure(trace: Trace | Sequence[dict]) -> FailureClass:
    """Map a failed episode's trace to a failure class."""
    events = trace.events if isinstance(trace, Trace) else list(trace)
    ends = [e for e in events if e["kind"] == "terminate"]
    if not ends:
        raise ValueError("trace has no terminate event")
    end = ends[-1]["payload"]
    if end.get("success"):
        raise ValueError("classify_failure called on a successful episode")
    if end.get("reason") == "no_viable_plan":
        return FailureClass.TASK_DECOMPOSITION
    outcomes = [e["payload"] for e in events if e["kind"] == "outcome"]
    last = outcomes[-1] if outcomes else None
    if last is not None and last.get("irrecoverable"):
        if last.get("skill") == Skill.CLIMB.value and "support" in last.get("detail", ""):
            return FailureClass.SKILL_TRANSITION
        return FailureClass.INTRA_SKILL
    if last is not None and last.get("interrupted"):
        return FailureClass.SKILL_UNFINISHED
    interacted = any(o.get("skill") == Skill.PUSH.value and o.get("status") == "Success" for o in outcomes)
    if not interacted and end.get("belief_mismatch"):
        return FailureClass.SCENE_UNDERSTANDING
    return FailureClass.TASK_DECOMPOSITION


class _Episode:
    def __init__(self, scenario: Scenario, cfg: EpisodeConfig, backend) -> None:
        self.cfg = cfg
        self.params = cfg.skill_params
        self.world = World.from_scenario(scenario)
        self.belief = BeliefState.initial(scenario)
        self.rng = np.random.default_rng(cfg.seed)
        self.backend = backend
        self.tree = PlanTree(cfg.gamma, cfg.terminal_bonus)
        self.trace = Trace()
        self.clock = 0.0
        self.planning = 0.0
        self.execution = 0.0
        self.length = 0.0
        self._charged = backend.planning_time
        self.replans: list[tuple[float, Interpretation]] = []
        self.executed: list[SkillInvocation] = []
        self.current = ROOT
        self.pending: list = []

    # -- bookkeeping ---------------------------------------------------------------

    def charge(self) -> None:
        spent = self.backend.planning_time - self._charged
        self._charged = self.backend.planning_time
        self.planning += spent
        if self.cfg.time_accounting == TimeAccounting.PLANNING_COUNTS:
            self.clock = min(self.cfg.budget, self.clock + spent)

    def ctx(self) -> AgentContext:
        return AgentContext.from_belief(self.belief, self.params)

    def sense(self, t: float) -> None:
        delta = observe(self.world, self.belief, self.cfg.fov, self.rng, t)
        if delta.new_ids or delta.changed_ids:
            self.trace.emit(t, "observe", new=delta.new_ids, changed=delta.changed_ids)
        self.pending.extend(delta.new_ids)

    def goal_reached(self) -> bool:
        c = self.belief.constraints
        return is_goal_reached(self.world.robot, self.world.goal, max_climb=c.max_climb_height)

    def remaining(self) -> list[int]:
        return [
            n for n in self.tree.subtree(self.current)
            if self.tree.nodes[n].status == NodeStatus.SELECTED
        ]

    def select(self, skeleton: list[int]) -> None:
        self.trace.emit(
            self.clock,
            "select",
            skeleton=skeleton,
            steps=[str(self.tree.nodes[n].invocation) for n in skeleton],
        )

    def finish(self, reason: str) -> EpisodeResult:
        success = reason == "goal"
        self.trace.emit(
            self.clock,
            "terminate",
            success=success,
            reason=reason,
            belief_mismatch=belief_mismatch(self.world, self.belief),
        )
        return EpisodeResult(
            success=success,
            overall_time=self.clock,
            planning_time=self.planning,
            execution_time=self.execution,
            trajectory_length=self.length,
            replan_events=self.replans,
            failure_class=None if success else classify_failure(self.trace),
            trace=self.trace,
            executed=self.executed,
        )

    # -- phases ------------------------------------------------------------------------

    def initial_plan(self) -> list[int]:
        ctx = self.ctx()
        skill_only = self.cfg.ablation == Ablation.SKILL
        plans = propose(self.backend, ctx, self.cfg.effective_plans, skill_only=skill_only)
        self.tree.add_subtree(ROOT, plans)
        scores, goals = evaluate(self.backend, ctx, self.tree, ROOT)
        self.tree.annotate(scores, goals, nodes=scores)
        self.tree.backpropagate()
        self.charge()
        self.trace.emit(
            self.clock,
            "plan",
            plans=[[str(s) for s in p.steps] for p in plans],
            nodes=len(self.tree.skill_nodes),
        )
        return self.tree.select_skeleton(ROOT)

    def snapshot(self) -> dict[str, tuple[float, bool | None]]:
        return {oid: (bo.obj.top, bo.observed_movable) for oid, bo in self.belief.known_objects.items()}

    def candidates(self, failed: int | None, outcome: SkillOutcome | None, before: dict) -> list[Interpretation]:
        out = []
        if failed is not None and outcome is not None:
            cause = outcome.failure_cause.value if outcome.failure_cause else "failure"
            out.append(
                Interpretation(InterpretationKind.FAILURE, failed, f"{cause}: {outcome.detail}".strip())
            )
        if self.cfg.ablation == Ablation.FAILUREONLY:
            self.pending.clear()
            return out
        seen = set()
        for oid in self.pending:
            if oid in seen or oid in before:
                continue
            seen.add(oid)
            obj = self.belief.get(oid)
            out.append(
                Interpretation(
                    InterpretationKind.NEW_OBJECT,
                    oid,
                    f"{obj.kind.value} at [{obj.pose.x:.2f}, {obj.pose.y:.2f}] with height {obj.size[2]:.2f} m",
                )
            )
        self.pending.clear()
        relevant = set()
        for n in self.remaining():
            relevant |= referenced_ids(self.tree.nodes[n].invocation)
        for oid, (top, movable) in sorted(self.snapshot().items()):
            if oid not in before or oid in seen:
                continue
            top0, movable0 = before[oid]
            reasons = []
            if movable0 is not False and movable is False:
                reasons.append("did not move when pushed")
            if oid in relevant and abs(top - top0) > HEIGHT_REVISION:
                reasons.append(f"top re-measured at {top:.2f} m (was {top0:.2f} m)")
            if reasons:
                out.append(Interpretation(InterpretationKind.REVALUATION, oid, "; ".join(reasons)))
        return out

    def interpret(self, candidates: Iterable[Interpretation]) -> bool:
        """Run the advisor over candidates; returns True when a replan happened."""
        replanned = False
        for cand in candidates:
            decision = advise(self.backend, self.ctx(), self.tree, self.remaining(), cand)
            self.charge()
            self.trace.emit(self.clock, "advise", **decision.to_dict())
            if not decision.replan:
                continue
            skeleton = revise(
                self.backend,
                self.ctx(),
                self.tree,
                self.current,
                decision,
                self.cfg.effective_plans,
                skill_only=self.cfg.ablation == Ablation.SKILL,
            )
            self.charge()
            self.replans.append((self.clock, decision))
            self.trace.emit(self.clock, "revise", nodes=len(self.tree.skill_nodes))
            self.select(skeleton)
            replanned = True
        return replanned

    def run(self) -> EpisodeResult:
        self.sense(0.0)
        try:
            self.select(self.initial_plan())
        except (EmptyProposal, NoViablePlan) as exc:
            self.charge()
            log.info("initial planning failed: %s", exc)
            return self.finish("no_viable_plan")

        idle_failures = 0
        while True:
            if self.goal_reached():
                return self.finish("goal")
            if self.clock >= self.cfg.budget - 1e-9:
                return self.finish("timeout")
            remaining = self.remaining()
            if not remaining:
                if self.cfg.ablation == Ablation.NOREPLAN:
                    return self.finish("no_viable_plan")
                cand = Interpretation(
                    InterpretationKind.FAILURE,
                    self.current,
                    "plan finished without reaching the goal",
                    replan=True,
                    suggestions="expand new plans from the current position",
                )
                try:
                    skeleton = revise(
                        self.backend, self.ctx(), self.tree, self.current, cand, self.cfg.effective_plans,
                        skill_only=self.cfg.ablation == Ablation.SKILL,
                    )
                except (NoViablePlan, EmptyProposal):
                    self.charge()
                    return self.finish("no_viable_plan")
                self.charge()
                self.replans.append((self.clock, cand))
                self.trace.emit(self.clock, "revise", nodes=len(self.tree.skill_nodes))
                self.select(skeleton)
                continue

            node_id = remaining[0]
            node = self.tree.nodes[node_id]
            before = self.snapshot()
            try:
                target = resolve_parameters(self.backend, self.ctx(), node.invocation)
                inv = node.invocation.resolved(target)
            except UnresolvableSymbol as exc:
                inv = node.invocation
                outcome = SkillOutcome(OutcomeStatus.FAILURE, FailureCause.INFEASIBLE, detail=str(exc))
                self.charge()
            else:
                self.charge()
                if self.clock >= self.cfg.budget - 1e-9:
                    return self.finish("timeout")
                self.trace.emit(self.clock, "execute", node=node_id, skill=str(inv), target=_pose(target))
                start = self.clock
                start_pose = self.world.robot
                outcome = execute(
                    inv,
                    self.world,
                    self.belief,
                    self.params,
                    sense=lambda t: self.sense(start + t),
                    time_limit=self.cfg.budget - self.clock,
                )
                prev = start_pose
                for _, p in outcome.trajectory:
                    self.length += _step_length(prev, p)
                    prev = p
                self.clock += outcome.elapsed_sim_time
                self.execution += outcome.elapsed_sim_time
            self.trace.emit(
                self.clock,
                "outcome",
                node=node_id,
                skill=inv.skill.value,
                status=outcome.status.value,
                cause=outcome.failure_cause.value if outcome.failure_cause else None,
                elapsed=outcome.elapsed_sim_time,
                irrecoverable=outcome.irrecoverable,
                interrupted=outcome.interrupted,
                detail=outcome.detail,
                robot=_pose(self.world.robot),
            )
            self.sense(self.clock)

            failed = None
            if outcome.success:
                node.status = NodeStatus.EXECUTED
                self.current = node_id
                self.executed.append(inv)
                idle_failures = 0
            else:
                node.status = NodeStatus.FAILED
                failed = node_id
                idle_failures = idle_failures + 1 if outcome.elapsed_sim_time <= 0 else 0
            if outcome.irrecoverable:
                return self.finish("irrecoverable")
            if outcome.interrupted:
                return self.finish("timeout")
            if self.goal_reached():
                return self.finish("goal")

            replanned = False
            if self.cfg.ablation != Ablation.NOREPLAN:
                try:
                    replanned = self.interpret(self.candidates(failed, outcome, before))
                except (NoViablePlan, EmptyProposal) as exc:
                    self.charge()
                    log.info("replanning failed: %s", exc)
                    return self.finish("no_viable_plan")
            else:
                self.pending.clear()
            if failed is not None and not replanned:
                # without a replan the same step is tried again
                node.status = NodeStatus.SELECTED
                if idle_failures >= MAX_IDLE_FAILURES:
                    return self.finish("no_viable_plan")


def run_episode(scenario: Scenario, cfg: EpisodeConfig = EpisodeConfig(), backend=None) -> EpisodeResult:
    """Run one closed-loop episode; every path ends in an EpisodeResult."""
    return _Episode(scenario, cfg, backend or make_backend(cfg)).run()


__all__ = [
    "Ablation",
    "BackendKind",
    "EpisodeConfig",
    "EpisodeResult",
    "FailureClass",
    "TimeAccounting",
    "Trace",
    "belief_mismatch",
    "classify_failure",
    "run_episode",
]
