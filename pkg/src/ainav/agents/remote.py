"""Chat-completion backend: renders role prompts and parses the replies."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Sequence

import httpx

from ..skills import Skill, SkillInvocation
from ..tree import ROOT, NodeScore, NodeStatus, PlanTree, SkillLevelPlan
from ..world import Pose3
from .context import AgentContext
from .interpretation import Interpretation
from .parsing import (
    ObjectLevelPlan,
    parse_coordinates,
    parse_evaluation,
    parse_object_plans,
    parse_skill_plans,
    parse_yes_no,
)
from .prompts import Role, format_plan_inline, format_skill_plans, render_prompt

log = logging.getLogger(__name__)

ENV_ENDPOINT = "AINAV_LLM_ENDPOINT"
ENV_MODEL = "AINAV_LLM_MODEL"
ENV_KEY = "AINAV_LLM_API_KEY"
ENV_TIMEOUT = "AINAV_LLM_TIMEOUT_S"

RETRYABLE = frozenset({429, 500, 502, 503, 504})


class RemoteError(RuntimeError):
    pass


class AuthMissing(RemoteError):
    pass


class HttpStatus(RemoteError):
    def __init__(self, code: int, body: str = "") -> None:
        super().__init__(f"endpoint answered HTTP {code}")
        self.code = code
        self.body = body


class Timeout(RemoteError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    endpoint: str
    model: str
    api_key: str | None
    timeout_s: float = 60.0
    retries: int = 2
    backoff_s: float = 0.5

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "EndpointConfig":
        env = os.environ if env is None else env
        return cls(
            endpoint=env.get(ENV_ENDPOINT, "http://127.0.0.1:8000/v1/chat/completions"),
            model=env.get(ENV_MODEL, "gpt-4o"),
            api_key=env.get(ENV_KEY) or None,
            timeout_s=float(env.get(ENV_TIMEOUT, "60")),
        )


class RemoteClient:
    """Single-turn chat completions with retry and latency bookkeeping."""

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None) -> None:
        self.config = config
        self.transport = transport
        self.attempts = 0
        self.latency = 0.0

    def complete(self, prompt: str) -> str:
        cfg = self.config
        if not cfg.api_key:
            raise AuthMissing(f"set {ENV_KEY} to use the remote backend")
        body = {"model": cfg.model, "messages": [{"role": "user", "content": prompt}]}
        headers = {"Authorization": f"Bearer {cfg.api_key}"}
        started = time.perf_counter()
        try:
            with httpx.Client(timeout=cfg.timeout_s, transport=self.transport) as client:
                for attempt in range(cfg.retries + 1):
                    self.attempts += 1
                    last = attempt == cfg.retries
                    try:
                        resp = client.post(cfg.endpoint, json=body, headers=headers)
                    except httpx.TimeoutException as exc:
                        log.warning("attempt %d timed out", attempt + 1)
                        if last:
                            raise Timeout(str(exc) or "request timed out") from exc
                    else:
                        log.info("attempt %d answered %d", attempt + 1, resp.status_code)
                        if resp.status_code == 200:
                            return _content(resp)
                        if resp.status_code not in RETRYABLE or last:
                            raise HttpStatus(resp.status_code, resp.text)
                    time.sleep(cfg.backoff_s * 2**attempt)
        finally:
            self.latency += time.perf_counter() - started
        raise AssertionError("unreachable")


def _content(resp: httpx.Response) -> str:
    try:
        return str(resp.json()["choices"][0]["message"]["content"])
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise RemoteError(f"unexpected completion payload: {exc}") from exc


def remote_complete(config: EndpointConfig, prompt: str, transport: httpx.BaseTransport | None = None) -> str:
    return RemoteClient(config, transport).complete(prompt)


def leaf_paths(tree: PlanTree, start: int) -> list[list[int]]:
    """Root-to-leaf paths of live, unexecuted nodes below ``start``."""
    out: list[list[int]] = []

    def walk(n: int, prefix: list[int]) -> None:
        live = [
            c for c in tree.nodes[n].children
            if not tree.nodes[c].pruned and tree.nodes[c].status != NodeStatus.EXECUTED
        ]
        if not live:
            if prefix:
                out.append(prefix)
            return
        for c in live:
            walk(c, prefix + [c])

    walk(start, [])
    return out


class RemoteBackend:
    """Every role answered by a remote chat model."""

    name = "remote"

    def __init__(self, client: RemoteClient) -> None:
        self.client = client

    @property
    def planning_time(self) -> float:
        return self.client.latency

    def _ask(self, role: Role, ctx: AgentContext, extras: dict[str, str] | None = None) -> str:
        return self.client.complete(render_prompt(role, ctx, extras))

    def object_plans(self, ctx: AgentContext, n_plans: int) -> list[ObjectLevelPlan]:
        return parse_object_plans(self._ask(Role.PROPOSER_OBJECT, ctx), ctx.known_ids)[:n_plans]

    def skill_plans(
        self,
        ctx: AgentContext,
        object_plans: Sequence[ObjectLevelPlan],
        n_plans: int,
        skill_only: bool = False,
    ) -> list[SkillLevelPlan]:
        if object_plans:
            abstract = " ".join(f"Plan{i}: {p.narrative}" for i, p in enumerate(object_plans, 1))
        else:
            abstract = f"reach the goal using any of the objects: {ctx.object_descriptions}"
        text = self._ask(Role.PROPOSER_SKILL, ctx, {"object-level plans": abstract})
        return parse_skill_plans(text)[:n_plans]

    def score(
        self, ctx: AgentContext, tree: PlanTree, start: int = ROOT
    ) -> tuple[dict[int, NodeScore], set[int]]:
        paths = leaf_paths(tree, start)
        if not paths:
            return {}, set()
        plans = [
            SkillLevelPlan(f"plan{i}", tuple(tree.nodes[n].invocation for n in p))
            for i, p in enumerate(paths, 1)
        ]
        text = self._ask(Role.EVALUATOR, ctx, {"detailed plans": format_skill_plans(plans)})
        parsed = parse_evaluation(text)
        scores: dict[int, NodeScore] = {}
        for i, path in enumerate(paths, 1):
            for k, n in enumerate(path, 1):
                if n in scores:
                    continue  # shared prefix: the first plan listing it wins
                ev = parsed.get((f"plan{i}", k))
                scores[n] = NodeScore(ev.r, ev.executable) if ev else NodeScore(0.0, False)
        goals = {
            p[-1] for p in paths
            if tree.nodes[p[-1]].invocation.symbolic_param == "goal" and scores[p[-1]].executable
        }
        return scores, goals

    def resolve(self, ctx: AgentContext, inv: SkillInvocation) -> Pose3:
        text = self._ask(Role.PARAM_CALC, ctx, {"current plan": str(inv)})
        x, y, z = parse_coordinates(text)
        yaw = ctx.belief.robot_pose.yaw
        if inv.skill == Skill.PUSH and ctx.belief.get(inv.object_id) is not None:
            yaw = ctx.belief.get(inv.object_id).pose.yaw
        return Pose3(x, y, z, yaw)

    def advise(
        self,
        ctx: AgentContext,
        tree: PlanTree,
        remaining: Sequence[int],
        candidate: Interpretation,
    ) -> Interpretation:
        steps = [tree.nodes[n].invocation for n in remaining]
        text = self._ask(
            Role.ADVISOR,
            ctx,
            {"current plan": format_plan_inline(steps), "observation": candidate.describe()},
        )
        replan = parse_yes_no(text)
        return candidate.decided(replan, text.strip() or "replan")

    def arborist(
        self,
        ctx: AgentContext,
        tree: PlanTree,
        current: int,
        interpretation: Interpretation,
        n_plans: int,
        skill_only: bool = False,
    ) -> list[SkillLevelPlan]:
        remaining = [n for n in tree.subtree(current) if tree.nodes[n].status == NodeStatus.SELECTED]
        text = self._ask(
            Role.ARBORIST,
            ctx,
            {
                "current plan": format_plan_inline([tree.nodes[n].invocation for n in remaining]),
                "observation": interpretation.describe(),
                "suggestions": interpretation.suggestions or "none",
            },
        )
        return parse_skill_plans(text)[:n_plans]
