"""Strict parsers for agent replies."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..skills import Skill, SkillInvocation
from ..tree import SkillLevelPlan

log = logging.getLogger(__name__)

PLAN_BEGIN, PLAN_END = "[begin of plan]", "[end of plan]"
EVAL_BEGIN, EVAL_END = "[begin of evaluation]", "[end of evaluation]"

SKILL_NAMES = {
    "walk-to": Skill.WALK,
    "climb-to": Skill.CLIMB,
    "navigate-to": Skill.NAVIGATE,
    "push": Skill.PUSH,
}


class ParseError(ValueError):
    pass


class MissingMarkers(ParseError):
    pass


class MalformedStep(ParseError):
    def __init__(self, plan: int, step: int, text: str) -> None:
        super().__init__(f"plan {plan}, step {step}: cannot parse {text!r}")
        self.plan, self.step, self.text = plan, step, text


class UnknownSkill(ParseError):
    def __init__(self, name: str) -> None:
        super().__init__(f"unknown skill {name!r}")
        self.name = name


class NonNumericReward(ParseError):
    pass


@dataclass(frozen=True)
class ObjectLevelPlan:
    plan_id: str
    objects_used: tuple[str, ...]
    narrative: str


def _between(text: str, begin: str, end: str) -> str:
    i = text.find(begin)
    j = text.find(end, i + len(begin)) if i >= 0 else -1
    if i < 0 or j < 0:
        raise MissingMarkers(f"expected {begin} ... {end}")
    return text[i + len(begin) : j]


_PLAN_HEAD = re.compile(r"^\s*Plan\s*(\d+)\s*:\s*(.*)$")
_STEP = re.compile(r"""^\(\s*['"]step\s*(\d+)['"]\s*,\s*['"](.+)['"]\s*\)\s*,?\s*$""")
_EVAL_STEP = re.compile(
    r"""^\(\s*['"]step\s*(\d+)['"]\s*,\s*['"](.+)['"]\s*,\s*['"]reward:\s*([^'"]*)['"]\s*\)\s*,?\s*$"""
)
_CALL = re.compile(r"^\s*([A-Za-z][\w\-]*)\s*\((.*)\)\s*$")
_QUOTED = re.compile(r"""'([^']*)'|"([^"]*)\"""")


def parse_step(expr: str, plan: int = 0, step: int = 0) -> SkillInvocation:
    """Parse ``walk-to('front of box_1')`` or ``push('box_1','behind box_1')``."""
    m = _CALL.match(expr)
    if not m:
        raise MalformedStep(plan, step, expr)
    name, args = m.group(1), m.group(2)
    if name not in SKILL_NAMES:
        raise UnknownSkill(name)
    values = [a if a else b for a, b in _QUOTED.findall(args)]
    skill = SKILL_NAMES[name]
    if skill == Skill.PUSH:
        if len(values) != 2 or not values[0] or not values[1]:
            raise MalformedStep(plan, step, expr)
        return SkillInvocation(skill, values[1].strip(), object_id=values[0].strip())
    if len(values) != 1 or not values[0].strip():
        raise MalformedStep(plan, step, expr)
    return SkillInvocation(skill, values[0].strip())


def _plan_blocks(body: str) -> list[tuple[int, list[str]]]:
    blocks: list[tuple[int, list[str]]] = []
    for line in body.splitlines():
        head = _PLAN_HEAD.match(line)
        if head:
            blocks.append((int(head.group(1)), []))
            rest = head.group(2).strip().lstrip("[").strip()
            if rest:
                blocks[-1][1].append(rest)
            continue
        s = line.strip()
        if not s or s in {"[", "]", "],", "...", "]."}:
            continue
        if not blocks:
            continue
        blocks[-1][1].append(s)
    return blocks


def parse_skill_plans(text: str) -> list[SkillLevelPlan]:
    body = _between(text, PLAN_BEGIN, PLAN_END)
    plans = []
    for number, lines in _plan_blocks(body):
        steps = []
        for k, line in enumerate(lines, 1):
            line = line.rstrip("],").strip() if line.endswith("],") else line
            m = _STEP.match(line)
            if not m:
                raise MalformedStep(number, k, line)
            steps.append(parse_step(m.group(2).strip(), number, k))
        if steps:
            plans.append(SkillLevelPlan(f"plan{number}", tuple(steps)))
    return plans


def parse_object_plans(text: str, known_ids: set[str] | None = None) -> list[ObjectLevelPlan]:
    body = _between(text, PLAN_BEGIN, PLAN_END)
    plans = []
    for line in body.splitlines():
        m = _PLAN_HEAD.match(line)
        if not m:
            continue
        narrative = m.group(2).strip()
        used = ()
        u = re.search(r"use\s*\[([^\]]*)\]", narrative)
        if u:
            used = tuple(t for t in re.split(r"[,\s]+", u.group(1)) if t and t != "and")
        if known_ids is not None:
            used = tuple(t for t in used if t in known_ids)
        plans.append(ObjectLevelPlan(f"plan{m.group(1)}", used, narrative))
    return plans


@dataclass(frozen=True)
class StepEvaluation:
    r: float
    executable: bool


def parse_evaluation(text: str) -> dict[tuple[str, int], StepEvaluation]:
    """Map (plan_id, step_index) to a clamped reward; zero marks a step non-executable."""
    body = _between(text, EVAL_BEGIN, EVAL_END)
    out = {}
    for number, lines in _plan_blocks(body):
        for k, line in enumerate(lines, 1):
            m = _EVAL_STEP.match(line)
            if not m:
                raise MalformedStep(number, k, line)
            raw = m.group(3).strip()
            try:
                r = float(raw)
            except ValueError:
                raise NonNumericReward(f"plan {number}, step {k}: {raw!r}") from None
            if r != r:
                raise NonNumericReward(f"plan {number}, step {k}: {raw!r}")
            if not 0.0 <= r <= 1.0:
                log.warning("reward %s outside [0, 1] clamped", r)
                r = min(1.0, max(0.0, r))
            out[(f"plan{number}", int(m.group(1)))] = StepEvaluation(r, r > 0.0)
    return out


_COORD = re.compile(
    r"\[\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*,\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*,\s*(-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*\]"
)


def parse_coordinates(text: str) -> tuple[float, float, float]:
    """The last bracketed ``[x, y, z]`` triple in a reply."""
    found = _COORD.findall(text)
    if not found:
        raise ParseError("no [x, y, z] coordinate in reply")
    return tuple(float(v) for v in found[-1])  # type: ignore[return-value]


def parse_yes_no(text: str) -> bool:
    """True for a reply whose final Yes/No verdict is Yes."""
    hits = re.findall(r"\b(yes|no)\b", text, flags=re.IGNORECASE)
    if not hits:
        raise ParseError("reply contains neither Yes nor No")
    return hits[-1].lower() == "yes"


_REF = re.compile(r"\b(?:of|for)\s+([A-Za-z][\w\-]*)")


def referenced_ids(inv: SkillInvocation) -> set[str]:
    refs = set(_REF.findall(inv.symbolic_param))
    if inv.object_id:
        refs.add(inv.object_id)
    return refs


def plan_uses_known_ids(plan: SkillLevelPlan, known: set[str]) -> bool:
    return all(referenced_ids(s) <= known for s in plan.steps)
