"""Prompt templates for the six agent roles and their slot filling.

Slots are written as ``{slot name}``; every other character is literal.
"""

from __future__ import annotations

import re
from enum import Enum
from typing import Mapping, Sequence

from ..skills import SkillInvocation
from ..tree import SkillLevelPlan
from .context import AgentContext


class Role(str, Enum):
    PROPOSER_OBJECT = "ProposerObject"
    PROPOSER_SKILL = "ProposerSkill"
    EVALUATOR = "Evaluator"
    PARAM_CALC = "ParamCalc"
    ADVISOR = "Advisor"
    ARBORIST = "Arborist"


class MissingSlot(KeyError):
    pass


PROPOSER_OBJECT = """\
You are a quadruped robot on the ground in a 3D world. Your goal is to navigate to a specific point in the 3D space. Your navigation goal is {goal point}, and your current scene understanding is {scene understanding}.
There are several objects in the scene that you may utilize. We use two parameters, position and size, to represent the location and size of an object, respectively.
Each object's position is represented by a 3D vector [x, y, z]. Each object's size is represented as a 3D vector [length, width, height]. {object description}.
You have a skill library containing the following skills and corresponding parameters:
{skill library}.
You must follow these constraints:
{constraints}.
Give me five different abstract plans for using objects to help you complete navigation tasks. The plan must include which objects you need to use, the sequence you use the objects, how to use the objects. You must analyze the problem step by step and show the thinking process.
You must follow the following answer template:

[begin of plan]

Plan1: I need to use [objects]. First, ... Second ...

Plan2: ...

[end of plan]
"""

PROPOSER_SKILL = """\
You are a quadruped robot on the ground. Your goal is to navigate to a specific point in the 3D space. Your navigation goal is {goal point}.
You have a skill library containing the following skills and corresponding parameters:
{skill library}.
Here are some abstract plans: {object-level plans}, you need to generate detailed plans according to each abstract plan. Each step in the detailed plan consists of a skill with an abstract position like 'walk-to('abstract position')'.

You must follow the following answer template:

[begin of plan]

Plan1: [

('step1','<skill>'),

...

],

[end of plan]
"""

EVALUATOR = """\
You are a quadruped robot on the ground in a 3D world. Your goal is to navigate to a specific point in the 3D space. Your navigation goal is {goal point}, and your current scene understanding is {scene understanding}
There are several objects in the scene that you may utilize: {object description}.
You have a skill library containing the following skills and corresponding parameters: {skill library}.
Here are some detailed plans to accomplish the navigation task: {detailed plans}
You need to evaluate the reward of each step in the plan based on its contribution to task completion, assigning a value between 0 and 1. Specifically, this involves simulating whether future steps can reach the goal under the current step to assess its impact. If the step does not satisfy the given constraints, the reward is 0.
Constraints you must follow: {constraints}.
At the end of your response, reply to me with the following answer template:

[begin of evaluation]

Plan1: [

('step1', '<skill>', 'reward: ...'),

...

],

[end of evaluation]
"""

PARAM_CALC = """\
The current plan is {current plan}, you need to calculate the 3D coordinates [x, y, z] of the abstract position in the plan based on the robot pose and the updated object information.
The robot pose is {robot pose}.
The object information is {object description}.
You need to consider the spatial relationship between objects to obtain a reasonable position.
You must calculate the position along each dimension step by step.
"""

ADVISOR = """\
You are a quadruped robot on the ground in a 3D world. Your goal is to navigate to a specific point in the 3D space. Your navigation goal is {goal point}. There are several objects in the scene that you may utilize: {object description}.
Your current plan is: {current plan}
Now, you have a new observation interpretation of the environment: {observation}
You need to determine whether to replan to modify your current plan based on the current plan, this new environmental observation, and the following criteria. You must analyze whether to reply, provide me with the reason, and respond with "Yes" or "No".

Replanning criteria:

* If the new observation is an execution failure of the current plan, then replanning is necessary.

* If the new observation is a new object, you need to evaluate how this new object might help complete your task. If using it results in a more effective plan than your current one, you need to replan.

* If the new observation is a revaluation of a previously known object, you need to determine whether this new information impacts your current plan. For example, if your plan requires climbing onto a box, but new observations show that the box is too high to climb, you need to replan.
"""

ARBORIST = """\
You are a quadruped robot on the ground in a 3D world. Your goal is to navigate to a specific point in the 3D space. Your navigation goal is {goal point}. There are several objects in the scene that you may utilize: {object description}. Constraints you must follow: {constraints}. Your current plan is: {current plan} Now, you have a new observation of the environment: {observation}. Here are replanning suggestions by the advisor: {suggestions}
You must make adjustments to your current plans based on the suggestions provided by the advisor, such as expanding new skills for new objects or pruning infeasible skills.
"""

TEMPLATES = {
    Role.PROPOSER_OBJECT: PROPOSER_OBJECT,
    Role.PROPOSER_SKILL: PROPOSER_SKILL,
    Role.EVALUATOR: EVALUATOR,
    Role.PARAM_CALC: PARAM_CALC,
    Role.ADVISOR: ADVISOR,
    Role.ARBORIST: ARBORIST,
}

# the arborist reply is parsed with the skill-plan grammar
ARBORIST_ANSWER_HINT = """
Reply with the adjusted plans for the remaining steps using the following answer template:

[begin of plan]

Plan1: [

('step1','<skill>'),

...

],

[end of plan]
"""

PARAM_ANSWER_HINT = "\nEnd your reply with the final position written as [x, y, z].\n"

_SLOT = re.compile(r"\{([a-z][a-z\- ]*)\}")


def template_slots(role: Role) -> list[str]:
    return _SLOT.findall(TEMPLATES[Role(role)])


def render_prompt(role: Role, ctx: AgentContext, extras: Mapping[str, str] | None = None) -> str:
    """Fill a role template from the context plus role-specific ``extras``."""
    role = Role(role)
    values = dict(ctx.slots())
    values.update(extras or {})

    def fill(m: re.Match) -> str:
        name = m.group(1)
        if name not in values or values[name] is None:
            raise MissingSlot(f"{role.value} prompt needs slot '{name}'")
        return str(values[name])

    text = _SLOT.sub(fill, TEMPLATES[role])
    if role == Role.ARBORIST:
        text += ARBORIST_ANSWER_HINT
    elif role == Role.PARAM_CALC:
        text += PARAM_ANSWER_HINT
    return text


# -- rendering plan bodies ----------------------------------------------------------


def format_step(inv: SkillInvocation) -> str:
    return str(inv)


def format_skill_plans(plans: Sequence[SkillLevelPlan]) -> str:
    """Render plans in the skill-level answer format (markers included)."""
    out = ["[begin of plan]", ""]
    for i, plan in enumerate(plans, 1):
        out.append(f"Plan{i}: [")
        out.append("")
        for k, step in enumerate(plan.steps, 1):
            sep = "," if k < len(plan.steps) else ""
            out.append(f"('step{k}','{format_step(step)}'){sep}")
            out.append("")
        out.append("],")
        out.append("")
    out.append("[end of plan]")
    return "\n".join(out)


def format_evaluation(plans: Sequence[SkillLevelPlan], rewards: Sequence[Sequence[float]]) -> str:
    out = ["[begin of evaluation]", ""]
    for i, (plan, rs) in enumerate(zip(plans, rewards), 1):
        out.append(f"Plan{i}: [")
        out.append("")
        for k, (step, r) in enumerate(zip(plan.steps, rs), 1):
            sep = "," if k < len(plan.steps) else ""
            out.append(f"('step{k}', '{format_step(step)}', 'reward: {r:g}'){sep}")
            out.append("")
        out.append("],")
        out.append("")
    out.append("[end of evaluation]")
    return "\n".join(out)


def format_plan_inline(steps: Sequence[SkillInvocation]) -> str:
    return "[" + ", ".join(format_step(s) for s in steps) + "]" if steps else "[]"
