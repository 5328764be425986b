"""Closed-loop interactive navigation with a primitive skill tree and adaptive replanning."""

from .executor import EpisodeConfig, EpisodeResult, FailureClass, classify_failure, run_episode
from .skills import Skill, SkillInvocation, SkillOutcome, SkillParams
from .tree import NoViablePlan, PlanTree, SkillLevelPlan
from .world import BeliefState, Pose3, Scenario, SceneObject, World, load_scenario

__version__ = "0.1.0"

__all__ = [
    "BeliefState",
    "EpisodeConfig",
    "EpisodeResult",
    "FailureClass",
    "NoViablePlan",
    "PlanTree",
    "Pose3",
    "Scenario",
    "SceneObject",
    "Skill",
    "SkillInvocation",
    "SkillLevelPlan",
    "SkillOutcome",
    "SkillParams",
    "World",
    "classify_failure",
    "load_scenario",
    "run_episode",
]
