"""Planning agents: prompts, parsers and the rule-based and remote backends."""

from .context import AgentContext
from .geometry import UnresolvableSymbol, resolve_symbol
from .interpretation import Interpretation, InterpretationKind
from .parsing import (
    MalformedStep,
    MissingMarkers,
    NonNumericReward,
    ObjectLevelPlan,
    ParseError,
    UnknownSkill,
    parse_evaluation,
    parse_skill_plans,
)
from .prompts import Role, render_prompt
from .remote import AuthMissing, EndpointConfig, HttpStatus, RemoteBackend, RemoteClient, Timeout, remote_complete
from .roles import EmptyProposal, advise, evaluate, propose, resolve_parameters, revise
from .rule_based import RuleBackend

__all__ = [
    "AgentContext",
    "AuthMissing",
    "EmptyProposal",
    "EndpointConfig",
    "HttpStatus",
    "Interpretation",
    "InterpretationKind",
    "MalformedStep",
    "MissingMarkers",
    "NonNumericReward",
    "ObjectLevelPlan",
    "ParseError",
    "RemoteBackend",
    "RemoteClient",
    "Role",
    "RuleBackend",
    "Timeout",
    "UnknownSkill",
    "UnresolvableSymbol",
    "advise",
    "evaluate",
    "parse_evaluation",
    "parse_skill_plans",
    "propose",
    "remote_complete",
    "render_prompt",
    "resolve_parameters",
    "resolve_symbol",
    "revise",
]
