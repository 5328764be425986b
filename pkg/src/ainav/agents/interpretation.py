"""Observation interpretations handed to the advisor."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum


class InterpretationKind(str, Enum):
    FAILURE = "Failure"
    NEW_OBJECT = "NewObject"
    REVALUATION = "Revaluation"


@dataclass(frozen=True)
class Interpretation:
    """``subject`` is a node id for failures and an object id otherwise."""

    kind: InterpretationKind
    subject: int | str
    detail: str = ""
    replan: bool = False
    suggestions: str = ""

    def __post_init__(self) -> None:
        is_node = isinstance(self.subject, int) and not isinstance(self.subject, bool)
        if self.kind == InterpretationKind.FAILURE and not is_node:
            raise ValueError("a failure interpretation refers to a tree node")
        if self.kind != InterpretationKind.FAILURE and not isinstance(self.subject, str):
            raise ValueError(f"a {self.kind.value} interpretation refers to an object id")
        if self.replan and not self.suggestions.strip():
            raise ValueError("a replan decision needs suggestions")

    def decided(self, replan: bool, suggestions: str) -> "Interpretation":
        return replace(self, replan=replan, suggestions=suggestions if replan else "")

    def describe(self) -> str:
        if self.kind == InterpretationKind.FAILURE:
            return f"execution failure of step {self.subject}: {self.detail}"
        if self.kind == InterpretationKind.NEW_OBJECT:
            return f"new object {self.subject} observed: {self.detail}"
        return f"revaluation of {self.subject}: {self.detail}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "subject": self.subject,
            "detail": self.detail,
            "replan": self.replan,
            "suggestions": self.suggestions,
        }
