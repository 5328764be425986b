"""Primitive skill tree: prefix-merged candidate plans with discounted value backup."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .skills import SkillInvocation

ROOT = 0


class NoViablePlan(RuntimeError):
    def __init__(self, message: str = "no viable plan") -> None:
        super().__init__(message)


class NodeStatus(str, Enum):
    PROPOSED = "Proposed"
    SELECTED = "Selected"
    EXECUTED = "Executed"
    FAILED = "Failed"
    PRUNED = "Pruned"


@dataclass(frozen=True)
class SkillLevelPlan:
    plan_id: str
    steps: tuple[SkillInvocation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError(f"plan {self.plan_id} has no steps")
        for s in self.steps:
            if not s.symbolic_param:
                raise ValueError(f"plan {self.plan_id}: every step needs a symbolic parameter")


@dataclass
class PlanNode:
    node_id: int
    invocation: SkillInvocation | None
    parent: int | None
    r: float = 0.0
    terminal_bonus: float = 0.0
    Q: float = 0.0
    children: list[int] = field(default_factory=list)
    status: NodeStatus = NodeStatus.PROPOSED

    @property
    def pruned(self) -> bool:
        return self.status == NodeStatus.PRUNED


@dataclass(frozen=True)
class NodeScore:
    r: float
    executable: bool = True


class PlanTree:
    """Tree of skill invocations below a synthetic root (id 0)."""

    def __init__(self, gamma: float = 0.9, terminal_bonus: float = 1.0) -> None:
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if terminal_bonus < 0:
            raise ValueError("terminal bonus must be non-negative")
        self.gamma = gamma
        self.bonus = terminal_bonus
        self.nodes: dict[int, PlanNode] = {ROOT: PlanNode(ROOT, None, None)}
        self._next = 1

    # -- structure --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def skill_nodes(self) -> list[int]:
        return [n for n in self.nodes if n != ROOT]

    def node(self, node_id: int) -> PlanNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise KeyError(f"unknown node id {node_id}") from None

    def path_to(self, node_id: int) -> list[int]:
        """Node ids from the first skill below the root down to ``node_id``."""
        path = []
        n = self.node(node_id)
        while n.parent is not None:
            path.append(n.node_id)
            n = self.nodes[n.parent]
        return path[::-1]

    def subtree(self, node_id: int) -> list[int]:
        out, stack = [], [node_id]
        while stack:
            n = stack.pop()
            out.append(n)
            stack.extend(reversed(self.nodes[n].children))
        return out

    def leaves(self) -> list[int]:
        return [n for n, node in self.nodes.items() if n != ROOT and not node.children]

    def _insert(self, attach_at: int, plan: SkillLevelPlan) -> list[int]:
        added = []
        cur = attach_at
        for step in plan.steps:
            match = None
            for c in self.nodes[cur].children:
                child = self.nodes[c]
                if not child.pruned and child.invocation.key == step.key:
                    match = c
                    break
            if match is None:
                match = self._next
                self._next += 1
                self.nodes[match] = PlanNode(match, step, cur)
                self.nodes[cur].children.append(match)
                added.append(match)
            cur = match
        return added

    def add_subtree(self, attach_at: int, suffix_plans: Sequence[SkillLevelPlan]) -> list[int]:
        """Merge ``suffix_plans`` below ``attach_at``; returns the new node ids."""
        if self.node(attach_at).pruned:
            raise ValueError(f"cannot attach under pruned node {attach_at}")
        added = []
        for plan in suffix_plans:
            added.extend(self._insert(attach_at, plan))
        return added

    def prune_node(self, node_id: int) -> None:
        if node_id == ROOT:
            raise ValueError("cannot prune the root")
        self.node(node_id)
        for n in self.subtree(node_id):
            self.nodes[n].status = NodeStatus.PRUNED

    # -- values -----------------------------------------------------------------

    def annotate(
        self,
        scores: Mapping[int, NodeScore],
        goal_reaching_leaves: Iterable[int] = (),
        nodes: Iterable[int] | None = None,
    ) -> None:
        """Set rewards, prune non-executable subtrees and award terminal bonuses.

        ``nodes`` restricts annotation to a subset (e.g. freshly added nodes).
        """
        targets = list(self.skill_nodes if nodes is None else nodes)
        for n in targets:
            if n not in scores:
                raise KeyError(f"missing score for node {n}")
            s = scores[n]
            if not 0.0 <= s.r <= 1.0:
                raise ValueError(f"reward {s.r} of node {n} outside [0, 1]")
        for n in targets:
            self.nodes[n].r = float(scores[n].r)
        for n in targets:
            if not scores[n].executable:
                self.prune_node(n)
        goals = set(goal_reaching_leaves)
        for n in targets:
            node = self.nodes[n]
            live_children = [c for c in node.children if not self.nodes[c].pruned]
            node.terminal_bonus = (
                self.bonus if n in goals and not node.pruned and not live_children else 0.0
            )

    def backpropagate(self) -> None:
        """Q(n) = r(n) + bonus(n) + gamma * mean Q over live children."""
        order = self.subtree(ROOT)
        for n in reversed(order):
            node = self.nodes[n]
            if node.pruned:
                continue
            live = [self.nodes[c].Q for c in node.children if not self.nodes[c].pruned]
            q = node.r + node.terminal_bonus
            if live:
                q += self.gamma * (sum(live) / len(live))
            node.Q = q

    def best_child(self, node_id: int) -> int | None:
        best = None
        for c in self.nodes[node_id].children:
            child = self.nodes[c]
            if child.pruned:
                continue
            if best is None or child.Q > self.nodes[best].Q or (
                child.Q == self.nodes[best].Q and c < best
            ):
                best = c
        return best

    def select_skeleton(self, start: int = ROOT) -> list[int]:
        """Greedy argmax-Q descent from ``start``; marks the path Selected."""
        first = self.best_child(start)
        if first is None:
            raise NoViablePlan()
        for node in self.nodes.values():
            if node.status == NodeStatus.SELECTED:
                node.status = NodeStatus.PROPOSED
        path = []
        cur = first
        while cur is not None:
            path.append(cur)
            cur = self.best_child(cur)
        for n in path:
            self.nodes[n].status = NodeStatus.SELECTED
        return path

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "terminal_bonus": self.bonus,
            "nodes": [
                {
                    "id": n.node_id,
                    "parent": n.parent,
                    "children": list(n.children),
                    "invocation": None if n.invocation is None else n.invocation.to_dict(),
                    "r": round(n.r, 9),
                    "terminal_bonus": n.terminal_bonus,
                    "Q": round(n.Q, 9),
                    "status": n.status.value,
                }
                for n in (self.nodes[k] for k in sorted(self.nodes))
            ],
            "edges": [
                [n.parent, n.node_id] for k, n in sorted(self.nodes.items()) if n.parent is not None
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PlanTree":
        tree = cls(d["gamma"], d["terminal_bonus"])
        tree.nodes = {}
        for nd in d["nodes"]:
            inv = nd["invocation"]
            tree.nodes[nd["id"]] = PlanNode(
                node_id=nd["id"],
                invocation=None if inv is None else SkillInvocation.from_dict(inv),
                parent=nd["parent"],
                r=nd["r"],
                terminal_bonus=nd["terminal_bonus"],
                Q=nd["Q"],
                children=list(nd["children"]),
                status=NodeStatus(nd["status"]),
            )
        tree._next = max(tree.nodes) + 1
        return tree


def build_tree(
    plans: Sequence[SkillLevelPlan], gamma: float = 0.9, terminal_bonus: float = 1.0
) -> PlanTree:
    if not plans:
        raise ValueError("build_tree needs at least one plan")
    tree = PlanTree(gamma, terminal_bonus)
    tree.add_subtree(ROOT, plans)
    return tree


def annotate(tree: PlanTree, scores, goal_reaching_leaves=()) -> PlanTree:
    tree.annotate(scores, goal_reaching_leaves)
    return tree


def backpropagate(tree: PlanTree) -> PlanTree:
    tree.backpropagate()
    return tree


def select_skeleton(tree: PlanTree) -> list[int]:
    return tree.select_skeleton()


def prune_node(tree: PlanTree, node_id: int) -> PlanTree:
    tree.prune_node(node_id)
    return tree


def add_subtree(tree: PlanTree, attach_at: int, suffix_plans: Sequence[SkillLevelPlan]) -> PlanTree:
    tree.add_subtree(attach_at, suffix_plans)
    return tree
