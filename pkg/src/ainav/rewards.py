"""Reward kernels for the walk, climb, navigation and pushing skills.

Every function returns a :class:`RewardBreakdown` listing each term with its
raw value, weight and weighted contribution, so totals can be audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .world import wrap_angle

PHI_SCALE = 0.25
FEET = 4

# (name, weight) in table order
WALK_TERMS = (
    ("Linear velocity tracking", 1.0),
    ("Angular velocity tracking", 0.5),
    ("Linear velocity penalty", 2.0),
    ("Angular velocity penalty", 0.05),
    ("Joint torques", 0.00001),
    ("Joint accelerations", 2.5e-7),
    ("Action rate", 0.01),
    ("Collisions", 1.0),
    ("Feet air time", 0.125),
)
CLIMB_TERMS = (
    ("Position tracking", 1.0),
    ("Move direction", 2.0),
) + WALK_TERMS[2:]
NAVIGATION_TERMS = (
    ("Position tracking", 5.0),
    ("Negative x-velocity penalty", 2.0),
    ("Collisions", 10.0),
)
PUSHING_TERMS = (
    ("Object Position tracking", 2.0),
    ("Object heading tracking", 1.0),
    ("Negative x-velocity penalty", 1.0),
    ("Face to object", 2.0),
)


def _vec(v: Sequence[float], n: int | None = None, name: str = "vector") -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if n is not None and a.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class JointSample:
    q_j: np.ndarray
    qdot_j: np.ndarray
    qddot_j: np.ndarray
    q_star: np.ndarray
    q_star_prev: np.ndarray
    tau_j: np.ndarray

    def __post_init__(self) -> None:
        names = ("q_j", "qdot_j", "qddot_j", "q_star", "q_star_prev", "tau_j")
        arrays = [_vec(getattr(self, n), name=n) for n in names]
        if len({a.shape[0] for a in arrays}) != 1:
            raise ValueError("joint vectors must share one length")
        for n, a in zip(names, arrays):
            object.__setattr__(self, n, a)

    @classmethod
    def zeros(cls, n: int = 12) -> "JointSample":
        z = np.zeros(n)
        return cls(z, z, z, z, z, z)


@dataclass(frozen=True)
class BaseSample:
    v_b: np.ndarray
    omega_b: np.ndarray
    x_b: np.ndarray
    theta_b: float = 0.0
    n_collision: int = 0
    t_air: np.ndarray = field(default_factory=lambda: np.full(FEET, 0.5))

    def __post_init__(self) -> None:
        object.__setattr__(self, "v_b", _vec(self.v_b, 3, "v_b"))
        object.__setattr__(self, "omega_b", _vec(self.omega_b, 3, "omega_b"))
        object.__setattr__(self, "x_b", _vec(self.x_b, 3, "x_b"))
        object.__setattr__(self, "t_air", _vec(self.t_air, FEET, "t_air"))
        if not math.isfinite(self.theta_b):
            raise ValueError("theta_b must be finite")
        if self.n_collision < 0:
            raise ValueError("n_collision must be non-negative")


@dataclass(frozen=True)
class CommandSample:
    v_b_star: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_b_star: np.ndarray = field(default_factory=lambda: np.zeros(3))
    x_b_star: np.ndarray = field(default_factory=lambda: np.zeros(3))
    x_o: np.ndarray = field(default_factory=lambda: np.zeros(3))
    x_o_star: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for n in ("v_b_star", "omega_b_star", "x_b_star", "x_o", "x_o_star"):
            object.__setattr__(self, n, _vec(getattr(self, n), 3, n))


@dataclass(frozen=True)
class RewardTerm:
    name: str
    raw_value: float
    weight: float

    @property
    def weighted(self) -> float:
        return self.weight * self.raw_value


@dataclass(frozen=True)
class RewardBreakdown:
    terms: tuple[RewardTerm, ...]

    @property
    def total(self) -> float:
        return math.fsum(t.weighted for t in self.terms)

    def as_dict(self) -> dict:
        return {
            "terms": [
                {"name": t.name, "raw_value": t.raw_value, "weight": t.weight, "weighted": t.weighted}
                for t in self.terms
            ],
            "total": self.total,
        }


def phi(x: Sequence[float] | float) -> float:
    """exp(-||x||^2 / 0.25)."""
    a = np.atleast_1d(np.asarray(x, dtype=float))
    return math.exp(-float(a @ a) / PHI_SCALE)


def cos_angle(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine of the angle between two vectors; 0 when either is (near) zero."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na < 1e-9 or nb < 1e-9:
        return 0.0
    return float(a @ b) / (na * nb)


def _breakdown(table: Sequence[tuple[str, float]], values: Sequence[float]) -> RewardBreakdown:
    return RewardBreakdown(
        tuple(RewardTerm(n, float(v), w) for (n, w), v in zip(table, values, strict=True))
    )


def _regularizers(j: JointSample, b: BaseSample) -> list[float]:
    return [
        -float(b.v_b[2] ** 2),
        -float(b.omega_b[:2] @ b.omega_b[:2]),
        -float(j.tau_j @ j.tau_j),
        -float(j.qddot_j @ j.qddot_j),
        -float((j.q_star - j.q_star_prev) @ (j.q_star - j.q_star_prev)),
        -float(b.n_collision),
        float(np.sum(b.t_air - 0.5)),
    ]


def walk_reward(j: JointSample, b: BaseSample, c: CommandSample) -> RewardBreakdown:
    lin = phi(c.v_b_star[:2] - b.v_b[:2])
    ang = phi(c.omega_b_star[2] - b.omega_b[2])
    return _breakdown(WALK_TERMS, [lin, ang, *_regularizers(j, b)])


def climb_reward(j: JointSample, b: BaseSample, c: CommandSample) -> RewardBreakdown:
    err = c.x_b_star - b.x_b
    pos = 1.0 - 0.5 * float(np.linalg.norm(err))
    direction = cos_angle(b.v_b, err)
    return _breakdown(CLIMB_TERMS, [pos, direction, *_regularizers(j, b)])


def _x_velocity_term(b: BaseSample, flip_sign: bool) -> float:
    # as printed the term rewards forward x-velocity; flip_sign penalises it instead
    v = max(float(b.v_b[0]), 0.0)
    return -v if flip_sign else v


def navigation_reward(
    b: BaseSample, c: CommandSample, flip_x_velocity_sign: bool = False
) -> RewardBreakdown:
    pos = 1.0 - 0.5 * float(np.linalg.norm(c.x_b_star - b.x_b))
    return _breakdown(
        NAVIGATION_TERMS,
        [pos, _x_velocity_term(b, flip_x_velocity_sign), -float(b.n_collision)],
    )


def pushing_reward(
    b: BaseSample, c: CommandSample, flip_x_velocity_sign: bool = False
) -> RewardBreakdown:
    pos = 1.0 - float(np.linalg.norm(c.x_o_star[:2] - c.x_o[:2]))
    heading = 1.0 - abs(wrap_angle(float(c.x_o_star[2] - c.x_o[2])))
    facing = (math.cos(b.theta_b), math.sin(b.theta_b))
    face = cos_angle(facing, c.x_o[:2] - b.x_b[:2])
    return _breakdown(
        PUSHING_TERMS, [pos, heading, _x_velocity_term(b, flip_x_velocity_sign), face]
    )


REWARD_TABLES = {
    "walk": WALK_TERMS,
    "climb": CLIMB_TERMS,
    "navigation": NAVIGATION_TERMS,
    "pushing": PUSHING_TERMS,
}
