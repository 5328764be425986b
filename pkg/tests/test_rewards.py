import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ainav.rewards import (
    REWARD_TABLES,
    BaseSample,
    CommandSample,
    JointSample,
    climb_reward,
    cos_angle,
    navigation_reward,
    phi,
    pushing_reward,
    walk_reward,
)

import oracles

# weights transcribed by hand from the reward tables
_PENALTIES = [
    ("Linear velocity penalty", 2.0),
    ("Angular velocity penalty", 0.05),
    ("Joint torques", 1e-5),
    ("Joint accelerations", 2.5e-7),
    ("Action rate", 0.01),
    ("Collisions", 1.0),
    ("Feet air time", 0.125),
]
EXPECTED = {
    "walk": [("Linear velocity tracking", 1.0), ("Angular velocity tracking", 0.5)] + _PENALTIES,
    "climb": [("Position tracking", 1.0), ("Move direction", 2.0)] + _PENALTIES,
    "navigation": [("Position tracking", 5.0), ("Negative x-velocity penalty", 2.0), ("Collisions", 10.0)],
    "pushing": [
        ("Object Position tracking", 2.0),
        ("Object heading tracking", 1.0),
        ("Negative x-velocity penalty", 1.0),
        ("Face to object", 2.0),
    ],
}
WEIGHT_CASES = [(skill, i, name, w) for skill, rows in EXPECTED.items() for i, (name, w) in enumerate(rows)]


@pytest.mark.parametrize("skill,index,name,weight", WEIGHT_CASES)
def test_table_weight(skill, index, name, weight):
    assert REWARD_TABLES[skill][index] == (name, weight)


def test_tables_have_no_extra_terms():
    assert {k: len(v) for k, v in REWARD_TABLES.items()} == {k: len(v) for k, v in EXPECTED.items()}


def still(x=(0.0, 0.0, 0.0), **kw) -> BaseSample:
    return BaseSample(v_b=kw.pop("v", (0, 0, 0)), omega_b=(0, 0, 0), x_b=x, **kw)


# -- phi --------------------------------------------------------------------------------


def test_phi_fixed_points():
    assert phi([0.0, 0.0]) == 1.0
    assert phi(0.0) == 1.0
    assert abs(phi([0.3, 0.4]) - math.exp(-1.0)) <= 1e-12
    assert abs(phi(0.5) - math.exp(-1.0)) <= 1e-12


@given(st.floats(0.0, 5.0), st.floats(1e-3, 1.0))
def test_phi_strictly_decreasing_and_bounded(r, dr):
    a, b = phi([r, 0.0]), phi([r + dr, 0.0])
    assert 0.0 <= b < a <= 1.0


def test_phi_vanishes_far_away():
    assert phi([100.0]) == 0.0


def test_cosine_degenerate_is_zero():
    assert cos_angle([0, 0, 0], [1, 0, 0]) == 0.0
    assert cos_angle([1, 0], [-2, 0]) == -1.0


# -- table examples ------------------------------------------------------------------------


def test_walk_perfect_tracking():
    j = JointSample.zeros()
    c = CommandSample(v_b_star=(0.4, 0.1, 0.0), omega_b_star=(0.0, 0.0, 0.3))
    b = BaseSample(v_b=(0.4, 0.1, 0.0), omega_b=(0.0, 0.0, 0.3), x_b=(0, 0, 0))
    assert walk_reward(j, b, c).total == pytest.approx(1.5, abs=1e-12)
    hit = BaseSample(v_b=(0.4, 0.1, 0.0), omega_b=(0.0, 0.0, 0.3), x_b=(0, 0, 0), n_collision=1)
    assert walk_reward(j, hit, c).total == pytest.approx(0.5, abs=1e-12)


def test_climb_examples():
    j = JointSample.zeros()
    c = CommandSample(x_b_star=(2.0, 0.0, 0.0))
    assert climb_reward(j, still(v=(0.5, 0, 0)), c).total == pytest.approx(2.0, abs=1e-12)
    assert climb_reward(j, still(v=(-0.5, 0, 0)), c).total == pytest.approx(-2.0, abs=1e-12)
    at = climb_reward(j, still(x=(2.0, 0.0, 0.0), v=(0.5, 0, 0)), c)
    assert [t.raw_value for t in at.terms[:2]] == [1.0, 0.0]


def test_navigation_examples():
    c = CommandSample(x_b_star=(1.0, 2.0, 0.0))
    at = (1.0, 2.0, 0.0)
    assert navigation_reward(still(at, v=(-0.3, 0, 0)), c).total == pytest.approx(5.0)
    assert navigation_reward(still(at, v=(0.5, 0, 0)), c).total == pytest.approx(6.0)
    assert navigation_reward(still(at, n_collision=1), c).total == pytest.approx(-5.0)


def test_x_velocity_sign_flag():
    c = CommandSample(x_b_star=(0.0, 0.0, 0.0))
    b = still(v=(0.5, 0, 0))
    assert navigation_reward(b, c, flip_x_velocity_sign=True).total == pytest.approx(4.0)
    assert pushing_reward(b, CommandSample(x_o=(1, 0, 0), x_o_star=(1, 0, 0))).total == pytest.approx(5.5)
    assert pushing_reward(
        b, CommandSample(x_o=(1, 0, 0), x_o_star=(1, 0, 0)), flip_x_velocity_sign=True
    ).total == pytest.approx(4.5)


def test_pushing_examples():
    robot = still((0.0, 0.0, 0.0))
    on_target = CommandSample(x_o=(1.0, 0.0, 0.2), x_o_star=(1.0, 0.0, 0.2))
    assert pushing_reward(robot, on_target).total == pytest.approx(5.0)
    off = CommandSample(x_o=(1.0, 0.0, 0.2), x_o_star=(1.0, 0.5, 0.2))
    assert pushing_reward(robot, off).total == pytest.approx(4.0)
    away = BaseSample(v_b=(0, 0, 0), omega_b=(0, 0, 0), x_b=(0, 0, 0), theta_b=math.pi)
    face = pushing_reward(away, on_target).terms[3]
    assert face.weighted == pytest.approx(-2.0)


def test_heading_error_wraps():
    c = CommandSample(x_o=(1.0, 0.0, math.pi - 0.1), x_o_star=(1.0, 0.0, -math.pi + 0.1))
    assert pushing_reward(still(), c).terms[1].raw_value == pytest.approx(0.8)


def test_invalid_samples_raise():
    with pytest.raises(ValueError):
        BaseSample(v_b=(0, 0), omega_b=(0, 0, 0), x_b=(0, 0, 0))
    with pytest.raises(ValueError):
        CommandSample(x_b_star=(math.inf, 0, 0))
    with pytest.raises(ValueError):
        JointSample(np.zeros(12), np.zeros(12), np.zeros(12), np.zeros(12), np.zeros(12), np.zeros(11))


# -- random samples against the straight-line reimplementation --------------------------------


def random_samples(rng: np.random.Generator):
    n = 12
    j = JointSample(*(rng.normal(scale=s, size=n) for s in (0.5, 2.0, 50.0, 0.5, 0.5, 20.0)))
    b = BaseSample(
        v_b=rng.normal(size=3),
        omega_b=rng.normal(size=3),
        x_b=rng.normal(size=3),
        theta_b=float(rng.uniform(-math.pi, math.pi)),
        n_collision=int(rng.integers(0, 3)),
        t_air=rng.uniform(0.0, 1.0, size=4),
    )
    c = CommandSample(*(rng.normal(size=3) for _ in range(5)))
    return j, b, c


@pytest.mark.parametrize("seed", range(5))
def test_random_totals_match_reimplementation(seed):
    rng = np.random.default_rng(seed)
    for _ in range(200):
        j, b, c = random_samples(rng)
        assert abs(walk_reward(j, b, c).total - oracles.walk_total(j, b, c)) <= 1e-12
        assert abs(climb_reward(j, b, c).total - oracles.climb_total(j, b, c)) <= 1e-12
        assert abs(navigation_reward(b, c).total - oracles.navigation_total(b, c)) <= 1e-12
        assert abs(pushing_reward(b, c).total - oracles.pushing_total(b, c)) <= 1e-12


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_total_is_the_weighted_sum(seed):
    j, b, c = random_samples(np.random.default_rng(seed))
    for br in (walk_reward(j, b, c), climb_reward(j, b, c), navigation_reward(b, c), pushing_reward(b, c)):
        assert abs(br.total - sum(t.weight * t.raw_value for t in br.terms)) <= 1e-12
        assert br.as_dict()["total"] == br.total


def test_velocity_tracking_is_stationary_at_zero_error():
    h = 1e-5
    j = JointSample.zeros()
    c = CommandSample(v_b_star=(0.3, -0.2, 0.0), omega_b_star=(0.0, 0.0, 0.4))

    def f(vx, vy, wz):
        b = BaseSample(v_b=(vx, vy, 0.0), omega_b=(0.0, 0.0, wz), x_b=(0, 0, 0))
        return walk_reward(j, b, c).total

    x0 = np.array([0.3, -0.2, 0.4])
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        grad = (f(*(x0 + e)) - f(*(x0 - e))) / (2 * h)
        assert abs(grad) <= 1e-6
    assert f(*x0) > f(*(x0 + [0.05, 0.0, 0.0]))
