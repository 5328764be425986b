import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ainav.grid import TraversalGrid, path_length, rasterize_heights
from ainav.world import Bounds, ObjectKind

from builders import block, box
from oracles import bfs_components, same_partition

CELL = 0.1


def random_grid(seed: int, nx: int = 24, ny: int = 18) -> TraversalGrid:
    rng = np.random.default_rng(seed)
    heights = rng.choice([0.0, 0.0, 0.0, 0.2, 0.4, 1.0], size=(nx, ny))
    bounds = Bounds(0.0, 0.0, nx * CELL, ny * CELL)
    return TraversalGrid(bounds, heights, CELL, robot_radius=0.12, max_climb=0.3)


@pytest.mark.parametrize("seed", range(12))
def test_components_match_breadth_first_search(seed):
    g = random_grid(seed)
    oracle = bfs_components(g.valid, g.heights, g.max_climb)
    assert same_partition(g.labels, oracle, g.valid)


@pytest.mark.parametrize("seed", range(4))
def test_clearance_matches_brute_force(seed):
    g = random_grid(seed, 14, 10)
    nx, ny = g.shape
    for i in range(nx):
        for j in range(ny):
            cx, cy = (i + 0.5) * CELL, (j + 0.5) * CELL
            best = min(cx, nx * CELL - cx, cy, ny * CELL - cy)
            for a in range(nx):
                for b in range(ny):
                    if g.heights[a, b] > g.heights[i, j] + g.max_climb + 1e-9:
                        best = min(best, math.hypot(a - i, b - j) * CELL)
            assert g.clearance[i, j] == pytest.approx(best, abs=1e-9)


def test_astar_on_an_empty_grid_is_near_euclidean():
    bounds = Bounds(0.0, 0.0, 6.0, 4.0)
    g = TraversalGrid.build(bounds, [], CELL, 0.15, 0.3)
    a, b = g.cell_of(0.5, 0.5), g.cell_of(5.5, 3.3)
    cells = g.astar(a, b)
    assert cells[0] == a and cells[-1] == b
    straight = math.dist(g.center(*a), g.center(*b))
    assert path_length([g.center(*c) for c in cells]) <= straight * 1.09
    assert path_length(g.smooth(cells)) <= straight * 1.05


def test_astar_respects_the_climb_limit():
    bounds = Bounds(0.0, 0.0, 6.0, 3.0)
    wall = block("w", ObjectKind.WALL, 2.8, 3.2, 0.0, 3.0, 0.5)
    g = TraversalGrid.build(bounds, [wall], CELL, 0.15, 0.3)
    assert g.astar(g.cell_of(1.0, 1.5), g.cell_of(5.0, 1.5)) is None
    low = block("w", ObjectKind.PLATFORM, 2.8, 3.2, 0.0, 3.0, 0.25)
    g = TraversalGrid.build(bounds, [low], CELL, 0.15, 0.3)
    path = g.astar(g.cell_of(1.0, 1.5), g.cell_of(5.0, 1.5))
    assert path is not None
    assert all(g.step_violation(a, b) is None for a, b in zip(path, path[1:]))


def test_heights_cover_any_overlapping_cell():
    bounds = Bounds(0.0, 0.0, 2.0, 2.0)
    h = rasterize_heights(bounds, [box("b", 1.03, 1.03, size=(0.2, 0.2, 0.3))], CELL)
    covered = np.argwhere(h > 0)
    assert h.max() == pytest.approx(0.3)
    assert covered.min(axis=0).tolist() == [9, 9] and covered.max(axis=0).tolist() == [11, 11]


def test_soft_cost_to_go_penalises_blocked_edges():
    bounds = Bounds(0.0, 0.0, 4.0, 2.0)
    wall = block("w", ObjectKind.WALL, 1.9, 2.1, 0.0, 2.0, 1.0)
    g = TraversalGrid.build(bounds, [wall], CELL, 0.15, 0.3)
    goal = g.cell_of(3.5, 1.0)
    cost = g.cost_to_go(goal)
    assert cost[goal] == 0.0
    assert np.isfinite(cost).all()
    assert cost[g.cell_of(0.5, 1.0)] > 3.0


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_connectivity_is_symmetric_and_matches_astar(seed):
    g = random_grid(seed, 16, 12)
    rng = np.random.default_rng(seed)
    cells = [tuple(c) for c in np.argwhere(g.valid)]
    if len(cells) < 2:
        return
    a, b = (cells[k] for k in rng.choice(len(cells), 2, replace=False))
    same = g.labels[a] == g.labels[b]
    assert (g.astar(a, b) is not None) == same == (g.astar(b, a) is not None)
