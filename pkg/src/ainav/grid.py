"""Height-aware occupancy grid: traversability, connectivity, A* and cost-to-go."""

from __future__ import annotations

import heapq
import math
from functools import lru_cache
from typing import Sequence

import numpy as np
import shapely
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .world import Bounds, SceneObject

# penalty (m) for crossing an untraversable edge in the soft cost-to-go field
BLOCK_PENALTY = 5.0

_DIRS = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
_SQRT2 = math.sqrt(2.0)


def rasterize_heights(
    bounds: Bounds, objects: Sequence[SceneObject], cell: float
) -> np.ndarray:
    nx = max(1, int(math.ceil((bounds.xmax - bounds.xmin) / cell - 1e-9)))
    ny = max(1, int(math.ceil((bounds.ymax - bounds.ymin) / cell - 1e-9)))
    heights = np.zeros((nx, ny))
    xs = bounds.xmin + (np.arange(nx) + 0.5) * cell
    ys = bounds.ymin + (np.arange(ny) + 0.5) * cell
    for o in objects:
        add_object_heights(heights, o, bounds, cell, xs, ys)
    return heights


def add_object_heights(
    heights: np.ndarray,
    obj: SceneObject,
    bounds: Bounds,
    cell: float,
    xs: np.ndarray | None = None,
    ys: np.ndarray | None = None,
) -> None:
    nx, ny = heights.shape
    if xs is None:
        xs = bounds.xmin + (np.arange(nx) + 0.5) * cell
        ys = bounds.ymin + (np.arange(ny) + 0.5) * cell
    x0, y0, x1, y1 = obj.footprint.bounds
    i0 = max(0, int((x0 - bounds.xmin) / cell) - 1)
    i1 = min(nx, int((x1 - bounds.xmin) / cell) + 2)
    j0 = max(0, int((y0 - bounds.ymin) / cell) - 1)
    j1 = min(ny, int((y1 - bounds.ymin) / cell) + 2)
    if i0 >= i1 or j0 >= j1:
        return
    gx, gy = np.meshgrid(xs[i0:i1], ys[j0:j1], indexing="ij")
    # a cell counts as covered when any part of it overlaps the footprint
    grown = obj.footprint.buffer(cell / 2.0, join_style="mitre")
    inside = shapely.contains_xy(grown, gx, gy)
    window = heights[i0:i1, j0:j1]
    np.maximum(window, np.where(inside, obj.top, 0.0), out=window)


class TraversalGrid:
    """Cells are valid robot-centre locations; edges respect the climb limit.

    ``clearance`` is the distance from a cell centre to the nearest cell that
    rises more than ``max_climb`` above it, or to the bounds. A cell is valid
    when its clearance exceeds ``robot_radius``.
    Two 8-neighbours are connected when both are valid and their height
    difference is at most ``max_climb``; diagonal moves may not cut corners.
    """

    def __init__(
        self,
        bounds: Bounds,
        heights: np.ndarray,
        cell: float,
        robot_radius: float,
        max_climb: float,
    ) -> None:
        self.bounds = bounds
        self.cell = cell
        self.robot_radius = robot_radius
        self.max_climb = max_climb
        self.heights = heights
        self.shape = heights.shape
        self.clearance = self._clearance()
        self.valid = self.clearance > robot_radius
        self._edges = self._edge_masks()
        self._labels: np.ndarray | None = None
        self._cost_cache: dict[int, np.ndarray] = {}
        self._mask_rows: list[list[int]] | None = None

    @classmethod
    def build(
        cls,
        bounds: Bounds,
        objects: Sequence[SceneObject],
        cell: float,
        robot_radius: float,
        max_climb: float,
    ) -> "TraversalGrid":
        return cls(bounds, rasterize_heights(bounds, objects, cell), cell, robot_radius, max_climb)

    def _clearance(self) -> np.ndarray:
        h = self.heights
        nx, ny = self.shape
        xs = (np.arange(nx) + 0.5) * self.cell
        ys = (np.arange(ny) + 0.5) * self.cell
        w = self.bounds.xmax - self.bounds.xmin
        d = self.bounds.ymax - self.bounds.ymin
        border = np.minimum.outer(np.minimum(xs, w - xs), np.minimum(ys, d - ys))
        clear = border.copy()
        for level in np.unique(h):
            tall = h > level + self.max_climb + 1e-9
            if not tall.any():
                continue
            dist = ndimage.distance_transform_edt(~tall) * self.cell
            sel = h == level
            clear[sel] = np.minimum(border[sel], dist[sel])
        return clear

    # -- indexing ---------------------------------------------------------------

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        i = int(math.floor((x - self.bounds.xmin) / self.cell))
        j = int(math.floor((y - self.bounds.ymin) / self.cell))
        return (min(max(i, 0), self.shape[0] - 1), min(max(j, 0), self.shape[1] - 1))

    def center(self, i: int, j: int) -> tuple[float, float]:
        return (
            self.bounds.xmin + (i + 0.5) * self.cell,
            self.bounds.ymin + (j + 0.5) * self.cell,
        )

    def flat(self, i: int, j: int) -> int:
        return i * self.shape[1] + j

    def _edge_masks(self) -> list[np.ndarray]:
        nx, ny = self.shape
        h, v = self.heights, self.valid
        masks = []
        for di, dj in _DIRS:
            m = np.zeros((nx, ny), dtype=bool)
            src = (slice(max(0, -di), nx - max(0, di)), slice(max(0, -dj), ny - max(0, dj)))
            dst = (slice(max(0, di), nx - max(0, -di)), slice(max(0, dj), ny - max(0, -dj)))
            ok = v[src] & v[dst] & (np.abs(h[dst] - h[src]) <= self.max_climb + 1e-9)
            if di and dj:
                # both orthogonal cells must be valid as well
                a = (src[0], dst[1])
                b = (dst[0], src[1])
                ok &= v[a] & v[b]
            m[src] = ok
            masks.append(m)
        return masks

    # -- connectivity ---------------------------------------------------------------

    def _graph(self, soft: bool):
        nx, ny = self.shape
        idx = np.arange(nx * ny).reshape(nx, ny)
        rows, cols, data = [], [], []
        for k, (di, dj) in enumerate(_DIRS):
            src = (slice(max(0, -di), nx - max(0, di)), slice(max(0, -dj), ny - max(0, dj)))
            dst = (slice(max(0, di), nx - max(0, -di)), slice(max(0, dj), ny - max(0, -dj)))
            step = self.cell * (_SQRT2 if di and dj else 1.0)
            ok = self._edges[k][src]
            if soft:
                rows.append(idx[src].ravel())
                cols.append(idx[dst].ravel())
                data.append(np.where(ok, step, step + BLOCK_PENALTY).ravel())
            else:
                rows.append(idx[src][ok])
                cols.append(idx[dst][ok])
                data.append(np.full(int(ok.sum()), step))
        n = nx * ny
        return coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()

    @property
    def labels(self) -> np.ndarray:
        if self._labels is None:
            _, lab = connected_components(self._graph(soft=False), directed=False)
            self._labels = lab.reshape(self.shape)
        return self._labels

    def nearest_valid(
        self, x: float, y: float, max_dist: float, z: float | None = None
    ) -> tuple[int, int] | None:
        """Closest valid cell within ``max_dist``; with ``z``, only cells a step away in height."""

        def ok(i: int, j: int) -> bool:
            if not self.valid[i, j]:
                return False
            return z is None or abs(self.heights[i, j] - z) <= self.max_climb + 1e-9

        ci, cj = self.cell_of(x, y)
        if ok(ci, cj):
            return (ci, cj)
        r = int(math.ceil(max_dist / self.cell)) + 1
        best, best_d = None, math.inf
        for i in range(max(0, ci - r), min(self.shape[0], ci + r + 1)):
            for j in range(max(0, cj - r), min(self.shape[1], cj + r + 1)):
                if not ok(i, j):
                    continue
                cx, cy = self.center(i, j)
                d = math.hypot(cx - x, cy - y)
                if d <= max_dist + 1e-9 and (d, i, j) < (best_d, *(best or (0, 0))):
                    best, best_d = (i, j), d
        return best

    def connected(
        self,
        x0: float,
        y0: float,
        x1: float,
        y1: float,
        snap: float | None = None,
        z0: float | None = None,
        z1: float | None = None,
    ) -> bool:
        snap = self.cell * 0.75 if snap is None else snap
        a = self.nearest_valid(x0, y0, snap, z0)
        b = self.nearest_valid(x1, y1, snap, z1)
        if a is None or b is None:
            return False
        return bool(self.labels[a] == self.labels[b])

    def cost_to_go(self, goal: tuple[int, int]) -> np.ndarray:
        """Soft shortest-path distance (m) to ``goal``; blocked edges are penalised."""
        key = self.flat(*goal)
        if key not in self._cost_cache:
            dist = dijkstra(self._graph(soft=True), directed=True, indices=key)
            self._cost_cache[key] = dist.reshape(self.shape)
        return self._cost_cache[key]

    # -- search -----------------------------------------------------------------

    def _rows(self) -> list[list[int]]:
        if self._mask_rows is None:
            bits = np.zeros(self.shape, dtype=np.int64)
            for k, m in enumerate(self._edges):
                bits |= m.astype(np.int64) << k
            self._mask_rows = bits.tolist()
        return self._mask_rows

    def astar(self, start: tuple[int, int], goal: tuple[int, int]) -> list[tuple[int, int]] | None:
        """8-connected A* with the octile heuristic; returns the cell path or None."""
        if not (self.valid[start] and self.valid[goal]):
            return None
        if self.labels[start] != self.labels[goal]:
            return None
        rows = self._rows()
        gi, gj = goal
        c = self.cell

        def h(i: int, j: int) -> float:
            dx, dy = abs(i - gi), abs(j - gj)
            return c * (max(dx, dy) + (_SQRT2 - 1.0) * min(dx, dy))

        g = {start: 0.0}
        parent: dict[tuple[int, int], tuple[int, int]] = {}
        heap = [(h(*start), 0.0, start)]
        closed = set()
        while heap:
            _, gc, cur = heapq.heappop(heap)
            if cur in closed:
                continue
            if cur == goal:
                path = [cur]
                while cur in parent:
                    cur = parent[cur]
                    path.append(cur)
                return path[::-1]
            closed.add(cur)
            i, j = cur
            bits = rows[i][j]
            for k, (di, dj) in enumerate(_DIRS):
                if not (bits >> k) & 1:
                    continue
                nb = (i + di, j + dj)
                if nb in closed:
                    continue
                ng = gc + c * (_SQRT2 if di and dj else 1.0)
                if ng < g.get(nb, math.inf) - 1e-12:
                    g[nb] = ng
                    parent[nb] = cur
                    heapq.heappush(heap, (ng + h(*nb), ng, nb))
        return None

    def segment_clear(self, p: tuple[float, float], q: tuple[float, float]) -> bool:
        """Straight-line traversability between two points, sampled at quarter cells."""
        length = math.hypot(q[0] - p[0], q[1] - p[1])
        n = max(1, int(math.ceil(length / (self.cell * 0.25))))
        prev = None
        for k in range(n + 1):
            t = k / n
            cell = self.cell_of(p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t)
            if not self.valid[cell]:
                return False
            if prev is not None and prev != cell:
                if abs(self.heights[cell] - self.heights[prev]) > self.max_climb + 1e-9:
                    return False
            prev = cell
        return True

    def step_violation(self, a: tuple[int, int], b: tuple[int, int]) -> str | None:
        """Why moving from cell ``a`` to cell ``b`` is not allowed, or None.

        Moving deeper into an invalid region is a collision; moving out of one
        (growing clearance) is allowed so the robot can back away from contact.
        """
        if a == b:
            return None
        dh = float(self.heights[b] - self.heights[a])
        if dh > self.max_climb + 1e-9:
            return "rise"
        if dh < -self.max_climb - 1e-9:
            return "drop"
        if not self.valid[b] and self.clearance[b] < min(self.clearance[a], self.robot_radius) - 1e-9:
            return "collision"
        return None

    def smooth(self, cells: list[tuple[int, int]]) -> list[tuple[float, float]]:
        """Greedy line-of-sight shortcutting of a cell path into waypoints."""
        pts = [self.center(*c) for c in cells]
        if len(pts) <= 2:
            return pts
        out = [pts[0]]
        anchor = 0
        while anchor < len(pts) - 1:
            nxt = anchor + 1
            for k in range(len(pts) - 1, anchor + 1, -1):
                if self.segment_clear(pts[anchor], pts[k]):
                    nxt = k
                    break
            out.append(pts[nxt])
            anchor = nxt
        return out


@lru_cache(maxsize=256)
def get_grid(
    bounds: Bounds,
    objects: tuple[SceneObject, ...],
    cell: float,
    robot_radius: float,
    max_climb: float,
) -> TraversalGrid:
    """Memoised grid construction keyed on the exact geometry."""
    return TraversalGrid.build(bounds, objects, cell, robot_radius, max_climb)


def path_length(points: Sequence[tuple[float, float]]) -> float:
    return float(
        sum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(points, points[1:]))
    )
