"""Hand-rolled reference implementations the tests cross-check against.

Everything here is written with plain tuples, loops and scalar math and
shares no code with the package internals, so a bug on either side cannot
hide behind common plumbing. The force functions mirror the published
formulas directly; the path oracle is a textbook Dijkstra.
"""

from __future__ import annotations

import heapq
import math

Point = tuple[float, float]


def friction_reference(origin: Point, neighbors: list[Point]) -> float:
    """mu = 1 - sum_j d_j / (n * max_j d_j), clamped to [0, 1).

    No neighbors or all neighbors coincident with the origin give 0.
    """
    if not neighbors:
        return 0.0
    dists = [math.hypot(p[0] - origin[0], p[1] - origin[1]) for p in neighbors]
    d_max = max(dists)
    if d_max <= 0.0:
        return 0.0
    return max(0.0, 1.0 - sum(dists) / (len(dists) * d_max))


def average_velocity_reference(velocities: list[Point]) -> Point:
    if not velocities:
        return (0.0, 0.0)
    n = len(velocities)
    return (sum(v[0] for v in velocities) / n, sum(v[1] for v in velocities) / n)


def relative_velocity_reference(
    center: Point, neighbors: list[tuple[Point, Point]], h: float, mode: str
) -> Point:
    """Sum or mean of the velocities of neighbors within distance h."""
    picked = [
        vel
        for pos, vel in neighbors
        if math.hypot(pos[0] - center[0], pos[1] - center[1]) <= h
    ]
    if not picked:
        return (0.0, 0.0)
    sx = sum(v[0] for v in picked)
    sy = sum(v[1] for v in picked)
    if mode == "mean":
        return (sx / len(picked), sy / len(picked))
    return (sx, sy)


def alpha_reference(v_rel: Point, v_avg: Point) -> float:
    denom = math.hypot(v_avg[0], v_avg[1])
    if denom < 1e-9:
        return 0.0
    return math.hypot(v_rel[0], v_rel[1]) / denom


def force_reference(
    v_i: Point,
    v_rel: Point,
    mu: float,
    alpha: float,
    xi: float,
    sign: str,
    f_random: Point = (0.0, 0.0),
) -> Point:
    """-mu*v_i + alpha*(v_rel - v_i) + xi*v_i + f_random, with the influence
    term flipped to alpha*(v_i - v_rel) for sign="as_written"."""
    if sign == "as_written":
        inf_x = alpha * (v_i[0] - v_rel[0])
        inf_y = alpha * (v_i[1] - v_rel[1])
    else:
        inf_x = alpha * (v_rel[0] - v_i[0])
        inf_y = alpha * (v_rel[1] - v_i[1])
    return (
        -mu * v_i[0] + inf_x + xi * v_i[0] + f_random[0],
        -mu * v_i[1] + inf_y + xi * v_i[1] + f_random[1],
    )


def dijkstra_cost(field, start_cell, goal_cell, params, edge_cost_fn) -> float:
    """Minimal path cost over the grid by plain Dijkstra (no heuristic, no
    reopening), using the supplied per-edge cost function. Returns inf when
    the goal is unreachable."""
    spec = field.spec
    offsets = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    if params.connectivity == 8:
        offsets += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    dist = {start_cell: 0.0}
    heap = [(0.0, start_cell)]
    done = set()
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in done:
            continue
        done.add(cell)
        if cell == goal_cell:
            return d
        for di, dj in offsets:
            nxt = (cell[0] + di, cell[1] + dj)
            if not (0 <= nxt[0] < spec.width and 0 <= nxt[1] < spec.height):
                continue
            nd = d + edge_cost_fn(cell, nxt, field, params)
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))
    return math.inf
