"""Flow-informed grid search.

Paths are found on the flow field's mesh grid with A*. Each edge pays a
geometric traversal cost plus a flow cost that is zero when the step moves
with the local crowd force and maximal when it moves against it, so with a
large flow weight the planner prefers routes that join the crowd's motion
even when they are longer. Cost bookkeeping keeps the traversal and flow
contributions separate so results can be audited.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .flowfield import FlowField, FlowParams, GridSpec
from .geometry import EPS, Vec2

Cell = tuple[int, int]

# Shrink the heuristic by a hair so floating-point rounding can never make it
# exceed the true remaining cost (which would break optimality).
_H_GUARD = 1.0 - 1e-12


class NoPathError(Exception):
    """No route exists between the requested endpoints."""


class OutOfBoundsError(Exception):
    """A requested endpoint lies outside the grid."""


@dataclass(frozen=True)
class CostParams:
    """Weights of the composite edge cost.

    lambda_flow scales the flow (social) cost, step_weight the per-meter
    traversal cost, heuristic_weight the goal-distance estimate. The search
    is guaranteed optimal when heuristic_weight <= step_weight.
    """

    lambda_flow: float = 2.0
    step_weight: float = 1.0
    heuristic_weight: float = 1.0
    connectivity: int = 8

    def __post_init__(self) -> None:
        if self.lambda_flow < 0 or self.step_weight < 0 or self.heuristic_weight < 0:
            raise ValueError("cost weights must be nonnegative")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass
class PlanResult:
    """A grid path with its cost decomposition: ``cost_T`` is the accumulated
    traversal cost, ``cost_F`` the accumulated flow cost, ``cost_total``
    their sum (the quantity the search minimized)."""

    path: list[Cell]
    waypoints: list[Vec2]
    cost_T: float
    cost_F: float
    cost_total: float
    expanded: int


def flow_cost(action_dir: Vec2, flow: Vec2, lambda_flow: float) -> float:
    """Cost of moving in ``action_dir`` through local flow vector ``flow``:

        lambda * |flow| * (1 - cos(theta)) / 2

    which is 0 when aligned with the flow and lambda * |flow| when opposed.
    Zero flow costs nothing in any direction.
    """
    mag = flow.magnitude()
    if mag < EPS:
        return 0.0
    a = action_dir.normalized()
    if a.magnitude() < EPS:
        return 0.0
    cos_theta = (a.x * flow.x + a.y * flow.y) / mag
    return lambda_flow * mag * (1.0 - cos_theta) / 2.0


def _neighbor_offsets(connectivity: int) -> list[Cell]:
    cardinal = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    if connectivity == 4:
        return cardinal
    return cardinal + [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def edge_cost(from_cell: Cell, to_cell: Cell, field: FlowField, params: CostParams) -> float:
    """Cost of one step between adjacent cells: traversal (step_weight times
    the center-to-center distance) plus the flow cost against the force
    stored at the destination cell."""
    di = to_cell[0] - from_cell[0]
    dj = to_cell[1] - from_cell[1]
    if (di, dj) not in _neighbor_offsets(params.connectivity):
        raise ValueError(f"cells {from_cell} and {to_cell} are not adjacent")
    cs = field.spec.cell_size
    step_len = math.hypot(di * cs, dj * cs)
    # flow_cost normalizes; passing the raw offset keeps the arithmetic
    # bit-identical to the flattened inner loop in plan().
    step_dir = Vec2(di, dj)
    dest_force = Vec2(
        float(field.force[to_cell[1], to_cell[0], 0]),
        float(field.force[to_cell[1], to_cell[0], 1]),
    )
    return params.step_weight * step_len + flow_cost(step_dir, dest_force, params.lambda_flow)


def heuristic(cell: Cell, goal_cell: Cell, spec: GridSpec, params: CostParams) -> float:
    """Goal-distance term: heuristic_weight times the Euclidean distance
    between cell centers."""
    return params.heuristic_weight * spec.cell_center(*cell).distance_to(
        spec.cell_center(*goal_cell)
    )


def plan(
    field: FlowField,
    start: Vec2,
    goal: Vec2,
    params: CostParams,
    blocked: frozenset[Cell] | set[Cell] = frozenset(),
) -> PlanResult:
    """A* from the cell containing ``start`` to the cell containing ``goal``.

    Ties are broken deterministically on (f, h, flat cell index). Closed
    cells are reopened if a strictly cheaper route to them appears, so the
    returned cost is the exact minimum over all grid paths.

    Raises OutOfBoundsError for endpoints off the grid, ValueError for
    blocked endpoints and NoPathError when the goal is unreachable.
    """
    spec = field.spec
    if not spec.contains(start) or not spec.contains(goal):
        raise OutOfBoundsError("start and goal must lie inside the grid")
    start_cell = spec.cell_of(start)
    goal_cell = spec.cell_of(goal)
    if start_cell in blocked or goal_cell in blocked:
        raise ValueError("start and goal cells must not be blocked")

    width, height = spec.width, spec.height
    cs = spec.cell_size
    lam = params.lambda_flow
    hw = params.heuristic_weight

    # Flatten the force grid into plain-float lists once per call; the inner
    # loop then mirrors edge_cost/flow_cost operation for operation (tests
    # hold them bit-identical) without per-edge object construction.
    fx = field.force[:, :, 0].tolist()
    fy = field.force[:, :, 1].tolist()
    mag = [[math.hypot(fx[j][i], fy[j][i]) for i in range(width)] for j in range(height)]
    steps = []
    for di, dj in _neighbor_offsets(params.connectivity):
        norm = math.hypot(di, dj)
        steps.append(
            (di, dj, params.step_weight * math.hypot(di * cs, dj * cs), di / norm, dj / norm)
        )

    gx, gy = spec.cell_center(*goal_cell).as_tuple()

    def h_of(i: int, j: int) -> float:
        cx, cy = spec.cell_center(i, j).as_tuple()
        return hw * math.hypot(cx - gx, cy - gy) * _H_GUARD

    g: dict[Cell, float] = {start_cell: 0.0}
    parent: dict[Cell, Cell] = {}
    h0 = h_of(*start_cell)
    # Heap entries carry the g value they were pushed with; an entry whose
    # stored g exceeds the cell's current g has been superseded. This makes
    # re-expansion after an improvement (reopening) automatic.
    open_heap: list[tuple[float, float, int, Cell, float]] = [
        (h0, h0, spec.flat_index(*start_cell), start_cell, 0.0)
    ]
    expanded = 0

    while open_heap:
        f, _, _, cell, g_pushed = heapq.heappop(open_heap)
        if g_pushed > g[cell]:
            continue  # stale entry
        expanded += 1
        if cell == goal_cell:
            return _build_result(field, params, parent, start_cell, goal_cell, g, expanded)
        ci, cj = cell
        g_cell = g[cell]
        for di, dj, step_cost, ax, ay in steps:
            ni, nj = ci + di, cj + dj
            if not (0 <= ni < width and 0 <= nj < height):
                continue
            nxt = (ni, nj)
            if nxt in blocked:
                continue
            m = mag[nj][ni]
            if m < EPS:
                fc = 0.0
            else:
                cos_theta = (ax * fx[nj][ni] + ay * fy[nj][ni]) / m
                fc = lam * m * (1.0 - cos_theta) / 2.0
            tentative = g_cell + (step_cost + fc)
            if tentative < g.get(nxt, math.inf):
                g[nxt] = tentative
                parent[nxt] = cell
                nh = h_of(ni, nj)
                heapq.heappush(
                    open_heap,
                    (tentative + nh, nh, nj * width + ni, nxt, tentative),
                )

    raise NoPathError(f"no path from cell {start_cell} to cell {goal_cell}")


def _build_result(
    field: FlowField,
    params: CostParams,
    parent: dict[Cell, Cell],
    start_cell: Cell,
    goal_cell: Cell,
    g: dict[Cell, float],
    expanded: int,
) -> PlanResult:
    path = [goal_cell]
    while path[-1] != start_cell:
        path.append(parent[path[-1]])
    path.reverse()
    cost_T = 0.0
    cost_F = 0.0
    cs = field.spec.cell_size
    for a, b in zip(path, path[1:]):
        di, dj = b[0] - a[0], b[1] - a[1]
        cost_T += params.step_weight * math.hypot(di * cs, dj * cs)
        cost_F += flow_cost(
            Vec2(di, dj),
            Vec2(float(field.force[b[1], b[0], 0]), float(field.force[b[1], b[0], 1])),
            params.lambda_flow,
        )
    return PlanResult(
        path=path,
        waypoints=[field.spec.cell_center(*c) for c in path],
        cost_T=cost_T,
        cost_F=cost_F,
        cost_total=g[goal_cell],
        expanded=expanded,
    )


class Replanner:
    """Receding-horizon wrapper around :func:`plan`.

    ``step`` returns the waypoint the robot should currently head for,
    replanning from the robot's position every ``period`` calls, when the
    next path cell becomes blocked, or when no plan exists yet. Waypoints
    are retired once the robot comes within ``waypoint_tol`` of them; the
    final waypoint is the exact goal position.
    """

    def __init__(
        self,
        params: CostParams,
        period: int = 10,
        waypoint_tol: float = 0.3,
        flow_params: FlowParams | None = None,
    ):
        self.params = params
        self.period = period
        self.waypoint_tol = waypoint_tol
        # When set, cell forces are refreshed from the latest deposits right
        # before each replan.
        self.flow_params = flow_params
        self._waypoints: list[Vec2] | None = None
        self._calls_since_plan = 0
        self.last_plan: PlanResult | None = None

    def step(
        self,
        field: FlowField,
        robot_pos: Vec2,
        goal: Vec2,
        blocked: frozenset[Cell] | set[Cell] = frozenset(),
    ) -> Vec2:
        if robot_pos.distance_to(goal) <= self.waypoint_tol:
            self._waypoints = []
            return goal
        if self._needs_replan(field, robot_pos, blocked):
            if self.flow_params is not None:
                field.update_field(self.flow_params)
            result = plan(field, robot_pos, goal, self.params, blocked)
            self.last_plan = result
            waypoints = list(result.waypoints)
            if waypoints:
                waypoints[-1] = goal
            if len(waypoints) > 1:
                # first waypoint is the robot's own cell center
                waypoints.pop(0)
            self._waypoints = waypoints
            self._calls_since_plan = 0
        self._calls_since_plan += 1
        assert self._waypoints is not None
        while len(self._waypoints) > 1 and robot_pos.distance_to(self._waypoints[0]) <= self.waypoint_tol:
            self._waypoints.pop(0)
        return self._waypoints[0] if self._waypoints else goal

    def _needs_replan(
        self, field: FlowField, robot_pos: Vec2, blocked: frozenset[Cell] | set[Cell]
    ) -> bool:
        if self._waypoints is None or not self._waypoints:
            return True
        if self._calls_since_plan >= self.period:
            return True
        # React early if anything now stands on the next few waypoints.
        return any(
            field.spec.cell_of(w) in blocked for w in self._waypoints[:3]
        )
