"""Crowd flow-field extraction on a 2D mesh grid.

Pedestrian observations (position + velocity per tracked person per frame)
are deposited onto the nearest grid cell, where they maintain an
exponentially smoothed velocity estimate. A per-cell force is then computed
from three ingredients: a crowd-friction term derived from how dispersed the
occupied neighboring cells are, a self-propulsion term proportional to the
cell velocity, and a neighbor-influence term that couples a cell to the
velocities of cells within an influence radius ``h``. The resulting vector
field predicts the direction and magnitude of crowd motion even in cells no
pedestrian has visited yet, and test particles can be advected through it to
check the field against recorded tracks.

Two model ambiguities are kept configurable rather than silently resolved:
``rel_velocity_mode`` chooses whether neighbor velocities are summed or
averaged, and ``influence_sign`` chooses whether the influence term pulls a
cell toward its neighbors' motion (default) or away from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .geometry import EPS, Vec2

REL_VELOCITY_MODES = ("mean", "sum")
INFLUENCE_SIGNS = ("toward_neighbors", "as_written")

#: Default pedestrian speed sanity cap used by track-log validation (m/s).
V_PED_MAX = 3.0


@dataclass(frozen=True)
class PedObservation:
    """One tracked pedestrian at one instant: integer id, position (m),
    velocity (m/s)."""

    id: int
    position: Vec2
    velocity: Vec2


@dataclass(frozen=True)
class TrackFrame:
    """All pedestrian observations at one timestamp. Ids must be unique
    within a frame; timestamps must increase strictly across a log."""

    t: float
    observations: tuple[PedObservation, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "observations", tuple(self.observations))
        ids = [o.id for o in self.observations]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate pedestrian ids within a frame")


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the mesh grid: ``origin`` is the lower-left corner of cell
    (0, 0); cells are squares of side ``cell_size``."""

    origin: Vec2
    cell_size: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must have at least one cell per axis")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def cell_center(self, i: int, j: int) -> Vec2:
        return Vec2(
            self.origin.x + (i + 0.5) * self.cell_size,
            self.origin.y + (j + 0.5) * self.cell_size,
        )

    def contains(self, p: Vec2) -> bool:
        return (
            self.origin.x <= p.x <= self.origin.x + self.width * self.cell_size
            and self.origin.y <= p.y <= self.origin.y + self.height * self.cell_size
        )

    def cell_of(self, p: Vec2) -> tuple[int, int]:
        """Cell whose center is nearest to ``p`` (indices clamped to the
        grid, so out-of-bounds points map to the nearest boundary cell)."""
        i = int(math.floor((p.x - self.origin.x) / self.cell_size))
        j = int(math.floor((p.y - self.origin.y) / self.cell_size))
        return (min(max(i, 0), self.width - 1), min(max(j, 0), self.height - 1))

    def flat_index(self, i: int, j: int) -> int:
        return j * self.width + i


@dataclass(frozen=True)
class FlowParams:
    """Knobs of the force model.

    xi: self-propulsion coefficient (0.5 reproduces typical walking crowds).
    h: influence radius in meters; neighbors beyond it are ignored.
    rel_velocity_mode: aggregate in-radius neighbor velocities by "mean"
        (bounded, default) or plain "sum".
    influence_sign: "toward_neighbors" pulls a cell toward the local crowd
        velocity; "as_written" applies the opposite sign.
    ema_decay: blend weight of fresh observations into a cell's velocity
        estimate (1.0 = overwrite each frame).
    f_random: additive noise force, kept at zero for pedestrians.
    """

    xi: float = 0.5
    h: float = 1.0
    rel_velocity_mode: str = "mean"
    influence_sign: str = "toward_neighbors"
    ema_decay: float = 0.3
    f_random: Vec2 = dataclass_field(default_factory=lambda: Vec2(0.0, 0.0))

    def __post_init__(self) -> None:
        if self.xi < 0:
            raise ValueError("xi must be nonnegative")
        if self.h <= 0:
            raise ValueError("influence radius h must be positive")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ValueError("ema_decay must lie in [0, 1]")
        if self.rel_velocity_mode not in REL_VELOCITY_MODES:
            raise ValueError(f"rel_velocity_mode must be one of {REL_VELOCITY_MODES}")
        if self.influence_sign not in INFLUENCE_SIGNS:
            raise ValueError(f"influence_sign must be one of {INFLUENCE_SIGNS}")


@dataclass(frozen=True)
class FlowCell:
    """Snapshot of one cell: velocity estimate, total force, deposit count of
    the latest frame and the last friction coefficient."""

    velocity: Vec2
    force: Vec2
    occupancy: int
    mu: float


# ---------------------------------------------------------------------------
# Force model, scalar form. These are the reference formulas; the vectorized
# grid update in FlowField must agree with them (see tests).
# ---------------------------------------------------------------------------


def neighbor_friction(origin: Vec2, neighbor_positions: list[Vec2]) -> float:
    """Crowd friction coefficient at ``origin`` given neighbor positions:

        mu = 1 - sum_j d_j / (n * max_j d_j)

    0 for no neighbors or all-coincident neighbors, and 0 whenever all
    neighbors sit at the same distance. Always in [0, 1).
    """
    n = len(neighbor_positions)
    if n == 0:
        return 0.0
    dists = [origin.distance_to(p) for p in neighbor_positions]
    d_max = max(dists)
    if d_max <= 0.0:
        return 0.0
    # max() guards against near-equidistant inputs whose accumulated
    # rounding would otherwise push the quotient a few ulps past 1.
    return max(0.0, 1.0 - sum(dists) / (n * d_max))


def average_velocity(frame: TrackFrame) -> Vec2:
    """Component-wise mean velocity over everyone in the frame (zero for an
    empty frame)."""
    n = len(frame.observations)
    if n == 0:
        return Vec2(0.0, 0.0)
    sx = sum(o.velocity.x for o in frame.observations)
    sy = sum(o.velocity.y for o in frame.observations)
    return Vec2(sx / n, sy / n)


def relative_velocity(
    cell_center: Vec2,
    neighbors: list[tuple[Vec2, Vec2]],
    h: float,
    mode: str = "mean",
) -> Vec2:
    """Aggregate velocity of neighbors within radius ``h`` of ``cell_center``.

    ``neighbors`` is a list of (position, velocity) pairs; entries farther
    than ``h`` contribute nothing. Returns the vector sum (mode="sum") or
    mean (mode="mean") of the qualifying velocities, zero if none qualify.
    """
    if mode not in REL_VELOCITY_MODES:
        raise ValueError(f"mode must be one of {REL_VELOCITY_MODES}")
    sx = sy = 0.0
    count = 0
    for pos, vel in neighbors:
        if cell_center.distance_to(pos) <= h:
            sx += vel.x
            sy += vel.y
            count += 1
    if count == 0:
        return Vec2(0.0, 0.0)
    if mode == "mean":
        return Vec2(sx / count, sy / count)
    return Vec2(sx, sy)


def interaction_coefficient(v_rel: Vec2, v_avg: Vec2) -> float:
    """Interaction strength alpha = |v_rel| / |v_avg|, with alpha = 0 when the
    crowd-average velocity is (numerically) zero."""
    denom = v_avg.magnitude()
    if denom < EPS:
        return 0.0
    return v_rel.magnitude() / denom


def active_langevin_force(
    v_i: Vec2, v_rel: Vec2, mu: float, alpha: float, params: FlowParams
) -> Vec2:
    """Total per-cell force: friction + influence + self-propulsion (+ the
    fixed noise term, zero for pedestrians).

    With ``influence_sign="as_written"`` the influence term is
    ``alpha * (v_i - v_rel)``; the default ``"toward_neighbors"`` flips it to
    ``alpha * (v_rel - v_i)`` so that unvisited cells are pushed along their
    neighbors' motion instead of against it.
    """
    friction = Vec2(-mu * v_i.x, -mu * v_i.y)
    if params.influence_sign == "as_written":
        influence = Vec2(alpha * (v_i.x - v_rel.x), alpha * (v_i.y - v_rel.y))
    else:
        influence = Vec2(alpha * (v_rel.x - v_i.x), alpha * (v_rel.y - v_i.y))
    self_prop = Vec2(params.xi * v_i.x, params.xi * v_i.y)
    return Vec2(
        friction.x + influence.x + self_prop.x + params.f_random.x,
        friction.y + influence.y + self_prop.y + params.f_random.y,
    )


# ---------------------------------------------------------------------------
# The mesh grid.
# ---------------------------------------------------------------------------


class FlowField:
    """Mesh grid of velocity estimates and crowd forces.

    Internally cell state lives in numpy arrays indexed ``[j, i]`` (row =
    y index). ``deposit_frame`` absorbs one frame of observations,
    ``update_field`` recomputes the per-cell forces from the current
    estimates, ``sample_flow``/``advect`` read the force field back out.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        shape = (spec.height, spec.width)
        self.velocity = np.zeros(shape + (2,))
        self.force = np.zeros(shape + (2,))
        self.occupancy = np.zeros(shape, dtype=np.int64)
        self.mu = np.zeros(shape)
        self.frame_count = 0
        self.dropped_total = 0
        self._frame_avg_velocity = Vec2(0.0, 0.0)
        self._offset_cache: tuple[float, list[tuple[int, int, float]]] | None = None

    def cell(self, i: int, j: int) -> FlowCell:
        return FlowCell(
            velocity=Vec2(float(self.velocity[j, i, 0]), float(self.velocity[j, i, 1])),
            force=Vec2(float(self.force[j, i, 0]), float(self.force[j, i, 1])),
            occupancy=int(self.occupancy[j, i]),
            mu=float(self.mu[j, i]),
        )

    def cells(self) -> list[FlowCell]:
        """Row-major list of all cells (length width * height)."""
        return [
            self.cell(i, j)
            for j in range(self.spec.height)
            for i in range(self.spec.width)
        ]

    def deposit_frame(self, frame: TrackFrame, params: FlowParams) -> int:
        """Blend one frame of observations into the grid.

        Each observation lands in the cell containing it; several
        observations in one cell are averaged before the EMA blend, so the
        result is independent of observation order. Returns the number of
        observations dropped for being outside the grid.
        """
        spec = self.spec
        self.occupancy[:] = 0
        # Canonical order: ids are unique per frame, so sorting by id makes
        # the float accumulation order independent of input order.
        obs = sorted(frame.observations, key=lambda o: o.id)
        dropped = 0
        sums: dict[tuple[int, int], tuple[float, float, int]] = {}
        for o in obs:
            if not spec.contains(o.position):
                dropped += 1
                continue
            ij = spec.cell_of(o.position)
            sx, sy, n = sums.get(ij, (0.0, 0.0, 0))
            sums[ij] = (sx + o.velocity.x, sy + o.velocity.y, n + 1)
        d = params.ema_decay
        for (i, j), (sx, sy, n) in sums.items():
            self.occupancy[j, i] = n
            self.velocity[j, i, 0] = (1.0 - d) * self.velocity[j, i, 0] + d * (sx / n)
            self.velocity[j, i, 1] = (1.0 - d) * self.velocity[j, i, 1] + d * (sy / n)
        self.frame_count += 1
        self.dropped_total += dropped
        self._frame_avg_velocity = average_velocity(frame)
        return dropped

    def _neighbor_offsets(self, h: float) -> list[tuple[int, int, float]]:
        """Cell-index offsets whose center-to-center distance is within h
        (excluding the cell itself)."""
        cached = self._offset_cache
        if cached is not None and cached[0] == h:
            return cached[1]
        cs = self.spec.cell_size
        reach = int(math.floor(h / cs + 1e-12))
        offsets = []
        for dj in range(-reach, reach + 1):
            for di in range(-reach, reach + 1):
                if di == 0 and dj == 0:
                    continue
                dist = math.hypot(di * cs, dj * cs)
                if dist <= h:
                    offsets.append((di, dj, dist))
        self._offset_cache = (h, offsets)
        return offsets

    def update_field(self, params: FlowParams) -> None:
        """Recompute force and friction at every cell from the current
        velocity estimates, this frame's occupancy and the frame-average
        velocity. Pure in the cell ordering; cells with no occupied or
        moving neighborhood and zero velocity keep zero force."""
        offsets = self._neighbor_offsets(params.h)
        occ = (self.occupancy > 0).astype(float)
        moving = (np.linalg.norm(self.velocity, axis=2) > 0.0).astype(float)

        sum_dist = np.zeros_like(occ)
        n_occ = np.zeros_like(occ)
        max_dist = np.zeros_like(occ)
        sum_vel = np.zeros_like(self.velocity)
        n_moving = np.zeros_like(occ)
        for di, dj, dist in offsets:
            occ_sh = _shift(occ, di, dj)
            sum_dist += occ_sh * dist
            n_occ += occ_sh
            np.maximum(max_dist, occ_sh * dist, out=max_dist)
            mov_sh = _shift(moving, di, dj)
            n_moving += mov_sh
            sum_vel += _shift(self.velocity * moving[..., None], di, dj)

        denom = n_occ * max_dist
        mu = np.where(denom > 0.0, 1.0 - sum_dist / np.where(denom > 0.0, denom, 1.0), 0.0)
        np.maximum(mu, 0.0, out=mu)

        if params.rel_velocity_mode == "mean":
            counts = np.where(n_moving > 0.0, n_moving, 1.0)
            v_rel = sum_vel / counts[..., None]
        else:
            v_rel = sum_vel

        v_avg_mag = self._frame_avg_velocity.magnitude()
        if v_avg_mag < EPS:
            alpha = np.zeros_like(mu)
        else:
            alpha = np.linalg.norm(v_rel, axis=2) / v_avg_mag

        if params.influence_sign == "as_written":
            influence = alpha[..., None] * (self.velocity - v_rel)
        else:
            influence = alpha[..., None] * (v_rel - self.velocity)

        self.mu = mu
        self.force = (
            -mu[..., None] * self.velocity
            + influence
            + params.xi * self.velocity
            + np.array([params.f_random.x, params.f_random.y])
        )

    def sample_flow(self, p: Vec2) -> Vec2:
        """Bilinear interpolation of the force field at ``p``; positions
        outside the grid clamp to the nearest boundary cell."""
        spec = self.spec
        u = (p.x - spec.origin.x) / spec.cell_size - 0.5
        v = (p.y - spec.origin.y) / spec.cell_size - 0.5
        u = min(max(u, 0.0), float(spec.width - 1))
        v = min(max(v, 0.0), float(spec.height - 1))
        i0 = min(int(math.floor(u)), max(spec.width - 2, 0))
        j0 = min(int(math.floor(v)), max(spec.height - 2, 0))
        i1 = min(i0 + 1, spec.width - 1)
        j1 = min(j0 + 1, spec.height - 1)
        tx = u - i0
        ty = v - j0
        f = self.force
        fx = (
            (1 - tx) * (1 - ty) * f[j0, i0, 0]
            + tx * (1 - ty) * f[j0, i1, 0]
            + (1 - tx) * ty * f[j1, i0, 0]
            + tx * ty * f[j1, i1, 0]
        )
        fy = (
            (1 - tx) * (1 - ty) * f[j0, i0, 1]
            + tx * (1 - ty) * f[j0, i1, 1]
            + (1 - tx) * ty * f[j1, i0, 1]
            + tx * ty * f[j1, i1, 1]
        )
        return Vec2(float(fx), float(fy))

    def advect(
        self, start: Vec2, dt: float, steps: int, speed_scale: float = 2.0
    ) -> list[Vec2]:
        """Forward-Euler advection of a test particle: each step moves by
        ``dt * speed_scale * sample_flow(p)``. Returns the full trajectory
        including the start point (``steps + 1`` points)."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        if steps < 0:
            raise ValueError("steps must be nonnegative")
        traj = [start]
        p = start
        for _ in range(steps):
            f = self.sample_flow(p)
            p = Vec2(p.x + dt * speed_scale * f.x, p.y + dt * speed_scale * f.y)
            traj.append(p)
        return traj


def _shift(a: np.ndarray, di: int, dj: int) -> np.ndarray:
    """Array whose [j, i] entry is a[j + dj, i + di], zero-padded: the
    neighbor value at offset (di, dj) as seen from each cell."""
    out = np.zeros_like(a)
    h, w = a.shape[0], a.shape[1]
    src_j = slice(max(dj, 0), h + min(dj, 0))
    dst_j = slice(max(-dj, 0), h + min(-dj, 0))
    src_i = slice(max(di, 0), w + min(di, 0))
    dst_i = slice(max(-di, 0), w + min(-di, 0))
    out[dst_j, dst_i] = a[src_j, src_i]
    return out


# ---------------------------------------------------------------------------
# Trajectory comparison.
# ---------------------------------------------------------------------------


def resample_by_arclength(points: list[Vec2] | np.ndarray, n: int) -> np.ndarray:
    """Resample a polyline to ``n`` points uniformly spaced in arc length
    (endpoints preserved). A zero-length trajectory repeats its point."""
    if len(points) > 0 and isinstance(points[0], Vec2):
        pts = np.asarray([[p.x, p.y] for p in points], dtype=float)
    else:
        pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("trajectory must contain at least one point")
    if n < 1:
        raise ValueError("n must be at least 1")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0.0 or pts.shape[0] == 1:
        return np.repeat(pts[:1], n, axis=0)
    targets = np.linspace(0.0, total, n)
    out = np.empty((n, 2))
    out[:, 0] = np.interp(targets, s, pts[:, 0])
    out[:, 1] = np.interp(targets, s, pts[:, 1])
    return out


def trajectory_deviation(
    predicted: list[Vec2] | np.ndarray, actual: list[Vec2] | np.ndarray
) -> float:
    """Mean pointwise distance between two trajectories after resampling both
    to the shorter point count by arc-length interpolation."""
    if len(predicted) == 0 or len(actual) == 0:
        raise ValueError("cannot compare empty trajectories")
    n = min(len(predicted), len(actual))
    rp = resample_by_arclength(predicted, n)
    ra = resample_by_arclength(actual, n)
    return float(np.mean(np.linalg.norm(rp - ra, axis=1)))
