"""File formats: track logs, field exports, plan exports, episode logs.

All writers emit '\n' newlines and repr-formatted floats so outputs are
byte-identical across runs and round-trip losslessly through the readers.
"""

from __future__ import annotations

import json
import math
from typing import Iterable

from .flowfield import V_PED_MAX, FlowField, GridSpec, PedObservation, TrackFrame
from .geometry import Vec2

TRACK_HEADER = "# t,id,x,y,vx,vy"
FIELD_HEADER = "# i,j,cx,cy,fx,fy,mag"


class InputFormatError(ValueError):
    """Malformed input file; message carries the offending line number."""


def _fmt(x: float) -> str:
    return repr(float(x))


def write_track_log(path: str, frames: Iterable[TrackFrame]) -> None:
    """One row per observation, rows sorted by time."""
    with open(path, "w", newline="\n") as fh:
        fh.write(TRACK_HEADER + "\n")
        for frame in frames:
            for obs in frame.observations:
                fh.write(
                    f"{_fmt(frame.t)},{obs.id},{_fmt(obs.position.x)},{_fmt(obs.position.y)},"
                    f"{_fmt(obs.velocity.x)},{_fmt(obs.velocity.y)}\n"
                )


def read_track_log(path: str) -> list[TrackFrame]:
    """Parse a track log into frames grouped by timestamp.

    Raises InputFormatError (with the line number) on rows that do not
    split into t,id,x,y,vx,vy, on non-numeric fields, on velocities past
    the pedestrian speed cap, or when timestamps go backwards.
    """
    frames: list[TrackFrame] = []
    current_t: float | None = None
    current_obs: list[PedObservation] = []

    def flush() -> None:
        if current_t is not None:
            frames.append(TrackFrame(current_t, tuple(current_obs)))

    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise InputFormatError(
                    f"{path}:{line_no}: expected 6 fields t,id,x,y,vx,vy, got {len(parts)}"
                )
            try:
                t = float(parts[0])
                ped_id = int(parts[1])
                x, y, vx, vy = (float(p) for p in parts[2:])
            except ValueError as exc:
                raise InputFormatError(f"{path}:{line_no}: {exc}") from None
            if math.hypot(vx, vy) > V_PED_MAX:
                raise InputFormatError(
                    f"{path}:{line_no}: velocity {math.hypot(vx, vy):.3f} m/s exceeds "
                    f"the {V_PED_MAX} m/s pedestrian cap"
                )
            if current_t is not None and t < current_t:
                raise InputFormatError(
                    f"{path}:{line_no}: timestamps must be non-decreasing "
                    f"({t} after {current_t})"
                )
            if current_t is None or t != current_t:
                flush()
                current_t = t
                current_obs = []
            current_obs.append(PedObservation(ped_id, Vec2(x, y), Vec2(vx, vy)))
    flush()
    return frames


def write_field(path: str, field: FlowField) -> None:
    """One row per cell with its force vector; a meta line records the grid."""
    spec = field.spec
    with open(path, "w", newline="\n") as fh:
        fh.write(
            f"# grid {_fmt(spec.origin.x)} {_fmt(spec.origin.y)} "
            f"{_fmt(spec.cell_size)} {spec.width} {spec.height}\n"
        )
        fh.write(FIELD_HEADER + "\n")
        for j in range(spec.height):
            for i in range(spec.width):
                c = spec.cell_center(i, j)
                fx = float(field.force[j, i, 0])
                fy = float(field.force[j, i, 1])
                mag = Vec2(fx, fy).magnitude()
                fh.write(
                    f"{i},{j},{_fmt(c.x)},{_fmt(c.y)},{_fmt(fx)},{_fmt(fy)},{_fmt(mag)}\n"
                )


def read_field(path: str) -> FlowField:
    """Rebuild a FlowField (forces only) from a field export."""
    spec: GridSpec | None = None
    field: FlowField | None = None
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("# grid"):
                parts = line.split()
                if len(parts) != 7:
                    raise InputFormatError(f"{path}:{line_no}: malformed grid meta line")
                try:
                    ox, oy, cs = float(parts[2]), float(parts[3]), float(parts[4])
                    w, h = int(parts[5]), int(parts[6])
                except ValueError as exc:
                    raise InputFormatError(f"{path}:{line_no}: {exc}") from None
                spec = GridSpec(Vec2(ox, oy), cs, w, h)
                field = FlowField(spec)
                continue
            if line.startswith("#"):
                continue
            if field is None:
                raise InputFormatError(f"{path}:{line_no}: data row before grid meta line")
            parts = line.split(",")
            if len(parts) != 7:
                raise InputFormatError(
                    f"{path}:{line_no}: expected 7 fields i,j,cx,cy,fx,fy,mag"
                )
            try:
                i, j = int(parts[0]), int(parts[1])
                fx, fy = float(parts[4]), float(parts[5])
            except ValueError as exc:
                raise InputFormatError(f"{path}:{line_no}: {exc}") from None
            if not (0 <= i < field.spec.width and 0 <= j < field.spec.height):
                raise InputFormatError(f"{path}:{line_no}: cell ({i},{j}) outside grid")
            field.force[j, i, 0] = fx
            field.force[j, i, 1] = fy
    if field is None:
        raise InputFormatError(f"{path}: no grid meta line found")
    return field


def write_plan(path: str, result, field: FlowField, params) -> None:
    """Plan export: per-cell rows with the per-step cost split, then a
    summary line with the totals and the expansion count."""
    from .planner import edge_cost, flow_cost  # local import avoids a cycle

    spec = field.spec
    with open(path, "w", newline="\n") as fh:
        fh.write("# i,j,cx,cy,edge_cost_T,edge_cost_F\n")
        prev = None
        for cell in result.path:
            c = spec.cell_center(*cell)
            if prev is None:
                cost_t = 0.0
                cost_f = 0.0
            else:
                di, dj = cell[0] - prev[0], cell[1] - prev[1]
                step_len = ((di * spec.cell_size) ** 2 + (dj * spec.cell_size) ** 2) ** 0.5
                cost_t = params.step_weight * step_len
                cost_f = edge_cost(prev, cell, field, params) - cost_t
            fh.write(
                f"{cell[0]},{cell[1]},{_fmt(c.x)},{_fmt(c.y)},{_fmt(cost_t)},{_fmt(cost_f)}\n"
            )
            prev = cell
        fh.write(
            f"# total C_T={_fmt(result.cost_T)} C_F={_fmt(result.cost_F)} "
            f"C_phi={_fmt(result.cost_total)} expanded={result.expanded}\n"
        )


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_episode_jsonl(path: str, log) -> None:
    """Episode log: meta line, one line per step, final outcome line."""
    with open(path, "w", newline="\n") as fh:
        fh.write(
            _json_line(
                {
                    "scenario": log.scenario.to_dict(),
                    "planner": log.planner,
                    "sim_dt": log.sim_dt,
                    "max_t": log.max_t,
                }
            )
            + "\n"
        )
        for rec in log.records:
            fh.write(
                _json_line(
                    {
                        "t": rec.t,
                        "robot": [rec.robot_x, rec.robot_y, rec.robot_vx, rec.robot_vy],
                        "peds": [
                            [o.id, o.position.x, o.position.y, o.velocity.x, o.velocity.y]
                            for o in rec.peds
                        ],
                    }
                )
                + "\n"
            )
        fh.write(_json_line({"outcome": log.outcome}) + "\n")


def read_episode_jsonl(path: str):
    """Inverse of write_episode_jsonl."""
    from .sim import EpisodeLog, Scenario, StepRecord  # local import avoids a cycle

    with open(path) as fh:
        lines = [line for line in fh.read().splitlines() if line]
    if len(lines) < 2:
        raise InputFormatError(f"{path}: truncated episode log")
    try:
        meta = json.loads(lines[0])
        records = []
        for line in lines[1:-1]:
            d = json.loads(line)
            peds = tuple(
                PedObservation(int(p[0]), Vec2(p[1], p[2]), Vec2(p[3], p[4]))
                for p in d["peds"]
            )
            records.append(StepRecord(d["t"], *d["robot"], peds))
        outcome = json.loads(lines[-1])["outcome"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise InputFormatError(f"{path}: {exc}") from None
    return EpisodeLog(
        scenario=Scenario.from_dict(meta["scenario"]),
        planner=meta["planner"],
        sim_dt=meta["sim_dt"],
        max_t=meta["max_t"],
        records=records,
        outcome=outcome,
    )


def write_json(path: str, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: str):
    with open(path) as fh:
        return json.load(fh)
