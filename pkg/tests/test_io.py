"""File format tests: track logs, field exports, plan exports, episode
logs and the shared JSON writer. Round trips must be lossless and parse
errors must carry the offending line number."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from fipp import (
    CostParams,
    FlowField,
    GridSpec,
    PedObservation,
    TrackFrame,
    Vec2,
    plan,
)
from fipp.io import (
    InputFormatError,
    read_episode_jsonl,
    read_field,
    read_json,
    read_track_log,
    write_episode_jsonl,
    write_field,
    write_json,
    write_plan,
    write_track_log,
)
from fipp.sim import generate_scenario, run_episode


def _frames():
    return [
        TrackFrame(
            0.0,
            (
                PedObservation(1, Vec2(1.25, 2.5), Vec2(1.2, 0.0)),
                PedObservation(2, Vec2(3.0, 4.0), Vec2(0.0, -0.7)),
            ),
        ),
        TrackFrame(0.1, (PedObservation(1, Vec2(1.37, 2.5), Vec2(1.2, 0.0)),)),
    ]


# ---------------------------------------------------------------------------
# track logs
# ---------------------------------------------------------------------------


def test_track_log_round_trip(tmp_path):
    path = str(tmp_path / "tracks.csv")
    frames = _frames()
    write_track_log(path, frames)
    assert read_track_log(path) == frames


def test_track_log_write_is_byte_stable(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_track_log(str(a), _frames())
    write_track_log(str(b), _frames())
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "# t,id,x,y,vx,vy"


def test_track_log_skips_empty_frames(tmp_path):
    path = str(tmp_path / "tracks.csv")
    frames = [
        _frames()[0],
        TrackFrame(0.1, ()),
        TrackFrame(0.2, (PedObservation(1, Vec2(1.0, 1.0), Vec2(0.0, 0.0)),)),
    ]
    write_track_log(path, frames)
    back = read_track_log(path)
    # The empty frame produces no rows, so it vanishes on the way back.
    assert [f.t for f in back] == [0.0, 0.2]


def test_track_log_groups_rows_by_timestamp(tmp_path):
    path = tmp_path / "tracks.csv"
    path.write_text(
        "# t,id,x,y,vx,vy\n"
        "0.0,1,1.0,1.0,0.0,0.0\n"
        "0.0,2,2.0,2.0,0.0,0.0\n"
        "0.5,1,1.1,1.0,0.2,0.0\n"
    )
    frames = read_track_log(str(path))
    assert [len(f.observations) for f in frames] == [2, 1]
    assert frames[1].t == 0.5


def test_track_log_reports_field_count_with_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# t,id,x,y,vx,vy\n0.0,1,1.0,1.0,0.0,0.0\n0.1,2,3.0\n")
    with pytest.raises(InputFormatError, match=r":3:.*expected 6 fields"):
        read_track_log(str(path))


def test_track_log_reports_non_numeric_fields(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.0,1,one,1.0,0.0,0.0\n")
    with pytest.raises(InputFormatError, match=":1:"):
        read_track_log(str(path))


def test_track_log_rejects_regressing_timestamps(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,1,1.0,1.0,0.0,0.0\n0.5,1,1.0,1.0,0.0,0.0\n")
    with pytest.raises(InputFormatError, match=":2:.*non-decreasing"):
        read_track_log(str(path))


def test_track_log_rejects_implausible_speeds(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.0,1,1.0,1.0,2.5,2.5\n")  # 3.54 m/s, over the 3.0 cap
    with pytest.raises(InputFormatError, match=":1:.*cap"):
        read_track_log(str(path))


def test_track_log_accepts_speed_at_the_cap(tmp_path):
    path = tmp_path / "ok.csv"
    path.write_text("0.0,1,1.0,1.0,3.0,0.0\n")
    frames = read_track_log(str(path))
    assert frames[0].observations[0].velocity == Vec2(3.0, 0.0)


def test_track_log_ignores_blanks_and_comments(tmp_path):
    path = tmp_path / "ok.csv"
    path.write_text("\n# comment\n0.0,1,1.0,1.0,0.0,0.0\n\n")
    assert len(read_track_log(str(path))) == 1


# ---------------------------------------------------------------------------
# field exports
# ---------------------------------------------------------------------------


def _field():
    spec = GridSpec(Vec2(1.0, -2.0), 0.5, 4, 3)
    field = FlowField(spec)
    rng = np.random.default_rng(5)
    field.force[:] = rng.normal(size=field.force.shape)
    return field


def test_field_round_trip_is_exact(tmp_path):
    path = str(tmp_path / "field.csv")
    field = _field()
    write_field(path, field)
    back = read_field(path)
    assert back.spec == field.spec
    assert np.array_equal(back.force, field.force)


def test_field_rows_carry_cell_centers_and_magnitude(tmp_path):
    path = tmp_path / "field.csv"
    field = _field()
    write_field(str(path), field)
    row = path.read_text().splitlines()[2].split(",")
    assert row[0] == "0" and row[1] == "0"
    assert float(row[2]) == 1.25 and float(row[3]) == -1.75
    assert float(row[6]) == pytest.approx(math.hypot(float(row[4]), float(row[5])))


def test_field_read_requires_meta_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0,0,0.25,0.25,1.0,0.0,1.0\n")
    with pytest.raises(InputFormatError, match="before grid meta"):
        read_field(str(path))
    empty = tmp_path / "empty.csv"
    empty.write_text("# just a comment\n")
    with pytest.raises(InputFormatError, match="no grid meta"):
        read_field(str(empty))


def test_field_read_rejects_out_of_grid_cells(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# grid 0.0 0.0 0.5 2 2\n9,0,0.25,0.25,1.0,0.0,1.0\n")
    with pytest.raises(InputFormatError, match=r":2:.*outside grid"):
        read_field(str(path))


def test_field_read_rejects_malformed_meta(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# grid 0.0 0.0 0.5 2\n")
    with pytest.raises(InputFormatError, match="malformed grid meta"):
        read_field(str(path))


# ---------------------------------------------------------------------------
# plan exports
# ---------------------------------------------------------------------------


def test_write_plan_rows_and_totals(tmp_path):
    spec = GridSpec(Vec2(0.0, 0.0), 1.0, 5, 5)
    field = FlowField(spec)
    params = CostParams()
    result = plan(field, Vec2(0.5, 0.5), Vec2(4.5, 4.5), params)
    path = tmp_path / "plan.csv"
    write_plan(str(path), result, field, params)
    lines = path.read_text().splitlines()
    assert lines[0] == "# i,j,cx,cy,edge_cost_T,edge_cost_F"
    assert len(lines) == 2 + len(result.path)
    first = lines[1].split(",")
    assert (int(first[0]), int(first[1])) == result.path[0]
    assert float(first[4]) == 0.0  # no step onto the start cell
    total = lines[-1]
    assert total.startswith("# total C_T=")
    assert f"C_phi={result.cost_total!r}" in total
    assert f"expanded={result.expanded}" in total
    step_costs = [float(line.split(",")[4]) for line in lines[1:-1]]
    assert sum(step_costs) == pytest.approx(result.cost_T)


# ---------------------------------------------------------------------------
# episode logs
# ---------------------------------------------------------------------------


def test_episode_round_trip(tmp_path):
    sc = generate_scenario("single_flow", 8, seed=2)
    log = run_episode(sc, "tr", max_t=3.0)
    path = str(tmp_path / "episode.jsonl")
    write_episode_jsonl(path, log)
    back = read_episode_jsonl(path)
    assert back.scenario == log.scenario
    assert back.planner == log.planner
    assert back.sim_dt == log.sim_dt
    assert back.max_t == log.max_t
    assert back.outcome == log.outcome
    assert back.records == log.records
    assert back.error is None  # not serialized


def test_episode_lines_are_compact_sorted_json(tmp_path):
    sc = generate_scenario("chaotic", 3, seed=1)
    log = run_episode(sc, "tr", max_t=1.0)
    path = tmp_path / "episode.jsonl"
    write_episode_jsonl(str(path), log)
    lines = path.read_text().splitlines()
    meta = json.loads(lines[0])
    assert list(meta) == sorted(meta)
    assert ": " not in lines[1]  # compact separators
    assert json.loads(lines[-1]) == {"outcome": log.outcome}


def test_episode_read_rejects_truncated_file(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"planner":"tr"}\n')
    with pytest.raises(InputFormatError, match="truncated"):
        read_episode_jsonl(str(path))


def test_episode_read_rejects_garbage(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"planner":"tr"}\nnot json\n{"outcome":"reached"}\n')
    with pytest.raises(InputFormatError):
        read_episode_jsonl(str(path))


# ---------------------------------------------------------------------------
# json helper
# ---------------------------------------------------------------------------


def test_write_json_sorted_with_trailing_newline(tmp_path):
    path = tmp_path / "out.json"
    write_json(str(path), {"zeta": 1, "alpha": {"b": 2, "a": 3}})
    text = path.read_text()
    assert text.endswith("\n")
    assert text.index('"alpha"') < text.index('"zeta"')
    assert read_json(str(path)) == {"zeta": 1, "alpha": {"b": 2, "a": 3}}
