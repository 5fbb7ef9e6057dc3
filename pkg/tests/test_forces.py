"""Scalar force-model checks: hand-worked examples, a randomized sweep
against the reference formulas in oracles.py, and property tests for the
bounds the model guarantees."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fipp import (
    FlowParams,
    PedObservation,
    TrackFrame,
    Vec2,
    active_langevin_force,
    average_velocity,
    interaction_coefficient,
    neighbor_friction,
    relative_velocity,
)
from oracles import (
    alpha_reference,
    average_velocity_reference,
    force_reference,
    friction_reference,
    relative_velocity_reference,
)

coords = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def _obs(ped_id: int, pos: tuple, vel: tuple) -> PedObservation:
    return PedObservation(ped_id, Vec2(*pos), Vec2(*vel))


# ---------------------------------------------------------------------------
# neighbor_friction
# ---------------------------------------------------------------------------


def test_friction_two_collinear_neighbors():
    # dists 1 and 2: mu = 1 - 3 / (2 * 2) = 0.25
    mu = neighbor_friction(Vec2(0.0, 0.0), [Vec2(1.0, 0.0), Vec2(2.0, 0.0)])
    assert mu == 0.25


def test_friction_equidistant_neighbors_is_zero():
    corners = [Vec2(1.0, 0.0), Vec2(0.0, 1.0), Vec2(-1.0, 0.0), Vec2(0.0, -1.0)]
    assert neighbor_friction(Vec2(0.0, 0.0), corners) == 0.0


def test_friction_no_neighbors_is_zero():
    assert neighbor_friction(Vec2(3.0, 4.0), []) == 0.0


def test_friction_coincident_neighbors_is_zero():
    p = Vec2(2.0, 2.0)
    assert neighbor_friction(p, [p, p, p]) == 0.0


def test_friction_single_neighbor_is_zero():
    # n = 1 forces sum == max, whatever the distance.
    assert neighbor_friction(Vec2(0.0, 0.0), [Vec2(0.7, -0.3)]) == 0.0


def test_friction_grows_with_spread():
    origin = Vec2(0.0, 0.0)
    tight = neighbor_friction(origin, [Vec2(1.0, 0.0), Vec2(1.1, 0.0)])
    spread = neighbor_friction(origin, [Vec2(0.1, 0.0), Vec2(1.1, 0.0)])
    assert 0.0 <= tight < spread < 1.0


@given(
    st.tuples(coords, coords),
    st.lists(st.tuples(coords, coords), min_size=1, max_size=12),
)
def test_friction_stays_in_unit_interval(origin, neighbors):
    mu = neighbor_friction(Vec2(*origin), [Vec2(*p) for p in neighbors])
    assert 0.0 <= mu < 1.0


# ---------------------------------------------------------------------------
# average_velocity / relative_velocity / interaction_coefficient
# ---------------------------------------------------------------------------


def test_average_velocity_componentwise_mean():
    frame = TrackFrame(
        0.0,
        (
            _obs(0, (0.0, 0.0), (1.0, 0.0)),
            _obs(1, (1.0, 1.0), (0.0, 1.0)),
            _obs(2, (2.0, 2.0), (2.0, -1.0)),
        ),
    )
    assert average_velocity(frame) == Vec2(1.0, 0.0)


def test_average_velocity_empty_frame_is_zero():
    assert average_velocity(TrackFrame(0.0, ())) == Vec2(0.0, 0.0)


def test_relative_velocity_radius_filter():
    center = Vec2(0.0, 0.0)
    neighbors = [
        (Vec2(0.5, 0.0), Vec2(1.0, 0.0)),
        (Vec2(5.0, 0.0), Vec2(9.0, 9.0)),  # out of radius, ignored
    ]
    assert relative_velocity(center, neighbors, h=1.0, mode="mean") == Vec2(1.0, 0.0)
    assert relative_velocity(center, neighbors, h=1.0, mode="sum") == Vec2(1.0, 0.0)


def test_relative_velocity_boundary_distance_included():
    neighbors = [(Vec2(1.0, 0.0), Vec2(0.0, 2.0))]
    assert relative_velocity(Vec2(0.0, 0.0), neighbors, h=1.0, mode="mean") == Vec2(0.0, 2.0)


def test_relative_velocity_mean_vs_sum():
    center = Vec2(0.0, 0.0)
    neighbors = [
        (Vec2(0.5, 0.0), Vec2(1.0, 0.0)),
        (Vec2(0.0, 0.5), Vec2(0.0, 1.0)),
    ]
    assert relative_velocity(center, neighbors, h=1.0, mode="mean") == Vec2(0.5, 0.5)
    assert relative_velocity(center, neighbors, h=1.0, mode="sum") == Vec2(1.0, 1.0)


def test_relative_velocity_no_qualifying_neighbors():
    neighbors = [(Vec2(3.0, 3.0), Vec2(1.0, 1.0))]
    assert relative_velocity(Vec2(0.0, 0.0), neighbors, h=1.0, mode="sum") == Vec2(0.0, 0.0)


def test_relative_velocity_rejects_unknown_mode():
    with pytest.raises(ValueError):
        relative_velocity(Vec2(0.0, 0.0), [], h=1.0, mode="median")


def test_interaction_coefficient_ratio():
    assert interaction_coefficient(Vec2(1.0, 0.0), Vec2(2.0, 0.0)) == 0.5
    assert interaction_coefficient(Vec2(0.0, 3.0), Vec2(0.0, 3.0)) == 1.0


def test_interaction_coefficient_zero_average_guard():
    assert interaction_coefficient(Vec2(5.0, 5.0), Vec2(0.0, 0.0)) == 0.0
    assert interaction_coefficient(Vec2(0.0, 0.0), Vec2(1.0, 0.0)) == 0.0


# ---------------------------------------------------------------------------
# active_langevin_force
# ---------------------------------------------------------------------------


def test_force_uniform_crowd_reduces_to_self_propulsion():
    # v_rel == v_i kills the influence term in either sign mode, and an
    # equidistant crowd kills friction, so F = xi * v.
    v = Vec2(1.2, 0.0)
    for sign in ("toward_neighbors", "as_written"):
        params = FlowParams(influence_sign=sign)
        f = active_langevin_force(v, v, mu=0.0, alpha=1.0, params=params)
        assert f == Vec2(0.5 * 1.2, 0.0)


def test_force_empty_cell_sign_modes_differ():
    # A cell nobody visited (v_i = 0) with neighbors moving +x: the default
    # mode pushes it along the crowd, the as-written mode against it.
    v_i = Vec2(0.0, 0.0)
    v_rel = Vec2(1.0, 0.0)
    toward = active_langevin_force(
        v_i, v_rel, mu=0.0, alpha=1.0, params=FlowParams(influence_sign="toward_neighbors")
    )
    against = active_langevin_force(
        v_i, v_rel, mu=0.0, alpha=1.0, params=FlowParams(influence_sign="as_written")
    )
    assert toward == Vec2(1.0, 0.0)
    assert against == Vec2(-1.0, 0.0)


def test_force_friction_opposes_motion():
    f = active_langevin_force(
        Vec2(2.0, 0.0), Vec2(2.0, 0.0), mu=0.25, alpha=1.0, params=FlowParams(xi=0.5)
    )
    # -0.25 * 2 + 0 + 0.5 * 2 = 0.5
    assert f == Vec2(0.5, 0.0)


def test_force_random_term_added_verbatim():
    params = FlowParams(f_random=Vec2(0.1, -0.2))
    f = active_langevin_force(Vec2(0.0, 0.0), Vec2(0.0, 0.0), 0.0, 0.0, params)
    assert f == Vec2(0.1, -0.2)


def test_force_all_zero_inputs():
    f = active_langevin_force(Vec2(0.0, 0.0), Vec2(0.0, 0.0), 0.0, 0.0, FlowParams())
    assert f == Vec2(0.0, 0.0)


@given(
    st.floats(-10, 10), st.floats(-10, 10),
    st.floats(-10, 10), st.floats(-10, 10),
    st.floats(0, 0.999), st.floats(0, 5), st.floats(0, 2),
    st.floats(0.01, 100),
)
def test_force_is_homogeneous_in_velocities(vx, vy, rx, ry, mu, alpha, xi, scale):
    # Scaling every velocity input scales the force by the same factor.
    params = FlowParams(xi=xi)
    base = active_langevin_force(Vec2(vx, vy), Vec2(rx, ry), mu, alpha, params)
    scaled = active_langevin_force(
        Vec2(vx * scale, vy * scale), Vec2(rx * scale, ry * scale), mu, alpha, params
    )
    assert math.isclose(scaled.x, base.x * scale, rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(scaled.y, base.y * scale, rel_tol=1e-9, abs_tol=1e-9)


# ---------------------------------------------------------------------------
# Randomized sweep against the reference formulas.
# ---------------------------------------------------------------------------


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


@settings(deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_inputs_match_reference(seed):
    _check_against_reference(np.random.default_rng(seed), rounds=5)


def test_thousand_random_inputs_match_reference():
    _check_against_reference(np.random.default_rng(20240814), rounds=1000)


def _check_against_reference(rng: np.random.Generator, rounds: int) -> None:
    for _ in range(rounds):
        n = int(rng.integers(0, 9))
        positions = [tuple(rng.uniform(-5.0, 5.0, 2)) for _ in range(n)]
        velocities = [tuple(rng.uniform(-2.0, 2.0, 2)) for _ in range(n)]
        origin = tuple(rng.uniform(-5.0, 5.0, 2))
        v_i = tuple(rng.uniform(-2.0, 2.0, 2))
        h = float(rng.uniform(0.3, 3.0))
        xi = float(rng.uniform(0.0, 1.0))
        mode = ("mean", "sum")[int(rng.integers(0, 2))]
        sign = ("toward_neighbors", "as_written")[int(rng.integers(0, 2))]
        params = FlowParams(xi=xi, h=h, rel_velocity_mode=mode, influence_sign=sign)

        mu = neighbor_friction(Vec2(*origin), [Vec2(*p) for p in positions])
        mu_ref = friction_reference(origin, positions)
        assert _close(mu, mu_ref)

        frame = TrackFrame(
            0.0,
            tuple(_obs(k, positions[k], velocities[k]) for k in range(n)),
        )
        v_avg = average_velocity(frame)
        v_avg_ref = average_velocity_reference(velocities)
        assert _close(v_avg.x, v_avg_ref[0]) and _close(v_avg.y, v_avg_ref[1])

        pairs = [(Vec2(*p), Vec2(*v)) for p, v in zip(positions, velocities)]
        v_rel = relative_velocity(Vec2(*origin), pairs, h, mode)
        v_rel_ref = relative_velocity_reference(origin, list(zip(positions, velocities)), h, mode)
        assert _close(v_rel.x, v_rel_ref[0]) and _close(v_rel.y, v_rel_ref[1])

        alpha = interaction_coefficient(v_rel, v_avg)
        alpha_ref = alpha_reference(v_rel_ref, v_avg_ref)
        assert _close(alpha, alpha_ref)

        force = active_langevin_force(Vec2(*v_i), v_rel, mu, alpha, params)
        force_ref = force_reference(v_i, v_rel_ref, mu_ref, alpha_ref, xi, sign)
        assert _close(force.x, force_ref[0]) and _close(force.y, force_ref[1])
