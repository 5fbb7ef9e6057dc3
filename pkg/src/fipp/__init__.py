"""Flow-informed path planning: extract a crowd flow field from pedestrian
tracks, plan paths that move with the flow, and benchmark the result against
a trajectory-rollout baseline in a deterministic crowd simulator."""

from .baseline_tr import RobotState, RolloutParams, rollout, score, tr_step
from .flowfield import (
    FlowCell,
    FlowField,
    FlowParams,
    GridSpec,
    PedObservation,
    TrackFrame,
    active_langevin_force,
    average_velocity,
    interaction_coefficient,
    neighbor_friction,
    relative_velocity,
    resample_by_arclength,
    trajectory_deviation,
)
from .geometry import Vec2
from .metrics import (
    MetricsReport,
    compare,
    compute_report,
    efficiency,
    proxemic_zone,
    social_violations,
)
from .planner import (
    CostParams,
    NoPathError,
    OutOfBoundsError,
    PlanResult,
    Replanner,
    edge_cost,
    flow_cost,
    heuristic,
    plan,
)
from .sim import (
    EpisodeLog,
    Lane,
    Pedestrian,
    Rect,
    Scenario,
    StepRecord,
    generate_scenario,
    ped_step,
    run_episode,
    simulate_tracks,
)

__version__ = "0.1.0"

__all__ = [
    "Vec2",
    "PedObservation",
    "TrackFrame",
    "GridSpec",
    "FlowParams",
    "FlowCell",
    "FlowField",
    "neighbor_friction",
    "average_velocity",
    "relative_velocity",
    "interaction_coefficient",
    "active_langevin_force",
    "resample_by_arclength",
    "trajectory_deviation",
    "CostParams",
    "PlanResult",
    "NoPathError",
    "OutOfBoundsError",
    "flow_cost",
    "edge_cost",
    "heuristic",
    "plan",
    "Replanner",
    "RolloutParams",
    "RobotState",
    "rollout",
    "score",
    "tr_step",
    "Rect",
    "Lane",
    "Scenario",
    "Pedestrian",
    "StepRecord",
    "EpisodeLog",
    "generate_scenario",
    "ped_step",
    "simulate_tracks",
    "run_episode",
    "proxemic_zone",
    "social_violations",
    "efficiency",
    "MetricsReport",
    "compute_report",
    "compare",
    "__version__",
]
