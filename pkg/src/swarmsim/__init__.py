"""Swarm-manipulation sandbox: deterministic 2D physics, broadcast control,
observation reducers, a five-task experiment suite, a batch harness, and a
results/session service."""

from .control import (ControlParams, ControlScheme, InputState, InputTracker,
                      NoiseConfig, control_forces, ramp_magnitude,
                      sample_noise, total_force)
from .errors import ConfigurationError, SchemaError
from .harness import (Controller, NoOpController, PositionController,
                      PushController, TaskView, TrialConfig, TrialRecord,
                      aggregate_stats, make_controller, replay_events,
                      run_batch, run_trial)
from .observe import (Cov2, Ellipse, FullStateObs, HullObs, MeanObs,
                      MeanVarObs, Observation, ObservationMode,
                      confidence_ellipse, convex_hull, make_observation,
                      observation_scalars, swarm_covariance, swarm_mean)
from .physics import (Contact, Obstacle, RobotBody, Workpiece, World,
                      compute_contacts, step_world)
from .service import (RecordStore, SessionEngine, create_app, new_token,
                      records_from_csv, records_from_json, records_to_csv,
                      records_to_json, run_session_replay, validate_record)
from .tasks import (GoalSpec, PatternGoal, Phase, PyramidGoal, RegionGoal,
                    Scenario, TaskKind, TaskMode, TaskState, TaskStatus,
                    evaluate_task, goal_pattern, instantiate_task,
                    load_scenario, mode_options, parse_mode, sample_mode)

__all__ = [
    "ConfigurationError", "SchemaError",
    "Contact", "Obstacle", "RobotBody", "Workpiece", "World",
    "compute_contacts", "step_world",
    "ControlParams", "ControlScheme", "InputState", "InputTracker",
    "NoiseConfig", "control_forces", "ramp_magnitude", "sample_noise",
    "total_force",
    "Cov2", "Ellipse", "FullStateObs", "HullObs", "MeanObs", "MeanVarObs",
    "Observation", "ObservationMode", "confidence_ellipse", "convex_hull",
    "make_observation", "observation_scalars", "swarm_covariance",
    "swarm_mean",
    "GoalSpec", "PatternGoal", "Phase", "PyramidGoal", "RegionGoal",
    "Scenario", "TaskKind", "TaskMode", "TaskState", "TaskStatus",
    "evaluate_task", "goal_pattern", "instantiate_task", "load_scenario",
    "mode_options", "parse_mode", "sample_mode",
    "Controller", "NoOpController", "PositionController", "PushController",
    "TaskView", "TrialConfig", "TrialRecord", "aggregate_stats",
    "make_controller", "replay_events", "run_batch", "run_trial",
    "RecordStore", "SessionEngine", "create_app", "new_token",
    "records_from_csv", "records_from_json", "records_to_csv",
    "records_to_json", "run_session_replay", "validate_record",
]

__version__ = "0.1.0"
