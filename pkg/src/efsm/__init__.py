"""Evolving finite state machine with a built-in car-following experiment.

The model discovers states online by potential-based clustering, recognizes
each observation as a probability distribution over those states, identifies
per-action transition matrices as it goes, and predicts future state
distributions.  A deterministic two-vehicle simulator, an experiment runner
with Jensen-Shannon divergence scoring, and a CLI are included.
"""

from .errors import (
    ActionRangeError,
    CollisionStateError,
    ConfigError,
    DimensionMismatchError,
    EfsmError,
    InternalInconsistencyError,
    InvalidDistributionError,
    InvalidObservationError,
    ModelMismatchError,
    NoStatesError,
    SnapshotError,
)
from .idm import IdmParams, idm_accel, idm_accel_free
from .model import (
    ASSIGNED,
    CENTER_REPLACED,
    CREATED,
    Cluster,
    ClusteringOutcome,
    EfsmModel,
    ModelConfig,
    PotentialAccumulators,
    StateEstimate,
)
from .transitions import ActionCodec, TransitionStack
from .simulate import (
    COLLISION,
    HORIZON,
    RunLog,
    RunRecord,
    ScenarioConfig,
    SimWorld,
    VehicleState,
    detect_collision,
    load_runlog,
    run_case,
    step_world,
    write_runlog,
)
from .scenarios import AGGRESSIVE, LEADER, NORMAL, case_config, variant_config
from .evaluate import (
    DeadEndReport,
    EvalReport,
    ExperimentPlan,
    RunEvalSummary,
    dead_end_consistency,
    default_plan,
    jsd,
    prediction_error_series,
    report_from_logs,
    run_experiment,
    write_report,
)
from .snapshot import clone_model, from_snapshot, load_model, save_model, to_snapshot

__version__ = "0.1.0"

__all__ = [
    "ActionCodec",
    "ActionRangeError",
    "AGGRESSIVE",
    "ASSIGNED",
    "CENTER_REPLACED",
    "COLLISION",
    "CREATED",
    "CollisionStateError",
    "Cluster",
    "ClusteringOutcome",
    "ConfigError",
    "DeadEndReport",
    "DimensionMismatchError",
    "EfsmError",
    "EfsmModel",
    "EvalReport",
    "ExperimentPlan",
    "HORIZON",
    "IdmParams",
    "InternalInconsistencyError",
    "InvalidDistributionError",
    "InvalidObservationError",
    "LEADER",
    "ModelConfig",
    "ModelMismatchError",
    "NORMAL",
    "NoStatesError",
    "PotentialAccumulators",
    "RunEvalSummary",
    "RunLog",
    "RunRecord",
    "ScenarioConfig",
    "SimWorld",
    "SnapshotError",
    "StateEstimate",
    "TransitionStack",
    "VehicleState",
    "case_config",
    "clone_model",
    "dead_end_consistency",
    "default_plan",
    "detect_collision",
    "from_snapshot",
    "idm_accel",
    "idm_accel_free",
    "jsd",
    "load_model",
    "load_runlog",
    "prediction_error_series",
    "report_from_logs",
    "run_case",
    "run_experiment",
    "save_model",
    "step_world",
    "to_snapshot",
    "variant_config",
    "write_report",
    "write_runlog",
]
