"""Exception types raised by the efsm package."""

__all__ = [
    "EfsmError",
    "InvalidObservationError",
    "DimensionMismatchError",
    "NoStatesError",
    "ActionRangeError",
    "InvalidDistributionError",
    "InternalInconsistencyError",
    "ModelMismatchError",
    "CollisionStateError",
    "ConfigError",
    "SnapshotError",
]


class EfsmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidObservationError(EfsmError):
    """Observation contains NaN/inf or is not a 1-d vector."""


class DimensionMismatchError(EfsmError):
    """Vector or matrix does not match the model's configured dimensions."""


class NoStatesError(EfsmError):
    """Operation needs at least one discovered state, model has none."""


class ActionRangeError(EfsmError):
    """Action index outside 1..q, or control value not encodable."""


class InvalidDistributionError(EfsmError):
    """Probability vector has negative mass or does not sum to one."""


class InternalInconsistencyError(EfsmError):
    """Internal bookkeeping violated an invariant; indicates a bug."""


class ModelMismatchError(EfsmError):
    """Loaded model is incompatible with the requested configuration."""


class CollisionStateError(EfsmError):
    """Car-following geometry is physically invalid (gap <= 0)."""


class ConfigError(EfsmError):
    """Scenario or experiment configuration is malformed."""


class SnapshotError(EfsmError):
    """Model snapshot cannot be parsed or fails validation."""
