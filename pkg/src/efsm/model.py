"""The evolving finite state machine.

States are discovered online by potential-based clustering over the
observation stream.  Each observation is recognized as a probability
distribution over the discovered states, per-action transition matrices are
identified from consecutive recognitions, and future state distributions
are predicted by applying those matrices.

The clustering side keeps three kinds of mutable state:

* potential accumulators (b, column sums, sample count) that let the
  potential of any query point be computed recursively without storing the
  observation history,
* per-cluster arrays: center, center potential, and running membership
  statistics (count, mean, M2) used to derive each cluster's spread,
* the previous observation, needed to refresh the center potentials.

Per tick the order is fixed: compute the input's potential, refresh center
potentials with the previous observation, apply the create/replace
conditions, recognize, then commit the accumulators.  `process` bundles the
whole tick; the individual steps are public for direct use and testing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    InternalInconsistencyError,
    InvalidObservationError,
    NoStatesError,
)
from .transitions import ActionCodec, TransitionStack

__all__ = [
    "CREATED",
    "CENTER_REPLACED",
    "ASSIGNED",
    "PotentialAccumulators",
    "Cluster",
    "StateEstimate",
    "ClusteringOutcome",
    "ModelConfig",
    "EfsmModel",
]

CREATED = "created"
CENTER_REPLACED = "center_replaced"
ASSIGNED = "assigned"


@dataclass(frozen=True)
class PotentialAccumulators:
    """Running sums behind the recursive potential formula.

    b is the sum of squared norms of all committed observations, col_sums
    their per-dimension sum, and t the number of committed observations.
    """

    b: float
    col_sums: np.ndarray
    t: int


@dataclass(frozen=True)
class Cluster:
    """Read-only view of one discovered state."""

    id: int
    center: np.ndarray
    potential: float
    spread: np.ndarray
    member_count: int


@dataclass(frozen=True)
class StateEstimate:
    """Probability distribution over the discovered states."""

    probs: np.ndarray

    @property
    def n_states(self) -> int:
        return int(self.probs.shape[0])

    @property
    def top(self) -> int:
        """1-based id of the most likely state (ties: lowest id)."""
        return int(np.argmax(self.probs)) + 1


@dataclass(frozen=True)
class ClusteringOutcome:
    """Result of one clustering step.

    kind is one of CREATED, CENTER_REPLACED, ASSIGNED.  state is the id of
    the created or replaced cluster; for ASSIGNED it is the id of the
    closest existing cluster.  potential is the input's computed potential.
    """

    kind: str
    state: int
    potential: float


@dataclass(frozen=True)
class ModelConfig:
    """Constructor arguments for EfsmModel, JSON-friendly."""

    dim: int = 3
    rho: float = 0.85
    eps: float = 0.3
    phi: float = 0.1
    eps_bar: float = 1e-6
    spread_floor: float = 1e-3
    var_beta: float = 0.25
    codec_lo: float = -2.5
    codec_hi: float = 2.5
    codec_width: float = 0.3
    scale: tuple[float, ...] | None = None
    offset: tuple[float, ...] | None = None

    def build(self) -> "EfsmModel":
        codec = ActionCodec(self.codec_lo, self.codec_hi, self.codec_width)
        return EfsmModel(
            dim=self.dim,
            codec=codec,
            rho=self.rho,
            eps=self.eps,
            phi=self.phi,
            eps_bar=self.eps_bar,
            spread_floor=self.spread_floor,
            var_beta=self.var_beta,
            scale=self.scale,
            offset=self.offset,
        )


class EfsmModel:
    """Online state model over a fixed-dimension observation stream.

    Parameters
    ----------
    dim : observation dimension m, fixed for the model's lifetime.
    codec : discretization of the continuous control into q actions.
    rho : distance weight in the center-potential refresh.
    eps : euclidean radius of the center-replacement condition.
    phi : learning rate of the transition identification.
    eps_bar : initial mass for new transition rows/columns.
    spread_floor : lower bound on the recognition bandwidth.
    var_beta : recognition bandwidth as a fraction of each center's squared
        distance to its nearest other center.
    scale, offset : optional per-dimension affine normalization applied to
        every observation as (z - offset) * scale; defaults leave raw units.
    """

    def __init__(
        self,
        dim: int,
        codec: ActionCodec,
        rho: float = 0.85,
        eps: float = 0.3,
        phi: float = 0.1,
        eps_bar: float = 1e-6,
        spread_floor: float = 1e-3,
        var_beta: float = 0.25,
        scale=None,
        offset=None,
    ) -> None:
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if not (rho > 0.0):
            raise ValueError(f"rho must be positive, got {rho}")
        if not (eps > 0.0):
            raise ValueError(f"eps must be positive, got {eps}")
        if not (spread_floor > 0.0):
            raise ValueError(f"spread_floor must be positive, got {spread_floor}")
        if not (var_beta > 0.0):
            raise ValueError(f"var_beta must be positive, got {var_beta}")
        self.dim = int(dim)
        self.codec = codec
        self.rho = float(rho)
        self.eps = float(eps)
        self.spread_floor = float(spread_floor)
        self.var_beta = float(var_beta)
        self.scale = self._axis_param(scale, 1.0, "scale")
        self.offset = self._axis_param(offset, 0.0, "offset")
        if np.any(self.scale <= 0.0):
            raise ValueError("scale components must be positive")
        self.stack = TransitionStack(codec.q, phi=phi, eps_bar=eps_bar)

        self._centers = np.zeros((0, dim))
        self._potentials = np.zeros(0)
        self._member_counts = np.zeros(0, dtype=np.int64)
        self._member_means = np.zeros((0, dim))
        self._member_m2 = np.zeros((0, dim))

        self._b = 0.0
        self._col_sums = np.zeros(dim)
        self._count = 0
        self._last_z: np.ndarray | None = None
        self.last_estimate: StateEstimate | None = None

    # ---------------------------------------------------------------- views

    @property
    def n_states(self) -> int:
        return self._centers.shape[0]

    @property
    def phi(self) -> float:
        return self.stack.phi

    @property
    def eps_bar(self) -> float:
        return self.stack.eps_bar

    @property
    def accumulators(self) -> PotentialAccumulators:
        return PotentialAccumulators(self._b, self._col_sums.copy(), self._count)

    @property
    def clusters(self) -> list[Cluster]:
        return [
            Cluster(
                id=i + 1,
                center=self._centers[i].copy(),
                potential=float(self._potentials[i]),
                spread=self._spread(i),
                member_count=int(self._member_counts[i]),
            )
            for i in range(self.n_states)
        ]

    def _spread(self, i: int) -> np.ndarray:
        var = self._member_m2[i] / self._member_counts[i]
        return np.maximum(var, self.spread_floor)

    # ------------------------------------------------------------ clustering

    def potential_of_input(self, z) -> float:
        """Potential of a query point against the committed history.

        Equals (t - 1) / ((t - 1) + sum of squared distances to all
        committed observations), evaluated recursively from the
        accumulators.  The first-ever observation has potential 1 by
        definition.  Pure query; accumulators are committed separately at
        the end of the tick.
        """
        return self._potential(self._prepare(z))

    def _potential(self, zs: np.ndarray) -> float:
        tm1 = self._count
        if tm1 == 0:
            return 1.0
        a = float(zs @ zs)
        c = float(zs @ self._col_sums)
        denom = tm1 * (a + 1.0) - 2.0 * c + self._b
        if not (denom > 0.0):
            raise InternalInconsistencyError(
                f"potential denominator {denom!r} not positive"
            )
        return tm1 / denom

    def update_center_potentials(self, z_prev) -> None:
        """Refresh every center's potential against the previous observation.

        The refresh discounts a center's stored potential by its distance to
        z_prev, so centers far from where the stream currently lives decay
        while centers near it hold their value.
        """
        if self.n_states == 0:
            raise NoStatesError("no states discovered yet")
        if self._count < 1:
            raise InternalInconsistencyError("no committed observation to refresh with")
        self._refresh_potentials(self._prepare(z_prev))

    def _refresh_potentials(self, z_prev: np.ndarray) -> None:
        tm1 = self._count        # current tick is observation t = count + 1
        tm2 = self._count - 1
        d2 = ((self._centers - z_prev) ** 2).sum(axis=1)
        p = self._potentials
        self._potentials = (tm1 * p) / (tm2 + p * (1.0 + self.rho * d2))
        if np.any(self._potentials <= 0.0) or not np.isfinite(self._potentials).all():
            raise InternalInconsistencyError("center potential left (0, inf)")

    def step_clustering(self, z) -> ClusteringOutcome:
        """Decide create / replace / assign for one observation.

        Clustering only: recognition, membership statistics and the
        accumulator commit are separate steps (see `process`).
        """
        return self._step_clustering(self._prepare(z))

    def _step_clustering(self, zs: np.ndarray) -> ClusteringOutcome:
        pot = self._potential(zs)
        if self.n_states == 0:
            self._create_cluster(zs, pot)
            return ClusteringOutcome(CREATED, self.n_states, pot)
        if self._last_z is not None:
            self._refresh_potentials(self._last_z)
        exceeds_centers = pot > float(self._potentials.max())
        d2 = ((self._centers - zs) ** 2).sum(axis=1)
        closest = int(np.argmin(d2))     # ties: lowest id
        within_radius = math.sqrt(float(d2[closest])) < self.eps
        if exceeds_centers and within_radius:
            self._centers[closest] = zs
            self._potentials[closest] = pot
            return ClusteringOutcome(CENTER_REPLACED, closest + 1, pot)
        if exceeds_centers:
            self._create_cluster(zs, pot)
            return ClusteringOutcome(CREATED, self.n_states, pot)
        return ClusteringOutcome(ASSIGNED, closest + 1, pot)

    def _create_cluster(self, zs: np.ndarray, pot: float) -> None:
        self._centers = np.vstack([self._centers, zs[None, :]])
        self._potentials = np.append(self._potentials, pot)
        self._member_counts = np.append(self._member_counts, 1)
        self._member_means = np.vstack([self._member_means, zs[None, :]])
        self._member_m2 = np.vstack([self._member_m2, np.zeros((1, self.dim))])
        self.stack.expand()   # atomic with creation

    def _assign_member(self, i: int, zs: np.ndarray) -> None:
        self._member_counts[i] += 1
        delta = zs - self._member_means[i]
        self._member_means[i] += delta / self._member_counts[i]
        self._member_m2[i] += delta * (zs - self._member_means[i])

    # ----------------------------------------------------------- recognition

    def recognize(self, z) -> StateEstimate:
        """Similarity-based probability distribution over current states.

        eta_i = exp(-|z - center_i|^2 / var_i) with var_i = var_beta times
        center i's squared distance to its nearest other center, floored at
        spread_floor.  Tying the bandwidth to local center spacing keeps
        basins aligned with the discovered geometry; bandwidths taken from
        membership statistics feed back on themselves (a state that wins
        observations widens and wins more) and collapse onto the floor for
        states whose members are a single dwell point.  The normalized
        weights are computed with the max exponent shifted out so
        far-from-everything queries cannot underflow to 0/0.  Relative
        weights below 1e-6 are truncated to exactly zero: such tails carry
        no information, but fed into the transition update they slowly
        overwrite dormant rows with whatever state happens to be active,
        corrupting rows that are about to be needed again.
        """
        est = self._recognize(self._prepare(z))
        self.last_estimate = est
        return est

    def _recognize(self, zs: np.ndarray) -> StateEstimate:
        if self.n_states == 0:
            raise NoStatesError("no states discovered yet")
        if self.n_states == 1:
            return StateEstimate(np.ones(1))
        d2 = ((self._centers - zs) ** 2).sum(axis=1)
        var = np.maximum(self.var_beta * self._center_gaps(), self.spread_floor)
        e = -d2 / var
        w = np.exp(e - e.max())
        w[w < 1e-6] = 0.0
        return StateEstimate(w / w.sum())

    def _center_gaps(self) -> np.ndarray:
        """Squared distance from each center to its nearest other center."""
        diffs = self._centers[:, None, :] - self._centers[None, :, :]
        d2 = (diffs ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        return d2.min(axis=1)

    # ------------------------------------------------------------ transitions

    def identify_transition(self, action_index: int, prev, cur) -> None:
        """Fold one (previous, current) recognition pair into action r's stats.

        Estimates recorded before an expansion are zero-padded to the
        current state count; the vanished mass was zero by construction.
        """
        prev = self._pad_estimate(prev, "prev")
        cur = self._pad_estimate(cur, "cur")
        self.stack.identify(action_index, prev, cur)

    def _pad_estimate(self, est, name: str) -> np.ndarray:
        p = est.probs if isinstance(est, StateEstimate) else np.asarray(est, dtype=float)
        if p.ndim != 1:
            raise DimensionMismatchError(f"{name} must be a vector, got shape {p.shape}")
        n = self.n_states
        if p.shape[0] > n:
            raise DimensionMismatchError(f"{name} has length {p.shape[0]} > {n} states")
        if p.shape[0] < n:
            p = np.concatenate([p, np.zeros(n - p.shape[0])])
        return p

    def transition_matrix(self, action_index: int) -> np.ndarray:
        return self.stack.matrix(action_index)

    def marginal_matrix(self) -> np.ndarray:
        return self.stack.marginal()

    # ------------------------------------------------------------- prediction

    def predict_next(self, action_index: int, cur) -> StateEstimate:
        """Distribution over the next state given action r and current belief.

        The transition matrix rows are indexed by the prior state, so the
        belief is propagated as P[r]^T x: a one-hot belief at state i maps
        to row i of P[r].
        """
        cur = self._exact_estimate(cur)
        return StateEstimate(self.transition_matrix(action_index).T @ cur)

    def predict_k(self, action_index: int, cur, k: int) -> StateEstimate:
        """k-step prediction: one identified step, then k - 1 marginal steps."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        nxt = self.predict_next(action_index, cur)
        if k == 1:
            return nxt
        walk = np.linalg.matrix_power(self.marginal_matrix().T, k - 1)
        return StateEstimate(walk @ nxt.probs)

    def predict_from_uniform(self) -> StateEstimate:
        """First prediction of a stream: marginal step from a uniform belief."""
        n = self.n_states
        if n == 0:
            raise NoStatesError("no states discovered yet")
        u = np.full(n, 1.0 / n)
        return StateEstimate(self.marginal_matrix().T @ u)

    def _exact_estimate(self, est) -> np.ndarray:
        p = est.probs if isinstance(est, StateEstimate) else np.asarray(est, dtype=float)
        if p.shape != (self.n_states,):
            raise DimensionMismatchError(
                f"estimate has shape {p.shape}, expected ({self.n_states},)"
            )
        return p

    # ------------------------------------------------------------- full tick

    def process(self, z) -> tuple[ClusteringOutcome, StateEstimate]:
        """One full model tick for observation z.

        Runs clustering, recognizes, folds z into the membership statistics
        of the most similar state (creation already seeded the new cluster
        with z), then commits the potential accumulators and stores z as
        the previous observation.  Transition identification stays separate
        because it needs the caller's action.
        """
        zs = self._prepare(z)
        outcome = self._step_clustering(zs)
        est = self._recognize(zs)
        if outcome.kind != CREATED:
            self._assign_member(int(np.argmax(est.probs)), zs)
        self._b += float(zs @ zs)
        self._col_sums += zs
        self._count += 1
        self._last_z = zs
        self.last_estimate = est
        return outcome, est

    # -------------------------------------------------------------- plumbing

    def _prepare(self, z) -> np.ndarray:
        zs = np.asarray(z, dtype=float)
        if zs.shape != (self.dim,):
            raise InvalidObservationError(
                f"observation has shape {zs.shape}, expected ({self.dim},)"
            )
        if not np.isfinite(zs).all():
            raise InvalidObservationError(f"observation has non-finite values: {zs}")
        return (zs - self.offset) * self.scale

    def _axis_param(self, value, default: float, name: str) -> np.ndarray:
        if value is None:
            return np.full(self.dim, default)
        arr = np.asarray(value, dtype=float)
        if arr.shape == ():
            arr = np.full(self.dim, float(arr))
        if arr.shape != (self.dim,):
            raise DimensionMismatchError(
                f"{name} has shape {arr.shape}, expected ({self.dim},)"
            )
        if not np.isfinite(arr).all():
            raise ValueError(f"{name} has non-finite values")
        return arr.copy()
