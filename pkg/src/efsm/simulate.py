"""Two-vehicle longitudinal car-following simulator driving the model.

A preceding vehicle accelerates on a free road until its speed reaches the
brake trigger (or a configured wall-clock trigger fires), then holds a full
brake until standstill.  The follower runs IDM against the preceding
vehicle; its continuous acceleration is clamped to the action bounds,
encoded to a discrete action, and fed to the model together with the
observation [headway, follower speed, preceding speed] each tick.

Within a run the model tick order is: process the observation, identify the
transition from the previous tick under the previous action, then predict
the next state under the action just chosen.  Runs are independent
episodes: the first tick of a run identifies nothing, and the first
prediction comes from a uniform belief through the marginal matrix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelMismatchError
from .idm import IdmParams, idm_accel, idm_accel_free
from .model import EfsmModel

__all__ = [
    "COLLISION",
    "HORIZON",
    "VehicleState",
    "SimWorld",
    "ScenarioConfig",
    "RunRecord",
    "RunLog",
    "follower_params_at",
    "preceding_policy",
    "step_world",
    "detect_collision",
    "run_case",
    "observe",
    "write_runlog",
    "load_runlog",
    "summary_path_for",
]

COLLISION = "collision"
HORIZON = "horizon"


@dataclass(frozen=True)
class VehicleState:
    position: float
    velocity: float

    def __post_init__(self) -> None:
        if self.velocity < 0.0:
            raise ValueError(f"velocity must be >= 0, got {self.velocity}")


@dataclass
class SimWorld:
    """World state between ticks; brake_latched is sticky once set."""

    follower: VehicleState
    preceding: VehicleState
    time: float = 0.0
    brake_latched: bool = False

    @property
    def headway(self) -> float:
        return self.preceding.position - self.follower.position


@dataclass(frozen=True)
class ScenarioConfig:
    """One car-following case.

    brake_trigger_speed is the preceding speed at which the emergency brake
    latches; None means 92% of the preceding vehicle's desired speed (the
    free-road controller approaches its desired speed asymptotically, so an
    exact-match trigger would never fire).  brake_time, when set, latches
    the brake at the first tick with time >= brake_time regardless of
    speed.  switch_time swaps the follower controller parameters once, at
    the first tick with time >= switch_time.
    """

    case_id: int
    follower_params_initial: IdmParams
    preceding_params: IdmParams
    follower_params_after: IdmParams | None = None
    switch_time: float | None = None
    dt: float = 0.01
    horizon_steps: int = 3500
    initial_gap: float = 20.0
    action_bounds: tuple[float, float] = (-2.5, 2.5)
    brake_decel: float = 2.75
    brake_trigger_speed: float | None = None
    brake_time: float | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.case_id <= 4):
            raise ConfigError(f"case_id must be 1..4, got {self.case_id}")
        if not (self.dt > 0.0):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.horizon_steps < 0:
            raise ConfigError(f"horizon_steps must be >= 0, got {self.horizon_steps}")
        if not (self.initial_gap > 0.0):
            raise ConfigError(f"initial_gap must be positive, got {self.initial_gap}")
        lo, hi = self.action_bounds
        if not (lo < hi):
            raise ConfigError(
                f"action_bounds must satisfy lo < hi, got {self.action_bounds}"
            )
        if not (self.brake_decel > 0.0):
            raise ConfigError(f"brake_decel must be positive, got {self.brake_decel}")
        if (self.switch_time is None) != (self.follower_params_after is None):
            raise ConfigError("switch_time and follower_params_after go together")
        horizon = self.horizon_steps * self.dt
        if self.switch_time is not None and not (0.0 <= self.switch_time <= horizon):
            raise ConfigError(
                f"switch_time {self.switch_time} outside horizon {horizon}"
            )
        if self.brake_time is not None and not (0.0 <= self.brake_time <= horizon):
            raise ConfigError(f"brake_time {self.brake_time} outside horizon {horizon}")

    @property
    def trigger_speed(self) -> float:
        if self.brake_trigger_speed is not None:
            return self.brake_trigger_speed
        return 0.92 * self.preceding_params.v0


@dataclass(frozen=True)
class RunRecord:
    """One simulated tick.  u_f, action and predicted are None on the
    terminal collision tick: the run ends before a control is computed."""

    time: float
    headway: float
    v_f: float
    v_p: float
    u_f: float | None
    action: int | None
    state: int
    recognized: np.ndarray
    predicted: np.ndarray | None
    outcome_kind: str
    outcome_state: int


@dataclass
class RunLog:
    case_id: int
    dt: float
    records: list[RunRecord] = field(default_factory=list)
    terminal: str = HORIZON
    collision_step: int | None = None
    first_prediction: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.records)

    def state_count_changes(self) -> list[tuple[int, int]]:
        """(step, state count) at every step where the count changed."""
        changes: list[tuple[int, int]] = []
        last = None
        for i, rec in enumerate(self.records):
            n = rec.recognized.shape[0]
            if n != last:
                changes.append((i, n))
                last = n
        return changes


def follower_params_at(cfg: ScenarioConfig, time: float) -> IdmParams:
    """Follower controller in force at a given time (switch applied once)."""
    if cfg.switch_time is not None and time >= cfg.switch_time:
        return cfg.follower_params_after
    return cfg.follower_params_initial


def preceding_policy(world: SimWorld, cfg: ScenarioConfig) -> float:
    """Preceding vehicle's acceleration; latches world.brake_latched.

    Free-road IDM until the latch condition first holds, then a constant
    full brake until standstill.  The latch never releases.
    """
    v = world.preceding.velocity
    if not world.brake_latched:
        if cfg.brake_time is not None:
            world.brake_latched = world.time >= cfg.brake_time
        else:
            world.brake_latched = v >= cfg.trigger_speed
    if world.brake_latched:
        return -cfg.brake_decel if v > 0.0 else 0.0
    return idm_accel_free(cfg.preceding_params, v)


def step_world(world: SimWorld, u_f: float, u_p: float, dt: float) -> SimWorld:
    """Advance one tick with semi-implicit Euler; velocities clamp at 0."""
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    vehicles = []
    for veh, u in ((world.follower, u_f), (world.preceding, u_p)):
        v = max(0.0, veh.velocity + u * dt)
        vehicles.append(VehicleState(veh.position + v * dt, v))
    return SimWorld(vehicles[0], vehicles[1], world.time + dt, world.brake_latched)


def detect_collision(world: SimWorld) -> bool:
    return world.headway <= 0.0


def observe(world: SimWorld) -> np.ndarray:
    return np.array(
        [world.headway, world.follower.velocity, world.preceding.velocity]
    )


def run_case(cfg: ScenarioConfig, model: EfsmModel) -> RunLog:
    """Simulate one case, mutating the model in place.

    The model's action codec must span exactly the scenario's action
    bounds; the executed (clamped) acceleration and the encoded action then
    always agree.
    """
    if (model.codec.lo, model.codec.hi) != tuple(cfg.action_bounds):
        raise ModelMismatchError(
            f"model codec covers ({model.codec.lo}, {model.codec.hi}], "
            f"scenario bounds are {tuple(cfg.action_bounds)}"
        )
    log = RunLog(case_id=cfg.case_id, dt=cfg.dt)
    world = SimWorld(
        follower=VehicleState(0.0, 0.0),
        preceding=VehicleState(cfg.initial_gap, 0.0),
    )
    prev_action: int | None = None
    prev_estimate = None
    bounds = tuple(cfg.action_bounds)
    for step in range(cfg.horizon_steps):
        z = observe(world)
        outcome, cur = model.process(z)
        if prev_action is not None:
            model.identify_transition(prev_action, prev_estimate, cur)
        if step == 0:
            log.first_prediction = model.predict_from_uniform().probs
        if detect_collision(world):
            log.records.append(
                RunRecord(
                    time=world.time,
                    headway=world.headway,
                    v_f=world.follower.velocity,
                    v_p=world.preceding.velocity,
                    u_f=None,
                    action=None,
                    state=cur.top,
                    recognized=cur.probs,
                    predicted=None,
                    outcome_kind=outcome.kind,
                    outcome_state=outcome.state,
                )
            )
            log.terminal = COLLISION
            log.collision_step = step
            return log
        params = follower_params_at(cfg, world.time)
        u_p = preceding_policy(world, cfg)
        u_f = idm_accel(
            params,
            world.follower.velocity,
            world.follower.velocity - world.preceding.velocity,
            world.headway,
            bounds=bounds,
        )
        action = model.codec.encode(u_f)
        predicted = model.predict_next(action, cur)
        log.records.append(
            RunRecord(
                time=world.time,
                headway=world.headway,
                v_f=world.follower.velocity,
                v_p=world.preceding.velocity,
                u_f=u_f,
                action=action,
                state=cur.top,
                recognized=cur.probs,
                predicted=predicted.probs,
                outcome_kind=outcome.kind,
                outcome_state=outcome.state,
            )
        )
        world = step_world(world, u_f, u_p, cfg.dt)
        prev_action = action
        prev_estimate = cur
    return log


# ------------------------------------------------------------------ artifacts

def _fmt(x: float) -> str:
    return "%.12g" % x


def _fmt_vec(v: np.ndarray | None) -> str:
    if v is None:
        return ""
    return ";".join(_fmt(x) for x in v)


def write_runlog(log: RunLog, csv_path, summary_path=None) -> None:
    """CSV with one row per tick plus a JSON summary of run-level facts."""
    if summary_path is None:
        summary_path = summary_path_for(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "time", "headway", "v_f", "v_p", "u_f", "action", "state",
                "recognized", "predicted", "outcome", "outcome_state",
            ]
        )
        for rec in log.records:
            writer.writerow(
                [
                    _fmt(rec.time),
                    _fmt(rec.headway),
                    _fmt(rec.v_f),
                    _fmt(rec.v_p),
                    "" if rec.u_f is None else _fmt(rec.u_f),
                    "" if rec.action is None else str(rec.action),
                    str(rec.state),
                    _fmt_vec(rec.recognized),
                    _fmt_vec(rec.predicted),
                    rec.outcome_kind,
                    str(rec.outcome_state),
                ]
            )
    summary = {
        "case_id": log.case_id,
        "dt": log.dt,
        "steps": log.steps,
        "terminal": log.terminal,
        "collision_step": log.collision_step,
        "first_prediction": None
        if log.first_prediction is None
        else log.first_prediction.tolist(),
        "state_counts": [[step, n] for step, n in log.state_count_changes()],
    }
    Path(summary_path).write_text(json.dumps(summary, indent=1) + "\n")


def summary_path_for(csv_path) -> Path:
    """Conventional summary location: runlog.csv -> runlog.summary.json."""
    p = Path(csv_path)
    return p.with_name(p.stem + ".summary.json")


def load_runlog(csv_path, summary_path=None) -> RunLog:
    """Rebuild a RunLog from its CSV and JSON summary artifacts.

    Values pass through %.12g text, so reloaded floats agree with the
    originals to 12 significant digits, not bit-exactly.
    """
    if summary_path is None:
        summary_path = summary_path_for(csv_path)
    try:
        summary = json.loads(Path(summary_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read run summary {summary_path}: {exc}") from exc
    try:
        log = RunLog(
            case_id=int(summary["case_id"]),
            dt=float(summary["dt"]),
            terminal=summary["terminal"],
            collision_step=summary["collision_step"],
            first_prediction=None
            if summary["first_prediction"] is None
            else np.asarray(summary["first_prediction"], dtype=float),
        )
    except KeyError as exc:
        raise ConfigError(f"run summary {summary_path} missing field {exc}") from exc
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            try:
                log.records.append(
                    RunRecord(
                        time=float(row["time"]),
                        headway=float(row["headway"]),
                        v_f=float(row["v_f"]),
                        v_p=float(row["v_p"]),
                        u_f=float(row["u_f"]) if row["u_f"] else None,
                        action=int(row["action"]) if row["action"] else None,
                        state=int(row["state"]),
                        recognized=np.array(
                            [float(x) for x in row["recognized"].split(";")]
                        ),
                        predicted=np.array(
                            [float(x) for x in row["predicted"].split(";")]
                        )
                        if row["predicted"]
                        else None,
                        outcome_kind=row["outcome"],
                        outcome_state=int(row["outcome_state"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigError(
                    f"malformed runlog row in {csv_path}: {exc}"
                ) from exc
    if log.terminal == COLLISION and log.collision_step != log.steps - 1:
        raise ConfigError(
            f"summary collision_step {log.collision_step} does not match "
            f"{log.steps} rows in {csv_path}"
        )
    return log
