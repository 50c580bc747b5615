"""Experiment orchestration and prediction-quality evaluation.

One persistent model is run through an ordered plan of car-following cases.
Per run, the one-step predictions are scored against the next tick's
recognition with the Jensen-Shannon divergence (base 2, so values live in
[0, 1]).  Across runs, the report checks that every collision is recognized
as one and the same state (the dead-end state) and tracks how the state
count grows and settles.

This module emits data only (JSON and CSV); figure rendering lives in
`efsm.figures` and is wired in by the CLI.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    InvalidDistributionError,
)
from .model import EfsmModel, ModelConfig
from .scenarios import all_case_configs
from .simulate import COLLISION, RunLog, ScenarioConfig, run_case

__all__ = [
    "jsd",
    "prediction_error_series",
    "DeadEndReport",
    "dead_end_consistency",
    "ExperimentPlan",
    "default_plan",
    "RunEvalSummary",
    "EvalReport",
    "run_experiment",
    "report_from_logs",
    "write_report",
]


def jsd(p, q) -> float:
    """Jensen-Shannon divergence, base 2.

    Zero-probability terms contribute nothing (0*log 0 = 0), and a strictly
    positive mixture entry backs every positive p or q entry, so the sum is
    always finite.
    """
    p = _check_dist(p, "p")
    q = _check_dist(q, "q")
    if p.shape != q.shape:
        raise DimensionMismatchError(f"length mismatch: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)
    return 0.5 * _kl(p, m) + 0.5 * _kl(q, m)


def _kl(p: np.ndarray, m: np.ndarray) -> float:
    # m > 0 wherever p > 0 in exact arithmetic, but halving the smallest
    # denormal rounds to zero; such a term contributes ~1e-323 and is
    # dropped rather than allowed to produce inf.
    mask = (p > 0.0) & (m > 0.0)
    pm = p[mask]
    return float(np.sum(pm * np.log2(pm / m[mask])))


def _check_dist(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.shape[0] == 0:
        raise DimensionMismatchError(f"{name} must be a non-empty vector")
    if np.any(p < 0.0) or not np.isfinite(p).all():
        raise InvalidDistributionError(f"{name} has negative or non-finite mass")
    if abs(p.sum() - 1.0) > 1e-6:
        raise InvalidDistributionError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def _pad_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = max(a.shape[0], b.shape[0])
    if a.shape[0] < n:
        a = np.concatenate([a, np.zeros(n - a.shape[0])])
    if b.shape[0] < n:
        b = np.concatenate([b, np.zeros(n - b.shape[0])])
    return a, b


def prediction_error_series(log: RunLog) -> np.ndarray:
    """Per-tick JSD between the prediction made for a tick and its recognition.

    Element 0 compares the uniform-prior first prediction with the first
    recognition; element t compares the prediction issued at tick t-1 with
    the recognition at tick t.  When a new state appeared in between, the
    shorter vector is zero-padded.
    """
    out = np.empty(log.steps)
    prev_pred = log.first_prediction
    for t, rec in enumerate(log.records):
        if prev_pred is None:
            raise ConfigError(f"run log missing prediction for tick {t}")
        out[t] = jsd(*_pad_pair(prev_pred, rec.recognized))
        prev_pred = rec.predicted
    return out


@dataclass(frozen=True)
class DeadEndReport:
    passed: bool
    dead_end_state: int | None
    n_collisions: int
    details: list[str]


def dead_end_consistency(logs) -> DeadEndReport:
    """Check that collisions map to one single recognized state.

    Passes iff every collision tick's argmax recognized state is the same
    index and that index is never the argmax during the final second of any
    run that ended without a collision.  With no collisions at all the
    check passes vacuously with no dead-end state.
    """
    evidence = [_dead_end_evidence(log) for log in logs]
    return _dead_end_from_evidence(evidence)


def _dead_end_evidence(log: RunLog) -> tuple[int | None, set[int]]:
    """(collision state or None, argmax states in the final 1 s window)."""
    if log.terminal == COLLISION:
        return log.records[-1].state, set()
    if not log.records:
        return None, set()
    window = max(1, math.ceil(1.0 / log.dt))
    return None, {rec.state for rec in log.records[-window:]}


def _dead_end_from_evidence(evidence) -> DeadEndReport:
    collision_states = [cs for cs, _ in evidence if cs is not None]
    details: list[str] = []
    if not collision_states:
        return DeadEndReport(True, None, 0, ["no collisions observed"])
    unique = sorted(set(collision_states))
    if len(unique) > 1:
        details.append(f"collision ticks recognized multiple states: {unique}")
        return DeadEndReport(False, None, len(collision_states), details)
    state = unique[0]
    passed = True
    for i, (cs, window_states) in enumerate(evidence):
        if cs is None and state in window_states:
            passed = False
            details.append(
                f"run {i}: dead-end state {state} recognized in the final "
                "second of a collision-free run"
            )
    if passed:
        details.append(
            f"{len(collision_states)} collisions, all recognized as state {state}"
        )
    return DeadEndReport(passed, state, len(collision_states), details)


@dataclass(frozen=True)
class ExperimentPlan:
    """Ordered case list, repeated for a number of cycles, on one model.

    Within a cycle each (config, repetitions) entry runs back to back;
    cycles repeat the whole list, interleaving the cases so the model sees
    every case early.  total_runs = cycles * sum(repetitions).
    """

    cases: tuple[tuple[ScenarioConfig, int], ...]
    cycles: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self) -> None:
        if not self.cases:
            raise ConfigError("plan needs at least one case")
        if self.cycles < 1:
            raise ConfigError(f"cycles must be >= 1, got {self.cycles}")
        bounds = {tuple(cfg.action_bounds) for cfg, _ in self.cases}
        if len(bounds) > 1:
            raise ConfigError(f"cases disagree on action bounds: {sorted(bounds)}")
        (lo, hi) = next(iter(bounds))
        if (self.model.codec_lo, self.model.codec_hi) != (lo, hi):
            raise ConfigError(
                f"model codec ({self.model.codec_lo}, {self.model.codec_hi}] "
                f"does not span case action bounds ({lo}, {hi}]"
            )
        for cfg, reps in self.cases:
            if reps < 1:
                raise ConfigError(f"repetitions must be >= 1, got {reps}")

    @property
    def total_runs(self) -> int:
        return self.cycles * sum(reps for _, reps in self.cases)

    def iter_configs(self):
        for _ in range(self.cycles):
            for cfg, reps in self.cases:
                for _ in range(reps):
                    yield cfg


def default_plan(cycles: int = 20, model: ModelConfig | None = None,
                 **scenario_overrides) -> ExperimentPlan:
    """The built-in experiment: cases 1..4 interleaved, 20 cycles = 80 runs."""
    return ExperimentPlan(
        cases=tuple((cfg, 1) for cfg in all_case_configs(**scenario_overrides)),
        cycles=cycles,
        model=model if model is not None else ModelConfig(),
    )


@dataclass(frozen=True)
class RunEvalSummary:
    run_index: int
    case_id: int
    terminal: str
    collision_step: int | None
    steps: int
    n_states_end: int
    jsd_series: np.ndarray
    state_count_changes: tuple[tuple[int, int], ...] = ()

    @property
    def first_jsd(self) -> float:
        return float(self.jsd_series[0]) if self.steps else float("nan")

    @property
    def jsd_after_first(self) -> np.ndarray:
        return self.jsd_series[1:]


@dataclass
class EvalReport:
    runs: list[RunEvalSummary]
    dead_end: DeadEndReport
    state_count_trajectory: list[tuple[int, int]]
    jsd_max_after_first: float
    jsd_mean_after_first: float

    @property
    def total_runs(self) -> int:
        return len(self.runs)

    def final_run_for_case(self, case_id: int) -> RunEvalSummary:
        for run in reversed(self.runs):
            if run.case_id == case_id:
                return run
        raise KeyError(f"no run with case_id {case_id}")

    def to_dict(self) -> dict:
        return {
            "total_runs": self.total_runs,
            "dead_end": {
                "passed": self.dead_end.passed,
                "state": self.dead_end.dead_end_state,
                "n_collisions": self.dead_end.n_collisions,
                "details": self.dead_end.details,
            },
            "state_count_trajectory": [list(x) for x in self.state_count_trajectory],
            "jsd_max_after_first": self.jsd_max_after_first,
            "jsd_mean_after_first": self.jsd_mean_after_first,
            "runs": [
                {
                    "run_index": r.run_index,
                    "case_id": r.case_id,
                    "terminal": r.terminal,
                    "collision_step": r.collision_step,
                    "steps": r.steps,
                    "n_states_end": r.n_states_end,
                    "first_jsd": r.first_jsd,
                    "jsd_max_after_first": float(r.jsd_after_first.max())
                    if r.steps > 1
                    else None,
                    "jsd_mean_after_first": float(r.jsd_after_first.mean())
                    if r.steps > 1
                    else None,
                    "state_count_changes": [list(x) for x in r.state_count_changes],
                }
                for r in self.runs
            ],
        }


def run_experiment(
    plan: ExperimentPlan,
    model: EfsmModel | None = None,
    out_dir=None,
    keep_logs: bool = False,
) -> EvalReport | tuple[EvalReport, list[RunLog]]:
    """Execute a plan against one persistent model and aggregate the report.

    Passing a model resumes it (for snapshot continuation); by default a
    fresh model is built from the plan.  With out_dir set, the report
    artifacts are written there.  With keep_logs the full run logs are
    returned alongside the report.
    """
    if model is None:
        model = plan.model.build()
    runs: list[RunEvalSummary] = []
    evidence = []
    trajectory: list[tuple[int, int]] = []
    logs: list[RunLog] = []
    for run_index, cfg in enumerate(plan.iter_configs()):
        log = run_case(cfg, model)
        series = prediction_error_series(log)
        runs.append(
            RunEvalSummary(
                run_index=run_index,
                case_id=cfg.case_id,
                terminal=log.terminal,
                collision_step=log.collision_step,
                steps=log.steps,
                n_states_end=model.n_states,
                jsd_series=series,
                state_count_changes=tuple(log.state_count_changes()),
            )
        )
        evidence.append(_dead_end_evidence(log))
        trajectory.append((run_index, model.n_states))
        if keep_logs:
            logs.append(log)
    report = _finalize_report(runs, evidence, trajectory)
    if out_dir is not None:
        write_report(report, out_dir)
    if keep_logs:
        return report, logs
    return report


def report_from_logs(logs) -> EvalReport:
    """Aggregate already-recorded run logs (e.g. reloaded from disk)."""
    runs = []
    evidence = []
    trajectory = []
    for i, log in enumerate(logs):
        n_end = log.records[-1].recognized.shape[0] if log.records else 0
        runs.append(
            RunEvalSummary(
                run_index=i,
                case_id=log.case_id,
                terminal=log.terminal,
                collision_step=log.collision_step,
                steps=log.steps,
                n_states_end=n_end,
                jsd_series=prediction_error_series(log),
                state_count_changes=tuple(log.state_count_changes()),
            )
        )
        evidence.append(_dead_end_evidence(log))
        trajectory.append((i, n_end))
    return _finalize_report(runs, evidence, trajectory)


def _finalize_report(runs, evidence, trajectory) -> EvalReport:
    tails = [r.jsd_after_first for r in runs if r.steps > 1]
    all_tail = np.concatenate(tails) if tails else np.zeros(0)
    return EvalReport(
        runs=runs,
        dead_end=_dead_end_from_evidence(evidence),
        state_count_trajectory=trajectory,
        jsd_max_after_first=float(all_tail.max()) if all_tail.size else 0.0,
        jsd_mean_after_first=float(all_tail.mean()) if all_tail.size else 0.0,
    )


def write_report(report: EvalReport, out_dir) -> None:
    """Write report.json, jsd.csv (run, tick, jsd) and long.csv
    (run, tick, metric, value) into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), indent=1) + "\n"
    )
    with open(out / "jsd.csv", "w", newline="") as fh:
        fh.write("run,tick,jsd\n")
        for run in report.runs:
            idx = run.run_index
            fh.write(
                "".join(
                    f"{idx},{t},{v:.12g}\n" for t, v in enumerate(run.jsd_series)
                )
            )
    with open(out / "long.csv", "w", newline="") as fh:
        fh.write("run,tick,metric,value\n")
        for run in report.runs:
            idx = run.run_index
            fh.write(
                "".join(
                    f"{idx},{t},jsd,{v:.12g}\n" for t, v in enumerate(run.jsd_series)
                )
            )
            fh.write(
                "".join(
                    f"{idx},{t},n_states,{n}\n" for t, n in run.state_count_changes
                )
            )
