"""Command-line interface.

Subcommands:
  run           simulate one case, write runlog CSV/JSON, figure, snapshot
  experiment    run a full plan, write report artifacts, figures, snapshot
  eval          re-evaluate previously written runlog CSVs
  export-model  dump a snapshot's clusters and matrices as CSV
  inspect       print a snapshot summary and audit its row sums

Exit codes: 0 success, 2 configuration or snapshot error, 3 model/config
mismatch, 4 row-sum audit failure in inspect.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, ModelMismatchError, SnapshotError
from .evaluate import ExperimentPlan, report_from_logs, run_experiment, write_report
from .idm import IdmParams
from .model import EfsmModel, ModelConfig
from .scenarios import PARAM_PRESETS, case_config
from .simulate import ScenarioConfig, load_runlog, run_case, write_runlog
from .snapshot import load_model, save_model

__all__ = ["main"]


# ------------------------------------------------------------ config parsing

def _load_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def _parse_set(expr: str) -> tuple[list[str], object]:
    if "=" not in expr:
        raise ConfigError(f"--set needs key=value, got {expr!r}")
    path, raw = expr.split("=", 1)
    segments = [s for s in path.strip().split(".") if s]
    if not segments:
        raise ConfigError(f"--set has an empty key: {expr!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return segments, value


def _apply_set(doc: dict, expr: str) -> None:
    segments, value = _parse_set(expr)
    node = doc
    for seg in segments[:-1]:
        if isinstance(node, list):
            node = node[_list_index(node, seg, expr)]
        elif isinstance(node, dict):
            node = node.setdefault(seg, {})
            if not isinstance(node, (dict, list)):
                raise ConfigError(f"--set {expr!r}: {seg!r} is not a section")
        else:
            raise ConfigError(f"--set {expr!r}: cannot descend into {seg!r}")
    last = segments[-1]
    if isinstance(node, list):
        node[_list_index(node, last, expr)] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"--set {expr!r}: cannot assign {last!r}")


def _list_index(node: list, seg: str, expr: str) -> int:
    try:
        idx = int(seg)
    except ValueError:
        raise ConfigError(f"--set {expr!r}: {seg!r} is not a list index") from None
    if not (0 <= idx < len(node)):
        raise ConfigError(f"--set {expr!r}: index {idx} out of range")
    return idx


def _parse_idm(value) -> IdmParams:
    if isinstance(value, str):
        try:
            return PARAM_PRESETS[value]
        except KeyError:
            raise ConfigError(
                f"unknown controller preset {value!r}; "
                f"known: {sorted(PARAM_PRESETS)}"
            ) from None
    if isinstance(value, (list, tuple)):
        if len(value) not in (5, 6):
            raise ConfigError(
                f"controller list needs [a_max, v0, s0, T, b_comf(, delta_exp)], got {value}"
            )
        return IdmParams(*[float(x) for x in value])
    if isinstance(value, dict):
        d = dict(value)
        try:
            kwargs = {k: float(d.pop(k)) for k in ("a_max", "v0", "s0", "T", "b_comf")}
        except KeyError as exc:
            raise ConfigError(f"controller dict missing field {exc}") from exc
        if "delta_exp" in d:
            kwargs["delta_exp"] = float(d.pop("delta_exp"))
        if d:
            raise ConfigError(f"unknown controller keys: {sorted(d)}")
        return IdmParams(**kwargs)
    raise ConfigError(f"cannot parse controller params from {value!r}")


_SCENARIO_SCALARS = (
    "dt", "initial_gap", "switch_time", "brake_decel",
    "brake_trigger_speed", "brake_time",
)
_IDM_FIELDS = ("follower_params_initial", "follower_params_after", "preceding_params")


def _scenario_from_dict(doc) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario section must be an object")
    d = dict(doc)
    if "case_id" not in d:
        raise ConfigError("scenario.case_id is required")
    case_id = d.pop("case_id")
    overrides = {}
    for key in _SCENARIO_SCALARS:
        if key in d:
            value = d.pop(key)
            overrides[key] = None if value is None else float(value)
    if "horizon_steps" in d:
        overrides["horizon_steps"] = int(d.pop("horizon_steps"))
    for key in _IDM_FIELDS:
        if key in d:
            value = d.pop(key)
            overrides[key] = None if value is None else _parse_idm(value)
    if "action_bounds" in d:
        bounds = d.pop("action_bounds")
        if not isinstance(bounds, (list, tuple)) or len(bounds) != 2:
            raise ConfigError(f"action_bounds must be [lo, hi], got {bounds}")
        overrides["action_bounds"] = (float(bounds[0]), float(bounds[1]))
    if d:
        raise ConfigError(f"unknown scenario keys: {sorted(d)}")
    return case_config(case_id, **overrides)


def _model_config_from_dict(doc) -> ModelConfig:
    if doc is None:
        return ModelConfig()
    if not isinstance(doc, dict):
        raise ConfigError("model section must be an object")
    d = dict(doc)
    kwargs = {}
    codec = d.pop("codec", None)
    if codec is not None:
        c = dict(codec)
        try:
            kwargs["codec_lo"] = float(c.pop("lo"))
            kwargs["codec_hi"] = float(c.pop("hi"))
            kwargs["codec_width"] = float(c.pop("width"))
        except KeyError as exc:
            raise ConfigError(f"model.codec missing field {exc}") from exc
        c.pop("q", None)    # derived; tolerated on input
        if c:
            raise ConfigError(f"unknown model.codec keys: {sorted(c)}")
    if "dim" in d:
        kwargs["dim"] = int(d.pop("dim"))
    for key in ("rho", "eps", "phi", "eps_bar", "spread_floor", "var_beta"):
        if key in d:
            kwargs[key] = float(d.pop(key))
    for key in ("scale", "offset"):
        if key in d:
            value = d.pop(key)
            kwargs[key] = None if value is None else tuple(float(x) for x in value)
    if d:
        raise ConfigError(f"unknown model keys: {sorted(d)}")
    try:
        return ModelConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _plan_from_dict(doc: dict) -> ExperimentPlan:
    d = dict(doc)
    model = _model_config_from_dict(d.pop("model", None))
    cycles = int(d.pop("cycles", 1))
    cases_doc = d.pop("cases", None)
    if d:
        raise ConfigError(f"unknown experiment keys: {sorted(d)}")
    cases = []
    if cases_doc is None:
        cases = [(case_config(i), 1) for i in (1, 2, 3, 4)]
    else:
        if not isinstance(cases_doc, list) or not cases_doc:
            raise ConfigError("cases must be a non-empty list")
        for entry in cases_doc:
            if not isinstance(entry, dict):
                raise ConfigError(f"case entry must be an object, got {entry!r}")
            e = dict(entry)
            reps = int(e.pop("repetitions", 1))
            cases.append((_scenario_from_dict(e), reps))
    return ExperimentPlan(cases=tuple(cases), cycles=cycles, model=model)


def _build_model(args, model_cfg: ModelConfig) -> EfsmModel:
    if args.model_in:
        return load_model(args.model_in)
    return model_cfg.build()


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


# ---------------------------------------------------------------- subcommands

def _cmd_run(args) -> int:
    doc = _load_json(args.config)
    for expr in args.set or []:
        _apply_set(doc, expr)
    d = dict(doc)
    if "scenario" not in d:
        raise ConfigError("run config needs a 'scenario' section")
    scenario = _scenario_from_dict(d.pop("scenario"))
    model_cfg = _model_config_from_dict(d.pop("model", None))
    if d:
        raise ConfigError(f"unknown config keys: {sorted(d)}")
    model = _build_model(args, model_cfg)
    log = run_case(scenario, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "runlog.csv"
    write_runlog(log, csv_path)
    model_out = Path(args.model_out) if args.model_out else out / "model.json"
    save_model(model, model_out)
    from .figures import render_run_figure

    render_run_figure(log, out / "runlog.png")
    _say(
        args,
        f"case {log.case_id}: {log.terminal} after {log.steps} ticks; "
        f"model has {model.n_states} states",
    )
    _say(args, f"wrote {csv_path}, {model_out}")
    return 0


def _cmd_experiment(args) -> int:
    doc = _load_json(args.config)
    for expr in args.set or []:
        _apply_set(doc, expr)
    plan = _plan_from_dict(doc)
    model = load_model(args.model_in) if args.model_in else plan.model.build()
    out = Path(args.out)
    report = run_experiment(plan, model=model, out_dir=out)
    model_out = Path(args.model_out) if args.model_out else out / "model.json"
    save_model(model, model_out)
    from .figures import render_report_figures

    render_report_figures(report, out)
    collisions = sum(1 for r in report.runs if r.terminal == "collision")
    _say(args, f"{report.total_runs} runs, {collisions} collisions")
    if report.dead_end.dead_end_state is not None:
        status = "consistent" if report.dead_end.passed else "INCONSISTENT"
        _say(args, f"dead-end state {report.dead_end.dead_end_state} ({status})")
    _say(
        args,
        f"states: {report.state_count_trajectory[-1][1]}; "
        f"JSD after first prediction: max {report.jsd_max_after_first:.4f}, "
        f"mean {report.jsd_mean_after_first:.4f}",
    )
    _say(args, f"wrote report to {out}, model to {model_out}")
    return 0


def _cmd_eval(args) -> int:
    logs = [load_runlog(path) for path in args.logs]
    report = report_from_logs(logs)
    out = Path(args.out)
    write_report(report, out)
    from .figures import render_report_figures

    render_report_figures(report, out)
    _say(args, f"evaluated {len(logs)} runs; wrote report to {out}")
    return 0


def _cmd_export_model(args) -> int:
    model = load_model(args.model_in)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "centers.csv", "w", newline="") as fh:
        dims = range(model.dim)
        head = ["id"] + [f"center_{j}" for j in dims]
        head += ["potential"] + [f"spread_{j}" for j in dims] + ["member_count"]
        fh.write(",".join(head) + "\n")
        for c in model.clusters:
            row = [str(c.id)]
            row += ["%.12g" % x for x in c.center]
            row.append("%.12g" % c.potential)
            row += ["%.12g" % x for x in c.spread]
            row.append(str(c.member_count))
            fh.write(",".join(row) + "\n")
    n = model.n_states
    with open(out / "transitions.csv", "w", newline="") as fh:
        fh.write("action,from,to,F,P\n")
        for r in range(1, model.codec.q + 1):
            if n == 0:
                break
            P = model.transition_matrix(r)
            F = model.stack.F[r - 1]
            for i in range(n):
                for j in range(n):
                    fh.write(f"{r},{i + 1},{j + 1},{F[i, j]:.12g},{P[i, j]:.12g}\n")
    with open(out / "marginal.csv", "w", newline="") as fh:
        fh.write("from,to,P\n")
        if n > 0:
            M = model.marginal_matrix()
            for i in range(n):
                for j in range(n):
                    fh.write(f"{i + 1},{j + 1},{M[i, j]:.12g}\n")
    _say(args, f"exported {n} states x {model.codec.q} actions to {out}")
    return 0


def _cmd_inspect(args) -> int:
    model = load_model(args.model_in)
    n = model.n_states
    _say(args, f"snapshot: dim={model.dim}, {n} states, {model.codec.q} actions")
    _say(
        args,
        f"rho={model.rho} eps={model.eps} phi={model.phi} "
        f"eps_bar={model.eps_bar} spread_floor={model.spread_floor} "
        f"var_beta={model.var_beta}",
    )
    _say(
        args,
        f"codec: ({model.codec.lo}, {model.codec.hi}] width {model.codec.width}",
    )
    _say(args, f"observations committed: {model.accumulators.t}")
    for c in model.clusters:
        center = ", ".join("%.6g" % x for x in c.center)
        _say(
            args,
            f"  state {c.id}: center [{center}] potential {c.potential:.6g} "
            f"members {c.member_count}",
        )
    if n == 0:
        _say(args, "row-sum audit: vacuous (no states)")
        return 0
    worst = 0.0
    worst_where = (0, 0)
    for r in range(1, model.codec.q + 1):
        F = model.stack.F[r - 1]
        F_o = model.stack.F_o[r - 1]
        mass_err = np.abs(F_o - F.sum(axis=1))
        row_err = np.abs(model.transition_matrix(r).sum(axis=1) - 1.0)
        err = np.maximum(mass_err, row_err)
        i = int(np.argmax(err))
        if err[i] > worst:
            worst = float(err[i])
            worst_where = (r, i + 1)
    if worst > 1e-9:
        print(
            f"row-sum audit FAILED: action {worst_where[0]} row {worst_where[1]} "
            f"off by {worst:.3e}"
        )
        return 4
    _say(args, f"row-sum audit: ok (max deviation {worst:.3e})")
    return 0


# --------------------------------------------------------------------- parser

def _add_common(sub, config=False, model_in=False, model_out=False,
                out=False, sets=False) -> None:
    if config:
        sub.add_argument("--config", required=True, help="JSON configuration file")
    if model_in:
        sub.add_argument("--model-in", help="existing model snapshot to load")
    if model_out:
        sub.add_argument("--model-out", help="where to write the updated snapshot")
    if out:
        sub.add_argument("--out", required=True, help="output directory")
    if sets:
        sub.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config field by dotted path (repeatable)",
        )
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="efsm",
        description="evolving finite state machine: car-following experiments",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="simulate one case")
    _add_common(run, config=True, model_in=True, model_out=True, out=True, sets=True)
    run.set_defaults(func=_cmd_run)

    exp = subs.add_parser("experiment", help="run a full experiment plan")
    _add_common(exp, config=True, model_in=True, model_out=True, out=True, sets=True)
    exp.set_defaults(func=_cmd_experiment)

    ev = subs.add_parser("eval", help="re-evaluate written runlog CSVs")
    ev.add_argument("logs", nargs="+", metavar="RUNLOG_CSV")
    _add_common(ev, out=True)
    ev.set_defaults(func=_cmd_eval)

    exp_model = subs.add_parser("export-model", help="dump snapshot tables as CSV")
    exp_model.add_argument("--model-in", required=True)
    _add_common(exp_model, out=True)
    exp_model.set_defaults(func=_cmd_export_model)

    ins = subs.add_parser("inspect", help="summarize and audit a snapshot")
    ins.add_argument("--model-in", required=True)
    ins.add_argument("--quiet", action="store_true")
    ins.set_defaults(func=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SnapshotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
