"""Command-line interface.

Subcommands: ``simulate``, ``strata``, ``fit``, ``baseline``, and
``experiment {recovery,samplesize,ghost,casestudy}``. Options can be
preloaded from a JSON config file (``--config``); explicit flags override
config values. All randomness is controlled by a single ``--seed``.

Exit codes: 0 success, 1 invalid configuration, 2 input data error,
3 at least one replication failed (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .baseline import (SplineConfig, breslow, curves_to_csv,
                       hazard_ratio_summary, pspline_smooth, summary_json_dict)
from ._util import dump_json
from .errors import EventDataError, RemfrailError
from .events import parse_events
from .experiments import ExperimentSpec, run_study
from .fitting import fit_fixed, fit_frailty
from .model_data import RiskPolicy, build_model_data
from .simulate import SimulationConfig, simulate
from .strata import TriadicKind, build_timelines, timelines_to_csv


class _ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); map onto exit code 1
        raise _ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="remfrail",
                     description="Relational event models with nodal frailties")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[], help="simulate a history "
                         "from the constant-rate frailty model")
    sim.add_argument("--actors", type=int, default=30)
    sim.add_argument("--events", type=int, default=2000)
    sim.add_argument("--sigma-exp", type=float, default=0.9)
    sim.add_argument("--sigma-pop", type=float, default=1.3)
    sim.add_argument("--baseline-rate", type=float, default=1.0)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output events CSV")
    sim.add_argument("--frailties-out", help="ground-truth effects CSV")

    def add_input_args(p):
        p.add_argument("--events-file", required=True)
        p.add_argument("--time-format", choices=["seconds", "iso8601"],
                       default="seconds")
        p.add_argument("--kind", default="transitive",
                       choices=[k.value for k in TriadicKind])

    strata = sub.add_parser("strata", help="export stratum timelines")
    add_input_args(strata)
    strata.add_argument("--out", required=True, help="timeline CSV")

    fit = sub.add_parser("fit", help="fit the fixed or frailty model")
    add_input_args(fit)
    fit.add_argument("--model", choices=["frailty", "fixed"], default="frailty")
    fit.add_argument("--risk-policy", choices=["default", "full", "sampled"],
                     default="default")
    fit.add_argument("--sample-size", type=int, default=50)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--out", required=True, help="fit result JSON")
    fit.add_argument("--frailties-csv", help="estimated effects CSV")

    base = sub.add_parser("baseline", help="fit, then export baseline "
                          "hazard curves and hazard-ratio summary")
    add_input_args(base)
    base.add_argument("--model", choices=["frailty", "fixed"], default="frailty")
    base.add_argument("--risk-policy", choices=["default", "full", "sampled"],
                      default="default")
    base.add_argument("--sample-size", type=int, default=50)
    base.add_argument("--seed", type=int, default=0)
    base.add_argument("--curves-out", required=True)
    base.add_argument("--summary-out", required=True)

    exp = sub.add_parser("experiment", help="run a full study")
    exp.add_argument("study", choices=["recovery", "samplesize", "ghost",
                                       "casestudy"])
    exp.add_argument("--config", help="JSON file with ExperimentSpec fields")
    exp.add_argument("--scale", choices=["paper", "desk"], default=None)
    exp.add_argument("--replications", type=int, default=None)
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--jobs", type=int, default=None)
    exp.add_argument("--kind", default=None)
    exp.add_argument("--events-file", default=None, help="casestudy input")
    exp.add_argument("--time-format", choices=["seconds", "iso8601"],
                     default=None)
    exp.add_argument("--out", required=True, help="output directory")
    return parser


def _resolve_policy(args) -> RiskPolicy | None:
    if args.risk_policy == "full":
        return RiskPolicy.full()
    if args.risk_policy == "sampled":
        return RiskPolicy.sampled(args.sample_size, seed=args.seed)
    return None


def _load_history(args):
    with open(args.events_file, "r", encoding="utf-8") as fh:
        return parse_events(fh, args.time_format)


def _cmd_simulate(args) -> int:
    config = SimulationConfig(args.actors, args.events, args.sigma_exp,
                              args.sigma_pop, args.baseline_rate, args.seed)
    history, frailties = simulate(config)
    with open(args.out, "w", encoding="utf-8") as fh:
        history.to_csv(fh)
    if args.frailties_out:
        with open(args.frailties_out, "w", encoding="utf-8") as fh:
            frailties.to_csv(fh, symbols=history.symbols)
    print(f"wrote {history.n_events} events for {history.n_actors} actors "
          f"to {args.out}")
    return 0


def _cmd_strata(args) -> int:
    history = _load_history(args)
    timelines = build_timelines(history, TriadicKind.parse(args.kind))
    with open(args.out, "w", encoding="utf-8") as fh:
        timelines_to_csv(timelines, fh, symbols=history.symbols)
    print(f"wrote stratum timelines for {len(timelines)} dyads to {args.out}")
    return 0


def _fit_from_args(args):
    history = _load_history(args)
    data = build_model_data(history, TriadicKind.parse(args.kind),
                            _resolve_policy(args))
    fit = fit_frailty(data) if args.model == "frailty" else fit_fixed(data)
    return history, data, fit


def _cmd_fit(args) -> int:
    history, _, fit = _fit_from_args(args)
    Path(args.out).write_text(fit.to_json() + "\n")
    if args.frailties_csv:
        with open(args.frailties_csv, "w", encoding="utf-8") as fh:
            fit.frailty_csv(fh, symbols=history.symbols)
    print(f"{args.model} fit written to {args.out} "
          f"(converged={fit.converged})")
    return 0


def _cmd_baseline(args) -> int:
    _, data, fit = _fit_from_args(args)
    steps = breslow(data, fit)
    curves = {label: pspline_smooth(step, SplineConfig())
              for label, step in steps.items()}
    ratios = hazard_ratio_summary(curves)
    with open(args.curves_out, "w", encoding="utf-8") as fh:
        curves_to_csv(curves, fh)
    Path(args.summary_out).write_text(
        dump_json(summary_json_dict(curves, ratios)) + "\n")
    print(f"baseline curves for {len(curves)} strata written to "
          f"{args.curves_out}")
    return 0


def _cmd_experiment(args) -> int:
    config: dict = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
    overrides = {
        "replications": args.replications,
        "seed": args.seed,
        "n_jobs": args.jobs,
        "kind": args.kind,
        "events_file": args.events_file,
        "time_format": args.time_format,
    }
    config.update({k: v for k, v in overrides.items() if v is not None})
    scale = args.scale or config.pop("scale", "desk")
    config.pop("study", None)

    try:
        if args.study == "recovery":
            spec = ExperimentSpec.recovery(scale, **config)
        elif args.study == "samplesize":
            spec = ExperimentSpec.samplesize(scale, **config)
        elif args.study == "ghost":
            spec = ExperimentSpec.ghost(scale, **config)
        else:
            events_file = config.pop("events_file", None)
            if not events_file:
                raise _ConfigError("casestudy requires --events-file")
            spec = ExperimentSpec.case_study(events_file, **config)
    except (TypeError, ValueError) as exc:
        raise _ConfigError(str(exc)) from exc

    report = run_study(spec)
    out = report.write(args.out)
    print(f"{args.study}: {len(report.records)} records, "
          f"{report.n_failures} failures -> {out}")
    return 3 if report.n_failures else 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "strata":
            return _cmd_strata(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "baseline":
            return _cmd_baseline(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        raise _ConfigError(f"unknown command {args.command}")
    except _ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EventDataError, FileNotFoundError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except RemfrailError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
