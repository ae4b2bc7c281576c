"""Command-line entry point: ``wslatency {run,sweep,gamma,bound,probe}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from . import analysis, experiments
from .engine import ReferenceSimulation, run
from .model import ENGINES, OVERHEAD_FORMS, ConfigError, SimConfig, load_config, validate

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--W", type=int, help="total work in unit tasks")
    p.add_argument("--p", type=int, help="number of processors")
    p.add_argument("--lambda", dest="lam", type=int, help="communication latency in ticks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--engine", choices=ENGINES, default="event")
    p.add_argument("--overhead-form", choices=OVERHEAD_FORMS, default="W_over_lambda")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wslatency", description="Work stealing with latency: simulation and bounds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate one configuration")
    _add_sim_flags(p)
    p.add_argument("--config", help="JSON file with SimConfig fields (flags are ignored)")
    p.add_argument("--trace-out", help="write per-steal events as CSV")
    p.add_argument("--potential-out", help="write the k,phi,r_k series as CSV")
    p.add_argument("--snapshot-at", type=int, metavar="K", help="dump the full state at t = K*lambda")
    p.add_argument("--snapshot-out", default="snapshot.json")

    p = sub.add_parser("sweep", help="run a parameter grid")
    p.add_argument("--config", help="JSON SweepSpec (W_values, p_values, lambda_values, replications, base_seed, budget)")
    p.add_argument("--W", type=int, nargs="+")
    p.add_argument("--p", type=int, nargs="+")
    p.add_argument("--lambda", dest="lam", type=int, nargs="+")
    p.add_argument("--reps", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--engine", choices=ENGINES, default="event")
    p.add_argument("--overhead-form", choices=OVERHEAD_FORMS, default="W_over_lambda")
    p.add_argument("--out", help="CSV of runs (default: stdout)")
    p.add_argument("--summary", help="summary JSON path")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("gamma", help="tabulate gamma(p)")
    p.add_argument("--p", type=int, help="single p")
    p.add_argument("--p-min", type=int)
    p.add_argument("--p-max", type=int)

    p = sub.add_parser("bound", help="evaluate the makespan bound")
    p.add_argument("--W", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=int, required=True)
    p.add_argument("--x", type=float, help="tail slack")
    p.add_argument("--universal-gamma", action="store_true", help="use 4.03 instead of gamma(p)")

    p = sub.add_parser("probe", help="estimate E[phi(k+1)/phi(k)] from a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--ensemble", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--keep-targets", action="store_true", help="do not redraw victims of in-flight requests")
    return parser


def _fail(msg: str, code: int = EXIT_VALIDATION) -> int:
    print(f"wslatency: error: {msg}", file=sys.stderr)
    return code


def cmd_run(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    else:
        for flag, value in (("W", args.W), ("p", args.p), ("lambda", args.lam)):
            if value is None:
                raise ConfigError(f"--{flag} is required", flag)
        cfg = validate(SimConfig(args.W, args.p, args.lam, args.seed, args.engine, args.overhead_form))

    if args.snapshot_at is not None:
        if args.snapshot_at < 0:
            raise ConfigError("snapshot-at must be ≥ 0", "snapshot-at")
        sim = ReferenceSimulation(cfg)
        sim.run(until=args.snapshot_at * cfg.latency)
        if sim.makespan is not None:
            return _fail(f"run finished at t={sim.makespan} before t={args.snapshot_at * cfg.latency}")
        analysis.save_snapshot(sim.snapshot(), args.snapshot_out)

    trace = run(cfg)
    record = experiments.record_from_trace(cfg, trace)
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(experiments.CSV_HEADER)
    out.writerow(record.csv_row())

    if args.trace_out:
        with open(args.trace_out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "victim", "thief", "outcome", "amount"])
            for e in trace.steal_events:
                w.writerow([e.t, e.victim, e.thief, e.outcome, e.amount])
    if args.potential_out:
        analysis.write_potential_csv(analysis.extract_potential_series(trace, cfg.latency), args.potential_out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config:
        with open(args.config) as fh:
            spec_doc = json.load(fh)
    else:
        spec_doc = {}
    for key, value in (
        ("W_values", args.W),
        ("p_values", args.p),
        ("lambda_values", args.lam),
        ("replications", args.reps),
        ("base_seed", args.base_seed),
        ("budget", args.budget),
    ):
        if value is not None:
            spec_doc[key] = value
    try:
        spec = experiments.SweepSpec.from_dict(spec_doc)
    except (TypeError, ValueError) as e:
        return _fail(f"bad sweep spec: {e}")
    for W, p, lam in spec.cells:
        validate(SimConfig(W, p, lam))
    try:
        cells = experiments.run_sweep(spec, args.engine, args.overhead_form, args.workers)
    except experiments.BudgetExceeded as e:
        return _fail(str(e), EXIT_BUDGET)
    text = experiments.runs_csv(cells)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.summary:
        with open(args.summary, "w") as fh:
            fh.write(experiments.summary_json(spec, cells) + "\n")
    return EXIT_OK


def cmd_gamma(args) -> int:
    if args.p is not None:
        ps = [args.p]
    elif args.p_min is not None and args.p_max is not None:
        ps = list(range(args.p_min, args.p_max + 1))
    else:
        raise ConfigError("give --p or both --p-min and --p-max", "p")
    if min(ps) < 2:
        raise ConfigError("p must be ≥ 2", "p")
    print("p,gamma")
    for p in ps:
        print(f"{p},{analysis.gamma(p):.6g}")
    print(f"cap,{analysis.GAMMA_CAP:.6g}")
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = validate(SimConfig(args.W, args.p, args.lam))
    if cfg.processors < 2:
        raise ConfigError("p must be ≥ 2 for the bound", "p")
    if cfg.total_work < 1:
        raise ConfigError("W must be ≥ 1 for the bound", "W")
    g = analysis.UNIVERSAL_GAMMA if args.universal_gamma else None
    report = analysis.bound_report(args.W, args.p, args.lam, g)
    if report.degenerate:
        print("wslatency: warning: log argument ≤ 1, log terms dropped", file=sys.stderr)
    doc = report.to_dict()
    if args.x is not None:
        if args.x < 0:
            raise ConfigError("x must be ≥ 0", "x")
        paper, proof = report.bound_tail(args.x)
        doc["x"] = args.x
        doc["tail_paper"] = paper
        doc["tail_proof"] = proof
    print(json.dumps(experiments._round6(doc), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_probe(args) -> int:
    if args.ensemble < 1:
        raise ConfigError("ensemble must be ≥ 1", "ensemble")
    doc = analysis.load_snapshot(args.snapshot)
    try:
        result = analysis.lemma1_probe(doc, args.ensemble, args.seed, redraw_targets=not args.keep_targets)
    except ValueError as e:
        return _fail(str(e))
    print(json.dumps(experiments._round6(result.to_dict()), indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "gamma": cmd_gamma, "bound": cmd_bound, "probe": cmd_probe}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        flag = f" (--{e.flag})" if e.flag else ""
        return _fail(f"{e}{flag}")


if __name__ == "__main__":
    sys.exit(main())
