"""Command-line entry point: run one scenario, sweep a grid, compare results,
or dump a congestion-window trace."""

import argparse
import json
import math
import sys

from .config import (ConfigError, ScenarioConfig, apply_overrides, load_config,
                     load_sweep, SweepSpec)
from .metrics import (CSV_COLUMNS, MetricsRecord, export_csv,
                      export_cwnd_trace, format_table)
from .scenario import run_scenario
from .sweep import (aggregate, export_aggregate_csv, report_text, run_sweep)


def _build_config(args):
    config = load_config(args.config) if args.config else ScenarioConfig()
    if args.set:
        apply_overrides(config, args.set)
    if args.seed is not None:
        config.seed = args.seed
    config.validate()
    return config


def cmd_run(args):
    config = _build_config(args)
    result = run_scenario(config)
    record = result.record
    print(format_table([record]))
    if args.verbose:
        for key in sorted(result.counters):
            print(f"  {key}: {result.counters[key]}")
    if args.out:
        export_csv([record], args.out)
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args):
    if args.spec:
        spec = load_sweep(args.spec)
    else:
        spec = SweepSpec()
    configs = spec.expand()
    print(f"running {len(configs)} scenarios on {args.jobs} worker(s)")
    records, failures = run_sweep(configs, jobs=args.jobs)
    for sid, seed, err in failures:
        print(f"FAILED {sid} seed={seed}: {err}", file=sys.stderr)
    print(format_table(records))
    if args.out:
        export_csv(records, args.out)
        agg_path = args.out.rsplit(".", 1)[0] + "_agg.csv"
        export_aggregate_csv(aggregate(records), agg_path)
        print(f"wrote {args.out} and {agg_path}")
    text, _checks = report_text(records)
    print(text)
    return 1 if failures else 0


def _records_from_csv(paths):
    records = []
    for path in paths:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header != list(CSV_COLUMNS):
                raise ConfigError(f"{path}: unexpected CSV header")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                vals = line.split(",")
                row = dict(zip(CSV_COLUMNS, vals))
                records.append(MetricsRecord(
                    scenario_id=row["scenario_id"], seed=int(row["seed"]),
                    variant=row["variant"], node_count=int(row["node_count"]),
                    proxy_mode=row["proxy_mode"],
                    throughput_kbps=float(row["throughput_kbps"]),
                    mean_delay_ms=float(row["mean_delay_ms"]),
                    pdr=float(row["pdr"]), generated=int(row["generated"]),
                    delivered=int(row["delivered"])))
    return records


def cmd_report(args):
    records = _records_from_csv(args.csv)
    text, checks = report_text(records)
    print(text)
    if args.json:
        payload = {
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in checks],
            "all_passed": all(c.passed for c in checks),
        }
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.json}")
    return 0 if all(c.passed for c in checks) else 1


def cmd_trace(args):
    config = _build_config(args)
    result = run_scenario(config, trace_origin=args.origin)
    if result.cwnd_trace is None:
        print(f"node {args.origin} has no traced connection", file=sys.stderr)
        return 1
    export_cwnd_trace(result.cwnd_trace, args.out)
    print(f"wrote {len(result.cwnd_trace)} trace rows to {args.out}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wsnsim",
        description="Discrete-event WSN simulator: TCP variants over "
                    "AODV/CSMA-CA with optional proxy aggregation.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a single scenario")
    run_p.add_argument("--config", help="key=value config file")
    run_p.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--out", help="write the per-run CSV here")
    run_p.add_argument("--verbose", action="store_true",
                       help="print run counters")
    run_p.set_defaults(fn=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a scenario grid")
    sweep_p.add_argument("--spec", help="sweep spec file (defaults to the "
                                        "full variant x size x placement grid)")
    sweep_p.add_argument("--jobs", type=int, default=1)
    sweep_p.add_argument("--out", help="write per-run CSV (+ _agg.csv) here")
    sweep_p.set_defaults(fn=cmd_sweep)

    report_p = sub.add_parser("report", help="trend report from run CSVs")
    report_p.add_argument("csv", nargs="+", help="per-run CSV files")
    report_p.add_argument("--json", help="write machine-readable summary here")
    report_p.set_defaults(fn=cmd_report)

    trace_p = sub.add_parser("trace", help="dump one connection's cwnd trace")
    trace_p.add_argument("--config", help="key=value config file")
    trace_p.add_argument("--set", action="append", default=[],
                         metavar="KEY=VALUE")
    trace_p.add_argument("--seed", type=int, default=None)
    trace_p.add_argument("--origin", type=int, required=True,
                         help="node whose connection to trace")
    trace_p.add_argument("--out", required=True)
    trace_p.set_defaults(fn=cmd_trace)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
