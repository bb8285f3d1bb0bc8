"""Command-line front end: ``attitude-consensus run|check|sweep``.

Exit codes:
    0  success
    2  usage error (bad flags, empty sweep grid)
    3  config file not found
    4  config schema or value error
    5  graph validation failure
    6  numerical blow-up during simulation
"""
import argparse
import csv
import itertools
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, build_scenario, effective_config, read_config
from .diagnostics import diagnostics_series, monotonicity_report, time_to_consensus
from .export import RunReport, summarize, write_outputs, write_report
from .graph import GraphError
from .simulator import InitialSetWarning, SimulationError, check_initial_set, run_scenario

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_SCHEMA, EXIT_GRAPH, EXIT_BLOWUP = 0, 2, 3, 4, 5, 6

log = logging.getLogger("attitude_consensus")


def _overrides(args):
    items = list(args.set or [])
    if args.step is not None:
        items.append(f"scenario.step={args.step}")
    if args.duration is not None:
        items.append(f"scenario.duration={args.duration}")
    return items


def _load(path, overrides):
    parser = read_config(path, overrides)
    cfg = build_scenario(parser, name=Path(path).stem)
    return cfg, parser


def _initial_set_dict(cfg):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", InitialSetWarning)
        rep = check_initial_set(cfg)
    for w in caught:
        log.warning("%s", w.message)
    return {
        "set": {"I": "S1", "II": "S2", "III": "S3"}[cfg.objective],
        "value": rep.value,
        "bound": rep.bound,
        "margin": rep.margin,
        "member": bool(rep.member),
    }


def cmd_run(config, output, overrides=(), every=1):
    """Run a scenario and write CSV, column map and reports to ``output``.

    Returns:
        ``(exit_code, RunReport)``.
    """
    cfg, parser = _load(config, overrides)
    initial = _initial_set_dict(cfg)
    try:
        traj = run_scenario(cfg)
        status, code = "ok", EXIT_OK
    except SimulationError as err:
        log.error("%s", err)
        traj, status, code = err.log, f"blow-up: {err}", EXIT_BLOWUP
        if traj is None or len(traj.t) < 2:
            report = RunReport(cfg.name, cfg.objective, status, cfg.duration, cfg.step,
                               failure_time=err.time)
            report.initial_set, report.overrides = initial, list(overrides)
            report.effective_config = effective_config(parser)
            out = Path(output)
            out.mkdir(parents=True, exist_ok=True)
            write_report(report, out / f"{cfg.name}_report.txt", out / f"{cfg.name}_report.json")
            return code, report
        failure = err.time
    series = diagnostics_series(traj)
    report = summarize(traj, series, status)
    if code == EXIT_BLOWUP:
        report.failure_time = failure
    report.initial_set = initial
    report.overrides = list(overrides)
    report.effective_config = effective_config(parser)
    write_outputs(traj, output, report, series, every)
    return code, report


def cmd_check(config, overrides=()):
    """Validate a scenario and evaluate its initial-set inequality."""
    cfg, _ = _load(config, overrides)
    return EXIT_OK, cfg, _initial_set_dict(cfg)


def parse_grid(items):
    """``["gains.Kp=1,2", "gains.Kd=2"]`` -> ``[("gains.Kp", ["1", "2"]), ...]``."""
    grid = []
    for item in items or []:
        key, sep, values = item.partition("=")
        vals = [v.strip() for v in values.split(",") if v.strip()]
        if not sep or "." not in key or not vals:
            raise ValueError(f"grid entry must look like section.key=v1,v2, got {item!r}")
        grid.append((key.strip(), vals))
    if not grid:
        raise ValueError("sweep needs at least one --grid entry")
    return grid


def _sweep_cell(config, base, cell):
    overrides = list(base) + [f"{k}={v}" for k, v in cell]
    row = {k: v for k, v in cell}
    try:
        cfg, _ = _load(config, overrides)
        traj = run_scenario(cfg)
        series = diagnostics_series(traj)
        which = "V1" if cfg.objective == "I" else "V2"
        row.update(
            status="ok",
            time_to_consensus=time_to_consensus(traj.t, series["max_pairwise_angle"],
                                                cfg.consensus_threshold),
            violations=len(monotonicity_report(traj, which)),
            final_max_pairwise_angle_deg=float(np.rad2deg(series["max_pairwise_angle"][-1])),
        )
    except SimulationError as err:
        row.update(status=f"blow-up at t={err.time:.6g}")
    except (ConfigError, GraphError, ValueError) as err:
        row.update(status=f"error: {err}")
    return row


def cmd_sweep(config, output, grid, overrides=(), jobs=1):
    """Run every grid cell and write ``sweep.csv``; failed cells are recorded."""
    _load(config, overrides)  # fail fast on a bad base config
    cells = [list(zip([k for k, _ in grid], combo)) for combo in itertools.product(*[v for _, v in grid])]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, [config] * len(cells), [overrides] * len(cells), cells))
    else:
        rows = [_sweep_cell(config, overrides, c) for c in cells]
    out = Path(output)
    out.mkdir(parents=True, exist_ok=True)
    fields = [k for k, _ in grid] + [
        "status", "time_to_consensus", "violations", "final_max_pairwise_angle_deg"
    ]
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if row.get(k) is None else row.get(k) for k in fields})
    return EXIT_OK, path, rows


def build_parser():
    parser = argparse.ArgumentParser(
        prog="attitude-consensus", description="Simulate attitude consensus on SO(3)."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("config", help="scenario .cfg file")
        if output:
            p.add_argument("--output", default="output", help="output directory (default: output)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("--step", type=float, help="integration step in s")
        p.add_argument("--duration", type=float, help="simulated time in s")

    run = sub.add_parser("run", help="simulate and write CSV + report")
    common(run)
    run.add_argument("--every", type=int, default=1, help="write every k-th sample to the CSV")
    check = sub.add_parser("check", help="validate config and report the initial-set margin")
    common(check, output=False)
    sweep = sub.add_parser("sweep", help="run a parameter grid")
    common(sweep)
    sweep.add_argument("--grid", action="append", metavar="SECTION.KEY=V1,V2",
                       help="grid axis (repeatable)")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        overrides = _overrides(args)
        if args.command == "run":
            code, report = cmd_run(args.config, args.output, overrides, args.every)
            print(report.to_text(), end="")
            return code
        if args.command == "check":
            code, cfg, initial = cmd_check(args.config, overrides)
            print(f"OK: {cfg.name} (objective {cfg.objective}, {cfg.n} agents)")
            print(json.dumps(initial, indent=2))
            return code
        try:
            grid = parse_grid(args.grid)
        except ValueError as err:
            print(f"usage error: {err}", file=sys.stderr)
            return EXIT_USAGE
        code, path, rows = cmd_sweep(args.config, args.output, grid, overrides, max(1, args.jobs))
        print(f"{len(rows)} cells written to {path}")
        return code
    except GraphError as err:
        print(f"graph error: {err}", file=sys.stderr)
        return EXIT_GRAPH
    except ConfigError as err:
        label = "missing file" if err.exit_code == EXIT_MISSING else "config error"
        print(f"{label}: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
