"""Command-line entry point.

Exit codes: 0 success, 1 validation error or bad usage, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .budget import build_ledger, ledger_to_json, render_ledger
from .config import example_file, load_config, reference_page
from .engine import SimulationConfig, run
from .network import export
from .node import DutyCycleConfig
from .report import load_report, summarize, write_report
from .scenario import SCENARIOS, generate, write_trace
from .sensing import (
    GasSpecies,
    calibration_grid,
    default_sensor_specs,
    fit_compensation,
    read_calibration_grid,
    write_calibration_grid,
)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; 2 is reserved for I/O here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ehsim", description="Energy-harvesting gas-sensing node simulator.")
    p.add_argument("--version", action="version", version=f"ehsim {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    b = sub.add_parser("budget", help="print the closed-form daily energy ledger")
    b.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    b.add_argument("--config", help="INI file whose [duty] and [harvest] sections apply")

    s = sub.add_parser("simulate", help="run the simulator and write a report directory")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--scenario", choices=sorted(SCENARIOS))
    src.add_argument("--trace", help="trace CSV file")
    s.add_argument("--config", help="INI config file (flags override it)")
    s.add_argument("--days", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--nodes", type=int)
    s.add_argument("--start-soc", type=float, help="initial soc of every node, J")
    s.add_argument("--mode", choices=("event", "fixed_step"))
    s.add_argument("--step", type=float, help="fixed-step dt in s (mode fixed_step)")
    s.add_argument("--no-noise", action="store_true", help="disable sensing noise")
    s.add_argument("--export", help="also write gateway records to this file (.csv or .json)")
    s.add_argument("--out", required=True, help="report directory")

    g = sub.add_parser("gen-trace", help="write a scenario trace CSV")
    g.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    gg = sub.add_parser("gen-grid", help="write a noise-free calibration grid CSV")
    gg.add_argument("--species", required=True)
    gg.add_argument("--temps", default="-10,0,10,20,30,40,50", help="comma-separated temperatures in C; write --temps=-10,... for negatives")
    gg.add_argument("--out", required=True)

    c = sub.add_parser("calibrate", help="fit a quartic temperature compensation")
    c.add_argument("--grid", required=True, help="calibration grid CSV")
    c.add_argument("--species", required=True)
    c.add_argument("--out", required=True, help="polynomial JSON output")

    r = sub.add_parser("report", help="summarize a report directory")
    r.add_argument("--run", required=True, help="report directory written by simulate")

    cr = sub.add_parser("config-ref", help="print the configuration reference")
    cr.add_argument("--example", action="store_true", help="print a full example INI instead")
    return p


def _cmd_budget(args) -> int:
    duty, hs = DutyCycleConfig(), None
    if args.config:
        cfg = load_config(args.config)
        duty, hs = cfg.duty, cfg.harvesters
    ledger = build_ledger(duty, hs)
    if args.json:
        print(json.dumps(ledger_to_json(ledger, duty), indent=1))
    else:
        sys.stdout.write(render_ledger(ledger, duty))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config) if args.config else SimulationConfig()
    kw = {}
    if args.scenario:
        kw.update(scenario=args.scenario, trace_path=None)
    if args.trace:
        kw["trace_path"] = args.trace
    for name in ("days", "seed", "nodes", "mode", "step"):
        v = getattr(args, name)
        if v is not None:
            kw[name] = v
    if args.start_soc is not None:
        kw["start_soc"] = args.start_soc
    if args.no_noise:
        kw["sensing_noise"] = False
    cfg = replace(cfg, **kw)
    report = run(cfg)
    out = write_report(report, args.out)
    if args.export:
        fmt = "json" if args.export.endswith(".json") else "csv"
        export(report.gateway, args.export, fmt)
    n = sum(x.packets_emitted for x in report.nodes)
    print(f"wrote {out} ({n} packets, final soc {', '.join(f'{s:.4f}' for s in report.final_socs)} J)")
    return EXIT_OK


def _cmd_gen_trace(args) -> int:
    trace = generate(args.scenario, args.seed)
    write_trace(trace, args.out)
    print(f"wrote {args.out} ({len(trace)} samples)")
    return EXIT_OK


def _cmd_gen_grid(args) -> int:
    species = GasSpecies.parse(args.species)
    temps = [float(t) for t in args.temps.split(",") if t.strip()]
    grid = calibration_grid(default_sensor_specs()[species], temps)
    write_calibration_grid(args.out, grid)
    print(f"wrote {args.out} ({len(grid)} points)")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    species = GasSpecies.parse(args.species)
    grid = read_calibration_grid(args.grid)
    poly = fit_compensation(default_sensor_specs()[species], grid)
    Path(args.out).write_text(json.dumps(poly.to_json(), indent=1) + "\n")
    print(f"wrote {args.out} (max residual {poly.max_residual:.3g} ppm)")
    return EXIT_OK


def _cmd_report(args) -> int:
    sys.stdout.write(summarize(load_report(args.run)))
    return EXIT_OK


def _cmd_config_ref(args) -> int:
    print(example_file() if args.example else reference_page())
    return EXIT_OK


COMMANDS = {
    "budget": _cmd_budget,
    "simulate": _cmd_simulate,
    "gen-trace": _cmd_gen_trace,
    "gen-grid": _cmd_gen_grid,
    "calibrate": _cmd_calibrate,
    "report": _cmd_report,
    "config-ref": _cmd_config_ref,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
