"""Command-line front end: ``analyze``, ``evolve``, ``convergence``, ``catalog``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from .catalog import CATALOG, oracle_values
from .core import NumericalError, PhysicalConstants
from .scenario import (
    CONFIG_SCHEMA,
    ConfigError,
    ReportIOError,
    dump_fields,
    emit_convergence,
    emit_report,
    load_config,
    run_convergence,
    run_scenario,
)

log = logging.getLogger("qpfisher")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _log_warning(message, category, filename, lineno, file=None, line=None):
    log.warning("%s", message)


def _fields_path(out: str | None, scenario_id: str) -> Path:
    if out and out != "-":
        p = Path(out)
        return p.with_name(p.stem + "_fields.csv")
    return Path(f"{scenario_id}_fields.csv")


def _run(args, mode: str) -> int:
    cfg = load_config(args.config)
    report = run_scenario(cfg, mode)
    emit_report(report, args.format, args.out)
    if args.dump_fields:
        path = _fields_path(args.out, cfg.scenario_id)
        dump_fields(report, cfg.grid, path)
        log.info("field profiles written to %s", path)
    return EXIT_OK


def cmd_analyze(args) -> int:
    return _run(args, "static")


def cmd_evolve(args) -> int:
    return _run(args, "evolve")


def cmd_convergence(args) -> int:
    cfg = load_config(args.config)
    tables = run_convergence(cfg, args.refinements)
    emit_convergence(tables, cfg.scenario_id, args.format, args.out)
    return EXIT_OK


def cmd_catalog(args) -> int:
    consts = PhysicalConstants()
    entries = {
        name: {key: {"value": v, "provenance": tag} for key, (v, tag) in oracle_values(spec, consts).items()}
        for name, spec in CATALOG.items()
    }
    if args.format == "json":
        print(json.dumps({"constants": consts.as_dict(), "densities": entries}, indent=2))
    else:
        print("density,quantity,value,provenance")
        for name, vals in entries.items():
            for key, d in vals.items():
                print(f'"{name}",{key},{d["value"]!r},"{d["provenance"]}"')
    return EXIT_OK


def cmd_schema(args) -> int:
    print(json.dumps(CONFIG_SCHEMA, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpfisher",
        description="Check heat / quantum-potential / Fisher-information relations on discretized densities.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def report_args(p):
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("analyze", help="static density checks")
    report_args(p)
    p.add_argument("--dump-fields", action="store_true", help="also write a CSV of field profiles")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evolve", help="Crank-Nicolson trajectory plus time-dependent checks")
    report_args(p)
    p.add_argument("--dump-fields", action="store_true", help="also write a CSV of field profiles")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("convergence", help="grid-refinement study of the requested checks")
    report_args(p)
    p.add_argument("--refinements", type=int, default=4, help="number of grids, each halving h (>= 3)")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("catalog", help="list analytic densities and their oracle values")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("schema", help="print the scenario JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        with warnings.catch_warnings():
            warnings.showwarning = _log_warning
            return args.func(args)
    except ConfigError as e:
        log.error("%s", e)
        return EXIT_CONFIG
    except NumericalError as e:
        log.error("numerical error: %s", e)
        return EXIT_NUMERICAL
    except (ReportIOError, OSError) as e:
        log.error("%s", e)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
