"""Command line entry point: ``orbitswarm run | validate | presets``.

Exit codes:

    0  run finished with no safety violation, singularity or (if enabled) saturation
    2  usage error or missing scenario file
    3  scenario parse/validation error
    4  collision: some pair came within the safety distance r
    5  singular safety correction or degenerate guiding field
    6  turn-rate saturation (only when ``run.fail_on_saturation`` is true)
    7  output I/O error

Set ``ORBITSWARM_LOG`` to a logging level name (``DEBUG``, ``INFO``,
``WARNING``...) to change diagnostic verbosity; it never changes results.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import load_scenario, preset_names, preset_text
from .errors import DegenerateFieldError, ScenarioError
from .sim import monitor_report, run_scenario
from .telemetry import emit_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_COLLISION = 4
EXIT_SINGULARITY = 5
EXIT_SATURATION = 6
EXIT_IO = 7

log = logging.getLogger("orbitswarm")


def _parser():
    p = argparse.ArgumentParser(prog="orbitswarm", description="Collision-free orbiting unicycle swarms.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write CSV telemetry")
    run.add_argument("--config", required=True, help="scenario YAML file or preset name")
    run.add_argument("--out", required=True, help="output directory for the CSV files")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override a scenario value, e.g. safety.omega_max=1.5 (repeatable)")
    run.add_argument("--halt-on-collision", action="store_true")
    run.add_argument("--force", action="store_true", help="overwrite existing CSV files")

    val = sub.add_parser("validate", help="parse and validate a scenario without running it")
    val.add_argument("--config", required=True)
    val.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")

    pre = sub.add_parser("presets", help="list or print the shipped scenarios")
    pre_sub = pre.add_subparsers(dest="action", required=True)
    pre_sub.add_parser("list")
    show = pre_sub.add_parser("show")
    show.add_argument("name")
    return p


def _load(args, out, err):
    try:
        return load_scenario(args.config, args.overrides), None
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=err)
        return None, EXIT_USAGE
    except ScenarioError as exc:
        print(f"error: invalid scenario {args.config}", file=err)
        for where, msg in exc.problems:
            print(f"  {where}: {msg}" if where else f"  {msg}", file=err)
        return None, EXIT_CONFIG


def run_command(args, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    if args.seed < 0:
        print("error: --seed must be >= 0", file=err)
        return EXIT_USAGE
    sc, code = _load(args, out, err)
    if sc is None:
        return code
    if args.halt_on_collision:
        sc.halt_on_collision = True
    try:
        result = run_scenario(sc, args.seed)
    except DegenerateFieldError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_SINGULARITY
    try:
        paths = emit_csv(result.records, args.out, force=args.force)
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_IO
    summary = monitor_report(result)
    print(f"scenario {sc.name} (seed {args.seed}, {result.totals['steps']} steps of {sc.dt:g} s)", file=out)
    for line in summary.lines():
        print(line, file=out)
    print("wrote " + ", ".join(str(p) for p in paths), file=out)
    if not summary.collision_free:
        return EXIT_COLLISION
    if summary.singularity_count:
        return EXIT_SINGULARITY
    if sc.fail_on_saturation and summary.saturation_count:
        return EXIT_SATURATION
    return EXIT_OK


def validate_command(args, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    sc, code = _load(args, out, err)
    if sc is None:
        return code
    n = sum(g.count for g in sc.robots)
    print(f"ok: {sc.name} ({n} robots, {sc.path.kind} path, {sc.duration:g} s at dt={sc.dt:g})", file=out)
    return EXIT_OK


def presets_command(args, out=None, err=None) -> int:
    out = out or sys.stdout
    if args.action == "list":
        for name in preset_names():
            print(name, file=out)
        return EXIT_OK
    try:
        out.write(preset_text(args.name))
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=err or sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main(argv=None) -> int:
    level = os.environ.get("ORBITSWARM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {"run": run_command, "validate": validate_command, "presets": presets_command}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
