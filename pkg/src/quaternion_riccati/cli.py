"""Command line front end: run scenarios, list and show the builtin catalog."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from quaternion_riccati import __version__
from quaternion_riccati.config import Settings, get_settings
from quaternion_riccati.errors import SchemaError
from quaternion_riccati.models import RunReport, Scenario, parse_scenario
from quaternion_riccati.scenarios import (
    builtin_config,
    builtin_names,
    catalog,
    load_builtin,
    run_scenario,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_SCHEMA_ERROR = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quaternion-riccati",
        description=(
            "Integrate and classify quaternionic Riccati equations and linear systems."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a scenario file or a builtin scenario")
    run.add_argument(
        "scenario", nargs="?", help="path to a JSON scenario or a builtin name"
    )
    run.add_argument("--all-builtins", action="store_true", help="run the whole catalog")
    run.add_argument("--horizon", type=float, help="override the scenario horizon")
    run.add_argument("--rtol", type=float, help="relative tolerance of the integrator")
    run.add_argument("--atol", type=float, help="absolute tolerance of the integrator")
    run.add_argument(
        "--out", type=Path, help="output root (default: $QR_OUT_DIR or ./qr-out)"
    )

    commands.add_parser("list-builtins", help="list the builtin scenarios")

    show = commands.add_parser(
        "show", help="print the configuration of a builtin scenario"
    )
    show.add_argument("name")
    return parser


def load_scenario(source: str) -> Scenario:
    """A builtin name or a path to a JSON file."""
    if source in builtin_names():
        return load_builtin(source)
    path = Path(source)
    if not path.is_file():
        raise SchemaError(
            f"'{source}' is neither a file nor a builtin scenario", path="scenario"
        )
    return parse_scenario(path.read_text(encoding="utf-8"))


def effective_settings(scenario: Scenario, args: argparse.Namespace) -> Settings:
    """Flags over scenario tolerances over environment over defaults."""
    overrides = scenario.tolerances.model_dump(exclude_none=True)
    if scenario.horizon is not None:
        overrides["horizon"] = scenario.horizon
    flags = {"rtol": args.rtol, "atol": args.atol, "out_dir": args.out}
    overrides.update({key: value for key, value in flags.items() if value is not None})
    return get_settings(**overrides)


def run_one(scenario: Scenario, args: argparse.Namespace) -> RunReport:
    if args.horizon is not None:
        scenario = scenario.model_copy(update={"horizon": args.horizon})
    settings = effective_settings(scenario, args)
    for key, value in settings.model_dump().items():
        logger.info(f"{key}: {value}")
    return run_scenario(scenario, settings, settings.out_dir)


def _summary(report: RunReport) -> str:
    lines = [f"{report.scenario}: {'PASS' if report.passed else 'FAIL'}"]
    for index, seed in enumerate(report.seeds):
        if seed.error:
            lines.append(f"  FAIL  seed {index}: {seed.error}")
    for check in report.checks:
        status = "pass" if check.passed else "FAIL"
        lines.append(f"  {status:4}  {check.name}")
        if check.error:
            lines.append(f"        {check.error}")
    return "\n".join(lines)


def _run(args: argparse.Namespace) -> int:
    if args.all_builtins == (args.scenario is not None):
        raise SchemaError("give either a scenario or --all-builtins", path="scenario")
    if args.all_builtins:
        scenarios = [load_builtin(name) for name in builtin_names()]
    else:
        scenarios = [load_scenario(args.scenario)]
    passed = True
    for scenario in scenarios:
        report = run_one(scenario, args)
        print(_summary(report))
        passed = passed and report.passed
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        logging.basicConfig(level=get_settings().log_level.upper())
        if args.command == "list-builtins":
            for name, reference in catalog():
                print(f"{name}\t{reference}")
            return EXIT_OK
        if args.command == "show":
            print(json.dumps(builtin_config(args.name), indent=2))
            return EXIT_OK
        return _run(args)
    except SchemaError as e:
        logger.error(f"invalid scenario: {e}")
        return EXIT_SCHEMA_ERROR


if __name__ == "__main__":
    sys.exit(main())
