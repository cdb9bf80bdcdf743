#!/usr/bin/env python3

import argparse
import logging
import sys
from logging import Logger
from pathlib import Path
from typing import Optional

from commands.run.file_helpers import write_artifacts
from commands.run.help_classes.config_classes import ScenarioConfig
from commands.run.report import ReportFormat, RunReport
from commands.run.scenario import Scenario
from shared.errors import ConfigError

description = """
Runs one deployment scenario in the simulator.

The steps it performs:

1. Read the scenario config and register employees with the EMS
2. Enroll the masters, then commission and join every slave
3. Let the scripted adversary act on the bus
4. Check secrecy on the transcript and write transcript, audit and report

Exit code is 0 when every slave is keyed and nothing leaked, 2 when an
expected attack was blocked and 1 otherwise.
"""

logger = logging.getLogger(__name__)

DEFAULT_OUT_BASE = Path("out")


def main(
    config: ScenarioConfig,
    out_dir: Path,
    report_format: ReportFormat,
    verbose: bool,
):
    if verbose:
        logger.setLevel(logging.DEBUG)
    report = run_scenario(logger, config, out_dir, report_format)
    print(report.render(report_format))
    sys.exit(report.exit_code)


def run_scenario(
    logger: Logger,
    config: ScenarioConfig,
    out_dir: Optional[Path] = None,
    report_format: ReportFormat = ReportFormat.TEXT,
) -> RunReport:
    scenario = Scenario(logger, config)
    report = scenario.run()
    if out_dir is not None:
        write_artifacts(logger, scenario, report, out_dir, report_format)

    for slave, outcome in report.outcomes.items():
        logger.info(f"{slave}: {outcome}")
    if report.leaked():
        logger.warning(f"Derivable by the adversary: {', '.join(report.leaked())}")
    return report


def load_config(config_path: Path, seed: Optional[int]) -> ScenarioConfig:
    try:
        return ScenarioConfig.from_path(config_path, seed)
    except ConfigError as err:
        for diagnostic in err.diagnostics:
            logger.error(diagnostic)
        logger.error(f"{config_path}: {len(err.diagnostics)} problem(s), exiting")
        sys.exit(1)


def parse_seed(raw: str) -> int:
    try:
        seed = int(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got '{raw}'")
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {seed}")
    return seed


def main_wrapper(args: argparse.Namespace):
    if args.silent:
        logger.setLevel(logging.WARNING)

    config_path = Path(args.config)
    config = load_config(config_path, args.seed)
    out_dir = Path(args.out) if args.out is not None else DEFAULT_OUT_BASE / config.name

    main(config, out_dir, ReportFormat(args.format), args.verbose)


def add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--seed",
        type=parse_seed,
        help="Overrides the seed of the scenario config (unsigned 64-bit)",
    )
    parser.add_argument(
        "--out",
        help=f"Artifact directory. Defaults to {DEFAULT_OUT_BASE}/<config name>",
    )
    parser.add_argument(
        "--format",
        choices=[member.value for member in ReportFormat],
        default=ReportFormat.TEXT.value,
        help="Report format, structured is JSON",
    )
    parser.add_argument(
        "--verbose", action="store_true", help="Print every bus event"
    )
    parser.add_argument(
        "--silent", action="store_true", help="Run silently, produce only output files"
    )


def add_arguments(parser: argparse.ArgumentParser):
    default_configs = sorted(
        path.name for path in (Path(__file__).resolve().parent / "config").glob("*.ini")
    )
    parser.add_argument(
        "config",
        help=f"Scenario config in INI format. Examples in commands/run/config: {', '.join(default_configs)}",
    )
    add_common_arguments(parser)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    add_arguments(parser)
    args = parser.parse_args()
    main_wrapper(args)
