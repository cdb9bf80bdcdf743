import argparse
import logging
import sys
from logging import Logger
from pathlib import Path
from typing import List, Optional

from commands.run.help_classes.config_classes import (
    EMS_NAME,
    AdversaryConfig,
    ScenarioConfig,
)
from commands.run.main import (
    DEFAULT_OUT_BASE,
    add_common_arguments,
    load_config,
    run_scenario,
)
from commands.run.report import (
    EXIT_BLOCKED,
    EXIT_UNEXPECTED,
    ReportFormat,
    RunReport,
)
from commands.run.scenario import Scenario
from shared.errors import (
    AuthFail,
    MalformedPacket,
    ReplayDetected,
    TamperProofSealed,
    WrongNetwork,
    WrongPassword,
    WrongPhase,
)
from shared.messages.packets import Challenge
from shared.network.adversary import (
    Action,
    AdversaryScript,
    Inject,
    Observe,
    Replay,
    StealCard,
    StealDevice,
)
from shared.network.bus import BusEvent
from shared.util import prettify_rows

description = """
Runs the canonical attack batteries against one scenario config. Each
battery replaces the config's adversary and must end with the attack
rejected by the expected error. Exit code is 2 when every battery was
blocked, 1 otherwise.
"""

logger = logging.getLogger(__name__)

INJECTION_SIZE = 64
FORGED_BODY_SIZE = 96
FORGERY_REJECTIONS = [MalformedPacket.__name__, AuthFail.__name__]


class Battery:
    def __init__(self, name: str, actions: List[Action], expected: List[str]):
        self.name = name
        self.actions = actions
        self.expected = expected

    def config_for(self, base: ScenarioConfig) -> ScenarioConfig:
        adversary = AdversaryConfig(
            AdversaryScript([Observe()] + self.actions),
            list(base.adversary.knows),
            self.expected,
        )
        variant = base.with_adversary(adversary)
        variant.name = f"{base.name}.{self.name}"
        return variant


def main(
    config: ScenarioConfig,
    out_dir: Path,
    report_format: ReportFormat,
    verbose: bool,
):
    if verbose:
        logger.setLevel(logging.DEBUG)
    reports = replay_attack_suite(logger, config, out_dir, report_format)

    rows: List[List[object]] = [["battery", "expected", "observed", "exit code"]]
    for report in reports:
        rows.append(
            [
                report.name,
                ", ".join(report.expected_rejections),
                ", ".join(report.observed_rejections()) or "none",
                report.exit_code,
            ]
        )
    print("\n".join(prettify_rows(rows)))
    sys.exit(suite_exit_code(reports))


def suite_exit_code(reports: List[RunReport]) -> int:
    if reports and all(report.exit_code == EXIT_BLOCKED for report in reports):
        return EXIT_BLOCKED
    return EXIT_UNEXPECTED


def first_event(transcript: List[BusEvent], kind: str) -> Optional[BusEvent]:
    return next((event for event in transcript if event.kind == kind), None)


def hop_injections(transcript: List[BusEvent]) -> List[Battery]:
    """
    One battery per packet kind of the honest run. The forgery claims the
    honest sender and fires at the tick of the event before that hop, so
    past the first hop it is queued ahead of the honest packet and meets
    its receiver waiting for it.
    """
    batteries: List[Battery] = []
    seen: List[str] = []
    for position, hop in enumerate(transcript):
        if hop.kind in seen:
            continue
        seen.append(hop.kind)
        at = transcript[position - 1].tick if position > 0 else hop.tick
        forgery = Inject(
            hop.receiver.name,
            random_size=FORGED_BODY_SIZE,
            as_kind=hop.kind,
            sender=hop.sender.name,
            at=at,
        )
        expected = FORGERY_REJECTIONS
        if hop.kind == Challenge.__name__:
            expected = [WrongNetwork.__name__]
        batteries.append(Battery(f"injection_{hop.kind}", [forgery], expected))
    return batteries


def build_batteries(
    logger: Logger, config: ScenarioConfig, transcript: List[BusEvent]
) -> List[Battery]:
    batteries: List[Battery] = []

    pjoin = first_event(transcript, "PJoin")
    if pjoin is not None:
        batteries.append(
            Battery(
                "pjoin_replay",
                [Replay(pjoin.index, EMS_NAME)],
                [ReplayDetected.__name__],
            )
        )
    else:
        logger.error("Honest run sent no PJoin, skipping the PJoin replay battery")

    challenge = first_event(transcript, "Challenge")
    if challenge is not None:
        batteries.append(
            Battery(
                "challenge_replay",
                [Replay(challenge.index, challenge.receiver.name)],
                [WrongPhase.__name__],
            )
        )
    else:
        logger.error(
            "Honest run sent no Challenge, skipping the Challenge replay battery"
        )

    batteries.extend(hop_injections(transcript))

    receivers: List[str] = []
    for event in transcript:
        if event.receiver.name not in receivers:
            receivers.append(event.receiver.name)
    garbage: List[Action] = [
        Inject(receiver, random_size=INJECTION_SIZE) for receiver in receivers
    ]
    batteries.append(Battery("injection_garbage", garbage, FORGERY_REJECTIONS))

    slave = next(iter(config.slaves.values()))
    password = config.employees[slave.employee].password
    batteries.append(
        Battery(
            "stolen_card",
            [StealCard(slave.employee, guess=password + "!")],
            [WrongPassword.__name__],
        )
    )
    batteries.append(
        Battery(
            "stolen_device", [StealDevice(slave.id)], [TamperProofSealed.__name__]
        )
    )
    return batteries


def replay_attack_suite(
    logger: Logger,
    config: ScenarioConfig,
    out_dir: Optional[Path] = None,
    report_format: ReportFormat = ReportFormat.TEXT,
) -> List[RunReport]:
    """
    One honest dry run locates the packets to replay and the hops to forge,
    then every battery runs as its own scenario with the same seed.
    """
    honest = config.with_adversary(AdversaryConfig(knows=config.adversary.knows))
    dry_run = Scenario(logger, honest)
    dry_run.run()

    reports: List[RunReport] = []
    for battery in build_batteries(logger, config, dry_run.bus.transcript):
        logger.info(f"Battery {battery.name}, expecting {', '.join(battery.expected)}")
        battery_out = out_dir / battery.name if out_dir is not None else None
        report = run_scenario(
            logger, battery.config_for(config), battery_out, report_format
        )
        if report.exit_code != EXIT_BLOCKED:
            logger.error(
                f"Battery {battery.name} was not blocked as expected, "
                f"observed: {', '.join(report.observed_rejections()) or 'none'}"
            )
        reports.append(report)
    return reports


def main_wrapper(args: argparse.Namespace):
    if args.silent:
        logger.setLevel(logging.WARNING)

    config_path = Path(args.config)
    config = load_config(config_path, args.seed)
    out_dir = (
        Path(args.out)
        if args.out is not None
        else DEFAULT_OUT_BASE / f"{config.name}.attacks"
    )

    main(config, out_dir, ReportFormat(args.format), args.verbose)


def add_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "config",
        help="Scenario config in INI format, its [adversary] section is ignored",
    )
    add_common_arguments(parser)


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    add_arguments(parser)
    args = parser.parse_args()
    main_wrapper(args)
