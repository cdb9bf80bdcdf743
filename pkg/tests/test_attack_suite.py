import logging
from pathlib import Path
from typing import List

import pytest

from commands.attack_suite.main import (
    FORGED_BODY_SIZE,
    build_batteries,
    main,
    replay_attack_suite,
    suite_exit_code,
)
from commands.run.help_classes.config_classes import ScenarioConfig
from commands.run.report import (
    EXIT_BLOCKED,
    EXIT_UNEXPECTED,
    RejectionOrigin,
    ReportFormat,
)
from commands.run.scenario import Scenario
from shared.network.adversary import Inject, Observe, Replay
from shared.network.bus import Disposition
from tests.conftest import GOLDEN_CONFIG_DIR
from tests.conftest_utils.run_configs import get_single_slave_config

HIERARCHICAL_DH_BATTERIES = [
    "pjoin_replay",
    "challenge_replay",
    "injection_PJoin",
    "injection_PJoinFwd",
    "injection_PAuthDev",
    "injection_Delegation",
    "injection_Challenge",
    "injection_ChallengeResponse",
    "injection_PDh1",
    "injection_PDh2",
    "injection_PDh3",
    "injection_garbage",
    "stolen_card",
    "stolen_device",
]
# forgeries of these kinds end the slave's session, the rest leave it to finish
SESSION_ENDING_HOPS = [
    "Challenge",
    "ChallengeResponse",
    "KeyDelivery",
    "PDh1",
    "PDh2",
    "PDh3",
]


def battery_names(logger: logging.Logger, config: ScenarioConfig) -> List[str]:
    honest = Scenario(logger, config)
    honest.run()
    kinds: List[str] = []
    for event in honest.bus.transcript:
        if event.kind not in kinds:
            kinds.append(event.kind)
    return (
        ["pjoin_replay", "challenge_replay"]
        + [f"injection_{kind}" for kind in kinds]
        + ["injection_garbage", "stolen_card", "stolen_device"]
    )


def test_batteries_follow_the_honest_run(logger: logging.Logger):
    config = ScenarioConfig.from_text(get_single_slave_config("hierarchical", "dh"))
    honest = Scenario(logger, config)
    honest.run()
    transcript = honest.bus.transcript
    batteries = build_batteries(logger, config, transcript)

    assert [battery.name for battery in batteries] == HIERARCHICAL_DH_BATTERIES
    pjoin_replay = batteries[0].actions[0]
    assert isinstance(pjoin_replay, Replay)
    assert transcript[pjoin_replay.event].kind == "PJoin"
    assert pjoin_replay.receiver == "ems"

    challenge_replay = batteries[1].actions[0]
    assert isinstance(challenge_replay, Replay)
    assert challenge_replay.receiver == "s1"

    garbage = batteries[11].actions
    assert all(isinstance(action, Inject) for action in garbage)
    assert {action.receiver for action in garbage} == {"ems", "sm", "m1", "s1"}
    assert all(action.as_kind is None and action.at is None for action in garbage)

    variant = batteries[12].config_for(config)
    assert variant.name == "scenario.stolen_card"
    assert isinstance(variant.adversary.script.actions[0], Observe)
    assert config.adversary.script.is_empty()


def test_hop_forgeries_are_timed_ahead_of_the_honest_packet(logger: logging.Logger):
    config = ScenarioConfig.from_text(get_single_slave_config("hierarchical", "dh"))
    honest = Scenario(logger, config)
    honest.run()
    transcript = honest.bus.transcript
    batteries = build_batteries(logger, config, transcript)

    for battery in batteries[2:11]:
        (forgery,) = battery.actions
        assert isinstance(forgery, Inject)
        hop = next(ev for ev in transcript if f"injection_{ev.kind}" == battery.name)
        assert forgery.as_kind == hop.kind
        assert forgery.receiver == hop.receiver.name
        assert forgery.sender == hop.sender.name
        assert forgery.random_size == FORGED_BODY_SIZE
        assert forgery.at is not None and forgery.at <= hop.tick
        if hop.index > 0:
            assert forgery.at < hop.tick

    expected = {battery.name: battery.expected for battery in batteries}
    assert expected["injection_Challenge"] == ["WrongNetwork"]
    assert expected["injection_PDh2"] == ["MalformedPacket", "AuthFail"]


def test_forged_challenge_meets_a_waiting_slave(logger: logging.Logger):
    config = ScenarioConfig.from_text(get_single_slave_config("direct", "symmetric"))
    honest = Scenario(logger, config)
    honest.run()
    batteries = build_batteries(logger, config, honest.bus.transcript)
    (battery,) = [b for b in batteries if b.name == "injection_Challenge"]

    scenario = Scenario(logger, battery.config_for(config))
    report = scenario.run()

    challenges = [ev for ev in scenario.bus.transcript if ev.kind == "Challenge"]
    forged, genuine = challenges
    assert forged.disposition == Disposition.INJECTED
    assert genuine.disposition == Disposition.DELIVERED
    assert forged.index < genuine.index

    assert report.outcomes == {"SLAVE:s1": "REJECTED(WrongNetwork)"}
    first, second = report.rejections
    assert (first.reason, first.origin) == ("WrongNetwork", RejectionOrigin.ATTACK)
    assert second.origin == RejectionOrigin.FALLOUT
    assert report.accepted_attacks == []
    assert report.exit_code == EXIT_BLOCKED


@pytest.mark.parametrize(
    "config_name",
    ["direct_symmetric", "hierarchical_symmetric", "hierarchical_dh"],
)
def test_every_battery_is_blocked(logger: logging.Logger, config_name: str):
    config = ScenarioConfig.from_path(GOLDEN_CONFIG_DIR / f"{config_name}.ini")
    reports = replay_attack_suite(logger, config)

    assert [report.name for report in reports] == [
        f"{config_name}.{battery}" for battery in battery_names(logger, config)
    ]
    for report in reports:
        assert report.exit_code == EXIT_BLOCKED, "\n".join(report.to_text_lines())
        assert report.accepted_attacks == []
        assert report.attack_rejections()
        assert all(r.origin != RejectionOrigin.HONEST for r in report.rejections)
        hop = report.name.rsplit(".injection_", 1)[-1]
        if hop in SESSION_ENDING_HOPS:
            assert report.outcomes["SLAVE:s1"].startswith("REJECTED(")
        else:
            assert report.all_keyed(), report.name
    assert suite_exit_code(reports) == EXIT_BLOCKED


def test_suite_exit_code_needs_every_battery(logger: logging.Logger):
    config = ScenarioConfig.from_text(get_single_slave_config("direct", "symmetric"))
    reports = replay_attack_suite(logger, config)
    assert suite_exit_code(reports) == EXIT_BLOCKED

    reports[0].expected_rejections = ["DuplicateEmployee"]
    assert suite_exit_code(reports) == EXIT_UNEXPECTED
    assert suite_exit_code([]) == EXIT_UNEXPECTED


def test_main_writes_one_directory_per_battery(
    logger: logging.Logger, tmp_path: Path, capsys: pytest.CaptureFixture
):
    config = ScenarioConfig.from_text(get_single_slave_config("direct", "symmetric"))
    expected = battery_names(logger, config)
    with pytest.raises(SystemExit) as exit_info:
        main(config, tmp_path, ReportFormat.TEXT, verbose=False)

    assert exit_info.value.code == EXIT_BLOCKED
    assert sorted(path.name for path in tmp_path.iterdir()) == sorted(expected)
    assert "injection_KeyDelivery" in expected
    assert (tmp_path / "stolen_card" / "report.txt").exists()
    printed = capsys.readouterr().out
    assert "scenario.injection_garbage" in printed
