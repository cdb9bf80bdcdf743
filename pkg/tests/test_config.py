import textwrap
from pathlib import Path
from typing import Callable, List

import pytest

from commands.run.help_classes.config_classes import (
    SECRET_KINDS,
    DhProfile,
    KeyMode,
    ScenarioConfig,
    Topology,
)
from shared.actors.verifier import DelegationMode, KeySource
from shared.constants import DEFAULT_KDF_ITERATIONS
from shared.errors import ConfigError
from shared.knowledge.terms import Atom
from shared.messages.types import Capability
from shared.network.adversary import Observe, Replay
from tests.conftest import GOLDEN_CONFIG_DIR
from tests.conftest_utils.run_configs import (
    get_adversary_section,
    get_single_slave_config,
)


def diagnostics_for(text: str) -> List[str]:
    with pytest.raises(ConfigError) as err:
        ScenarioConfig.from_text(text)
    return err.value.diagnostics


def test_defaults():
    config = ScenarioConfig.from_text(
        textwrap.dedent(
            """
            [scenario]

            [employee alice]
            password = pw

            [slave s1]
            employee = alice
            handheld = hh1
            """
        )
    )

    assert config.seed == 0
    assert config.topology == Topology.DIRECT
    assert config.key_mode == KeyMode.SYMMETRIC
    assert config.dh_profile == DhProfile.STANDARD
    assert config.delegation_mode == DelegationMode.PUBLIC_KEY
    assert config.hierarchical_key_source == KeySource.MASTER
    assert config.kdf_iterations == DEFAULT_KDF_ITERATIONS
    assert config.checks == SECRET_KINDS
    assert config.slaves["s1"].capability == Capability.SYM_ONLY
    assert config.adversary.script.is_empty()


def test_from_path_names_the_scenario(write_config: Callable[[str, str], Path]):
    path = write_config("line3", get_single_slave_config("hierarchical", "dh"))
    config = ScenarioConfig.from_path(path, seed_override=77)

    assert config.name == "line3"
    assert config.seed == 77
    assert config.slaves["s1"].capability == Capability.ASYM_CAPABLE
    assert config.master_of(config.slaves["s1"]) == "m1"
    assert config.principal_names() == ["ems", "sm", "m1", "s1"]


def test_golden_configs_load():
    names = [path.stem for path in sorted(GOLDEN_CONFIG_DIR.glob("*.ini"))]
    assert "plant_floor" in names
    for path in GOLDEN_CONFIG_DIR.glob("*.ini"):
        assert ScenarioConfig.from_path(path).name == path.stem


def test_missing_file():
    with pytest.raises(ConfigError) as err:
        ScenarioConfig.from_path(Path("does/not/exist.ini"))
    assert "does not exist" in err.value.diagnostics[0]


def test_missing_scenario_section():
    diagnostics = diagnostics_for("[employee alice]\npassword = pw\n")
    assert diagnostics == ["missing [scenario] section"]


def test_unreadable_ini():
    diagnostics = diagnostics_for("this is not an ini file")
    assert diagnostics[0].startswith("unreadable scenario config")


def test_all_problems_are_reported_together():
    text = textwrap.dedent(
        """
        [scenario]
        seed = -3
        topology = ring
        key_mode = quantum
        kdf_iterations = many
        checks = APARAM, PIN

        [slave s1]
        capability = psychic
        """
    )
    diagnostics = diagnostics_for(text)
    joined = "\n".join(diagnostics)

    assert '"seed" must lie between' in joined
    assert '"topology" must be one of direct, hierarchical, got "ring"' in joined
    assert '"key_mode" must be one of' in joined
    assert '"kdf_iterations" must be an integer' in joined
    assert 'unknown check "PIN"' in joined
    assert '"capability" must be one of' in joined
    assert 'mandatory setting "employee" is not defined' in joined
    assert "at least one [employee <id>] section is needed" in joined


def test_dh_needs_asym_capable_slaves():
    text = get_single_slave_config("direct", "dh").replace(
        "capability = asym_capable", "capability = sym_only"
    )
    (diagnostic,) = diagnostics_for(text)
    assert "key_mode dh needs capability asym_capable" in diagnostic


@pytest.mark.parametrize(
    "extra,expected",
    [
        ("[master m1]\nemployee = alice\n", "master m9 has no [master] section"),
        ("", "topology hierarchical needs at least one [master <id>] section"),
    ],
)
def test_masters_are_cross_checked(extra: str, expected: str):
    text = get_single_slave_config("direct", "symmetric").replace(
        "topology = direct", "topology = hierarchical"
    )
    text = text.replace("handheld = hh1", "handheld = hh1\nmaster = m9") + extra
    assert any(expected in diagnostic for diagnostic in diagnostics_for(text))


def test_master_in_direct_topology():
    text = get_single_slave_config("direct", "symmetric").replace(
        "handheld = hh1", "handheld = hh1\nmaster = m1"
    )
    (diagnostic,) = diagnostics_for(text)
    assert "in a direct topology" in diagnostic


def test_section_names():
    text = get_single_slave_config("direct", "symmetric")
    diagnostics = diagnostics_for(
        text
        + "\n[robot r1]\n"
        + "\n[slave ems]\nemployee = alice\nhandheld = hh\n"
        + "\n[slave bad/name]\n"
    )
    joined = "\n".join(diagnostics)
    assert "[robot r1] unknown section" in joined
    assert "device name ems is already taken" in joined
    assert "names may only hold" in joined


def test_unknown_employee():
    text = get_single_slave_config("direct", "symmetric").replace(
        "employee = alice", "employee = mallory"
    )
    (diagnostic,) = diagnostics_for(text)
    assert "employee mallory has no [employee] section" in diagnostic


def test_adversary_section():
    adversary = get_adversary_section(
        ["observe", "replay event=0 to=ems at=4"],
        expected_rejections=["ReplayDetected", "WrongPhase"],
        knows=["RND_S[SLAVE:s1]", "K[s1]"],
    )
    config = ScenarioConfig.from_text(
        get_single_slave_config("direct", "symmetric", adversary=adversary)
    )
    observe, replay = config.adversary.script.actions

    assert isinstance(observe, Observe)
    assert isinstance(replay, Replay) and replay.at == 4
    assert config.adversary.expected_rejections == ["ReplayDetected", "WrongPhase"]
    assert config.adversary.knows[0] == Atom("RND_S[SLAVE:s1]")


@pytest.mark.parametrize(
    "actions,expected_rejections,knows,expected",
    [
        (["replay event=0 to=plc9"], None, None, "unknown principal plc9"),
        (["steal_card employee=mallory"], None, None, "unknown employee mallory"),
        (["steal_device slave=ems"], None, None, "not a slave or master"),
        (["fly to=ems"], None, None, "unknown adversary action 'fly'"),
        (["observe"], ["Sabotage"], None, '"Sabotage" is not a known error'),
        (["observe"], None, ["senc(a,"], "knows:"),
    ],
)
def test_adversary_diagnostics(actions, expected_rejections, knows, expected: str):
    adversary = get_adversary_section(actions, expected_rejections, knows)
    text = get_single_slave_config("direct", "symmetric", adversary=adversary)
    diagnostics = diagnostics_for(text)
    assert any(expected in diagnostic for diagnostic in diagnostics), diagnostics


def test_with_adversary_keeps_the_original():
    base = ScenarioConfig.from_text(get_single_slave_config("direct", "symmetric"))
    attacked = base.with_adversary(
        ScenarioConfig.from_text(
            get_single_slave_config(
                "direct",
                "symmetric",
                adversary=get_adversary_section(["observe"]),
            )
        ).adversary
    )
    assert base.adversary.script.is_empty()
    assert not attacked.adversary.script.is_empty()
    assert attacked.slaves is base.slaves
