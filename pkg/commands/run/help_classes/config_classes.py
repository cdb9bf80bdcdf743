import copy
import re
from configparser import ConfigParser
from configparser import Error as ConfigParserError
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Type, TypeVar

from shared.actors.verifier import DelegationMode, KeySource
from shared.constants import DEFAULT_KDF_ITERATIONS
from shared.errors import ConfigError, protocol_error_names
from shared.knowledge.terms import Term, parse_term
from shared.messages.types import Capability
from shared.network.adversary import AdversaryScript, StealCard, StealDevice

SCENARIO_SECTION = "scenario"
ADVERSARY_SECTION = "adversary"
EMS_NAME = "ems"
SM_NAME = "sm"
RESERVED_NAMES = {EMS_NAME, SM_NAME}

SECRET_KINDS = ["APARAM", "NONCE_S", "RND_S", "CHALLENGER_NONCE", "SESSION_KEY"]
MAX_SEED = 2**64 - 1
NAME_PATTERN = re.compile(r"^[A-Za-z0-9_.-]+$")

EnumType = TypeVar("EnumType", bound=Enum)


class Topology(Enum):
    DIRECT = "direct"
    HIERARCHICAL = "hierarchical"


class KeyMode(Enum):
    SYMMETRIC = "symmetric"
    DH = "dh"


class DhProfile(Enum):
    TOY = "toy"
    STANDARD = "standard"


def parse_mandatory_section_argument(
    diagnostics: List[str],
    section: Dict[str, str],
    section_name: str,
    target_key: str,
) -> str:
    if not section.get(target_key):
        existing_fields = ", ".join(section.keys()) or "none"
        diagnostics.append(
            f'[{section_name}] mandatory setting "{target_key}" is not defined '
            f"(defined fields: {existing_fields})"
        )
        return ""
    return section[target_key]


def parse_enum_argument(
    diagnostics: List[str],
    section: Dict[str, str],
    section_name: str,
    target_key: str,
    enum_type: Type[EnumType],
    default: Optional[EnumType],
) -> Optional[EnumType]:
    raw_value = section.get(target_key)
    if not raw_value:
        return default
    try:
        return enum_type(raw_value.strip().lower())
    except ValueError:
        allowed = ", ".join(member.value for member in enum_type)
        diagnostics.append(
            f'[{section_name}] "{target_key}" must be one of {allowed}, got "{raw_value}"'
        )
        return default


def parse_int_argument(
    diagnostics: List[str],
    section: Dict[str, str],
    section_name: str,
    target_key: str,
    default: int,
    minimum: int,
    maximum: Optional[int] = None,
) -> int:
    raw_value = section.get(target_key)
    if not raw_value:
        return default
    try:
        value = int(raw_value)
    except ValueError:
        diagnostics.append(
            f'[{section_name}] "{target_key}" must be an integer, got "{raw_value}"'
        )
        return default
    if value < minimum or (maximum is not None and value > maximum):
        upper = f" and {maximum}" if maximum is not None else ""
        diagnostics.append(
            f'[{section_name}] "{target_key}" must lie between {minimum}{upper}, got {value}'
        )
        return default
    return value


def parse_list(raw_value: Optional[str]) -> List[str]:
    if not raw_value:
        return []
    return [entry.strip() for entry in raw_value.split(",") if entry.strip()]


class EmployeeConfig:

    id: str
    password: str

    def __init__(
        self, diagnostics: List[str], name: str, section: Dict[str, str], label: str
    ):
        self.id = name
        self.password = parse_mandatory_section_argument(
            diagnostics, section, label, "password"
        )


class MasterConfig:

    id: str
    employee: Optional[str]
    handheld: str
    delegation_mode: Optional[DelegationMode]

    def __init__(
        self, diagnostics: List[str], name: str, section: Dict[str, str], label: str
    ):
        self.id = name
        self.employee = section.get("employee")
        self.handheld = section.get("handheld") or f"hh-{name}"
        self.delegation_mode = parse_enum_argument(
            diagnostics, section, label, "delegation_mode", DelegationMode, None
        )


class SlaveConfig:

    id: str
    capability: Capability
    employee: str
    handheld: str
    master: Optional[str]

    def __init__(
        self,
        diagnostics: List[str],
        name: str,
        section: Dict[str, str],
        label: str,
        default_capability: Capability,
    ):
        self.id = name
        capability = parse_enum_argument(
            diagnostics, section, label, "capability", Capability, default_capability
        )
        assert capability is not None
        self.capability = capability
        self.employee = parse_mandatory_section_argument(
            diagnostics, section, label, "employee"
        )
        self.handheld = parse_mandatory_section_argument(
            diagnostics, section, label, "handheld"
        )
        self.master = section.get("master")


class AdversaryConfig:

    script: AdversaryScript
    knows: List[Term]
    expected_rejections: List[str]

    def __init__(
        self,
        script: Optional[AdversaryScript] = None,
        knows: Optional[List[Term]] = None,
        expected_rejections: Optional[List[str]] = None,
    ):
        self.script = script if script is not None else AdversaryScript([])
        self.knows = knows or []
        self.expected_rejections = expected_rejections or []

    @staticmethod
    def from_section(
        diagnostics: List[str], section: Dict[str, str]
    ) -> "AdversaryConfig":
        script = AdversaryScript([])
        try:
            script = AdversaryScript.parse(section.get("actions", ""))
        except ValueError as err:
            diagnostics.append(f"[{ADVERSARY_SECTION}] actions: {err}")

        knows: List[Term] = []
        for label in parse_list(section.get("knows")):
            try:
                knows.append(parse_term(label))
            except ValueError as err:
                diagnostics.append(f"[{ADVERSARY_SECTION}] knows: {err}")

        known_errors = protocol_error_names()
        expected = parse_list(section.get("expected_rejections"))
        for reason in expected:
            if reason not in known_errors:
                diagnostics.append(
                    f'[{ADVERSARY_SECTION}] expected_rejections: "{reason}" is not '
                    f"a known error, known are {', '.join(known_errors)}"
                )
        return AdversaryConfig(script, knows, expected)


class ScenarioConfig:
    """
    One scenario INI file. Every problem found is collected and raised
    together as a ConfigError once the whole file has been read.
    """

    name: str
    seed: int
    topology: Topology
    key_mode: KeyMode
    dh_profile: DhProfile
    delegation_mode: DelegationMode
    hierarchical_key_source: KeySource
    checks: List[str]
    kdf_iterations: int

    employees: Dict[str, EmployeeConfig]
    masters: Dict[str, MasterConfig]
    slaves: Dict[str, SlaveConfig]
    adversary: AdversaryConfig

    def __init__(self, config: ConfigParser, seed_override: Optional[int] = None):
        diagnostics: List[str] = []
        self.name = "scenario"
        self.employees = {}
        self.masters = {}
        self.slaves = {}

        if not config.has_section(SCENARIO_SECTION):
            raise ConfigError([f"missing [{SCENARIO_SECTION}] section"])
        scenario = dict(config[SCENARIO_SECTION].items())

        self.seed = parse_int_argument(
            diagnostics, scenario, SCENARIO_SECTION, "seed", 0, 0, MAX_SEED
        )
        if seed_override is not None:
            self.seed = seed_override
        self.topology = self._scenario_enum(
            diagnostics, scenario, "topology", Topology, Topology.DIRECT
        )
        self.key_mode = self._scenario_enum(
            diagnostics, scenario, "key_mode", KeyMode, KeyMode.SYMMETRIC
        )
        self.dh_profile = self._scenario_enum(
            diagnostics, scenario, "dh_profile", DhProfile, DhProfile.STANDARD
        )
        self.delegation_mode = self._scenario_enum(
            diagnostics,
            scenario,
            "delegation_mode",
            DelegationMode,
            DelegationMode.PUBLIC_KEY,
        )
        self.hierarchical_key_source = self._scenario_enum(
            diagnostics,
            scenario,
            "hierarchical_key_source",
            KeySource,
            KeySource.MASTER,
        )
        self.kdf_iterations = parse_int_argument(
            diagnostics,
            scenario,
            SCENARIO_SECTION,
            "kdf_iterations",
            DEFAULT_KDF_ITERATIONS,
            1,
        )
        self.checks = parse_list(scenario.get("checks")) or list(SECRET_KINDS)
        for check in self.checks:
            if check not in SECRET_KINDS:
                diagnostics.append(
                    f'[{SCENARIO_SECTION}] unknown check "{check}", '
                    f"known are {', '.join(SECRET_KINDS)}"
                )

        default_capability = (
            Capability.ASYM_CAPABLE
            if self.key_mode == KeyMode.DH
            else Capability.SYM_ONLY
        )
        self.adversary = AdversaryConfig()
        for section_name in config.sections():
            section = dict(config[section_name].items())
            if section_name == SCENARIO_SECTION:
                continue
            if section_name == ADVERSARY_SECTION:
                self.adversary = AdversaryConfig.from_section(diagnostics, section)
                continue
            self._add_principal_section(
                diagnostics, section_name, section, default_capability
            )

        diagnostics.extend(self._cross_check())
        if diagnostics:
            raise ConfigError(diagnostics)

    @staticmethod
    def from_path(path: Path, seed_override: Optional[int] = None) -> "ScenarioConfig":
        if not path.exists():
            raise ConfigError([f"scenario config {path} does not exist"])
        config = ScenarioConfig.from_text(path.read_text(), seed_override)
        config.name = path.stem
        return config

    @staticmethod
    def from_text(text: str, seed_override: Optional[int] = None) -> "ScenarioConfig":
        config = ConfigParser()
        try:
            config.read_string(text)
        except ConfigParserError as err:
            raise ConfigError([f"unreadable scenario config: {err}"])
        return ScenarioConfig(config, seed_override)

    def with_adversary(self, adversary: AdversaryConfig) -> "ScenarioConfig":
        variant = copy.copy(self)
        variant.adversary = adversary
        return variant

    def principal_names(self) -> List[str]:
        return [EMS_NAME, SM_NAME] + list(self.masters) + list(self.slaves)

    def master_of(self, slave: SlaveConfig) -> Optional[str]:
        if self.topology == Topology.DIRECT:
            return None
        return slave.master or next(iter(self.masters), None)

    def delegation_mode_of(self, master: MasterConfig) -> DelegationMode:
        return master.delegation_mode or self.delegation_mode

    def employee_of(self, master: MasterConfig) -> Optional[str]:
        return master.employee or next(iter(self.employees), None)

    def _scenario_enum(
        self,
        diagnostics: List[str],
        scenario: Dict[str, str],
        key: str,
        enum_type: Type[EnumType],
        default: EnumType,
    ) -> EnumType:
        value = parse_enum_argument(
            diagnostics, scenario, SCENARIO_SECTION, key, enum_type, default
        )
        assert value is not None
        return value

    def _add_principal_section(
        self,
        diagnostics: List[str],
        section_name: str,
        section: Dict[str, str],
        default_capability: Capability,
    ):
        words = section_name.split()
        if len(words) != 2 or words[0] not in ("employee", "master", "slave"):
            diagnostics.append(
                f'[{section_name}] unknown section, expected "employee <id>", '
                f'"master <id>" or "slave <id>"'
            )
            return
        kind, name = words
        if not NAME_PATTERN.match(name):
            diagnostics.append(
                f"[{section_name}] names may only hold letters, digits, '_', '.' and '-'"
            )
            return

        if kind == "employee":
            self.employees[name] = EmployeeConfig(
                diagnostics, name, section, section_name
            )
            return
        if name in RESERVED_NAMES or name in self.masters or name in self.slaves:
            diagnostics.append(f"[{section_name}] device name {name} is already taken")
            return
        if kind == "master":
            self.masters[name] = MasterConfig(diagnostics, name, section, section_name)
        else:
            self.slaves[name] = SlaveConfig(
                diagnostics, name, section, section_name, default_capability
            )

    def _cross_check(self) -> List[str]:
        diagnostics: List[str] = []
        if not self.employees:
            diagnostics.append("at least one [employee <id>] section is needed")
        if not self.slaves:
            diagnostics.append("at least one [slave <id>] section is needed")

        for slave in self.slaves.values():
            label = f"slave {slave.id}"
            if slave.employee and slave.employee not in self.employees:
                diagnostics.append(
                    f"[{label}] employee {slave.employee} has no [employee] section"
                )
            dh_ready = slave.capability == Capability.ASYM_CAPABLE
            if self.key_mode == KeyMode.DH and not dh_ready:
                diagnostics.append(
                    f"[{label}] key_mode dh needs capability asym_capable, "
                    f"got {slave.capability.value}"
                )
            if slave.master is not None:
                if self.topology == Topology.DIRECT:
                    diagnostics.append(
                        f"[{label}] names master {slave.master} in a direct topology"
                    )
                elif slave.master not in self.masters:
                    diagnostics.append(
                        f"[{label}] master {slave.master} has no [master] section"
                    )

        for master in self.masters.values():
            employee = self.employee_of(master)
            if employee is not None and employee not in self.employees:
                diagnostics.append(
                    f"[master {master.id}] employee {employee} has no [employee] section"
                )

        if self.topology == Topology.HIERARCHICAL and not self.masters:
            diagnostics.append(
                "topology hierarchical needs at least one [master <id>] section"
            )

        principals = self.principal_names()
        for name in self.adversary.script.referenced_names():
            if name not in principals:
                diagnostics.append(
                    f"[{ADVERSARY_SECTION}] action names unknown principal {name}"
                )
        for action in self.adversary.script.actions:
            if isinstance(action, StealCard) and action.employee not in self.employees:
                diagnostics.append(
                    f"[{ADVERSARY_SECTION}] steal_card names unknown employee "
                    f"{action.employee}"
                )
            devices = list(self.masters) + list(self.slaves)
            if isinstance(action, StealDevice) and action.slave not in devices:
                diagnostics.append(
                    f"[{ADVERSARY_SECTION}] steal_device names {action.slave}, "
                    "which is not a slave or master"
                )
        return diagnostics
