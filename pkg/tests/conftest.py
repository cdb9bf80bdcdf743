import logging
from pathlib import Path
from typing import Callable

import pytest

from commands.run.help_classes.config_classes import ScenarioConfig
from commands.run.report import RunReport
from commands.run.scenario import Scenario
from shared.actors.audit import AuditTrail
from shared.actors.ems import EmsState
from shared.actors.verifier import SmState
from shared.crypto.keys import RandomSource, generate_keypair
from shared.messages.types import PrincipalId, Role
from shared.network.clock import SimClock

GOLDEN_CONFIG_DIR = Path(__file__).resolve().parent.parent / "commands" / "run" / "config"


@pytest.fixture()
def logger() -> logging.Logger:
    return logging.getLogger("trustdeploy_tests")


@pytest.fixture()
def rng() -> RandomSource:
    return RandomSource(1234)


@pytest.fixture()
def golden_config_dir() -> Path:
    return GOLDEN_CONFIG_DIR


@pytest.fixture()
def write_config(tmp_path: Path) -> Callable[[str, str], Path]:
    def write(name: str, text: str) -> Path:
        config_path = tmp_path / f"{name}.ini"
        config_path.write_text(text)
        return config_path

    return write


@pytest.fixture()
def run_text(logger: logging.Logger) -> Callable[[str], Scenario]:
    """Runs a scenario given as INI text and hands back the finished Scenario"""

    def run(text: str) -> Scenario:
        scenario = Scenario(logger, ScenarioConfig.from_text(text))
        scenario.run()
        return scenario

    return run


@pytest.fixture()
def report_for(logger: logging.Logger) -> Callable[[str], RunReport]:
    def report(text: str) -> RunReport:
        return Scenario(logger, ScenarioConfig.from_text(text)).run()

    return report


class Backend:
    """EMS and SM wired up by hand, for driving the actors without a bus"""

    def __init__(self, rng: RandomSource):
        self.clock = SimClock()
        self.audit = AuditTrail(self.clock)
        self.ems_id = PrincipalId(Role.EMS, "ems")
        self.sm_id = PrincipalId(Role.SM, "sm")
        self.ems_keys = generate_keypair(self.ems_id, rng)
        self.sm_keys = generate_keypair(self.sm_id, rng)
        self.ems = EmsState(
            self.ems_id, self.ems_keys, self.sm_keys.public, self.audit, 1000
        )
        self.sm = SmState(
            self.sm_id, self.sm_keys, self.ems_id, self.ems_keys.public, self.audit
        )


@pytest.fixture()
def backend(rng: RandomSource) -> Backend:
    return Backend(rng)
