import json
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

from shared.messages.types import PrincipalId
from shared.network.clock import SimClock


class AuditStep(Enum):
    PROVISIONED = "PROVISIONED"
    AUTHENTICATED = "AUTHENTICATED"
    VERIFIED = "VERIFIED"
    KEY_ISSUED = "KEY_ISSUED"
    REJECTED = "REJECTED"


class AuditRecord:
    """
    One accountability row. slave/employee/handheld are None only for
    REJECTED rows where the packet could not be opened far enough to tell.
    """

    def __init__(
        self,
        slave_id: Optional[PrincipalId],
        employee_id: Optional[PrincipalId],
        handheld_id: Optional[PrincipalId],
        step: AuditStep,
        detail: str,
        tick: int,
    ):
        self.slave_id = slave_id
        self.employee_id = employee_id
        self.handheld_id = handheld_id
        self.step = step
        self.detail = detail
        self.tick = tick

    def to_dict(self) -> Dict[str, object]:
        return {
            "slave_id": str(self.slave_id) if self.slave_id else None,
            "employee_id": str(self.employee_id) if self.employee_id else None,
            "handheld_id": str(self.handheld_id) if self.handheld_id else None,
            "step": self.step.value,
            "detail": self.detail,
            "tick": self.tick,
        }

    def __str__(self) -> str:
        return f"[{self.tick}] {self.step.value} {self.slave_id} ({self.detail})"


class AuditTrail:
    """Append-only. Records are never edited or removed."""

    def __init__(self, clock: SimClock):
        self.clock = clock
        self._records: List[AuditRecord] = []

    @property
    def records(self) -> List[AuditRecord]:
        return list(self._records)

    def record(
        self,
        slave_id: Optional[PrincipalId],
        employee_id: Optional[PrincipalId],
        handheld_id: Optional[PrincipalId],
        step: AuditStep,
        detail: str,
    ) -> AuditRecord:
        entry = AuditRecord(
            slave_id, employee_id, handheld_id, step, detail, self.clock.now
        )
        self._records.append(entry)
        return entry

    def for_slave(self, slave_id: PrincipalId) -> List[AuditRecord]:
        return [rec for rec in self._records if rec.slave_id == slave_id]

    def count(self, step: AuditStep) -> int:
        return len([rec for rec in self._records if rec.step == step])

    def accountability_violations(
        self, registered_employees: List[PrincipalId]
    ) -> List[str]:
        """
        Every KEY_ISSUED row needs earlier AUTHENTICATED and VERIFIED rows and a
        PROVISIONED row naming a registered employee, all for the same slave.
        """
        violations: List[str] = []
        for i, rec in enumerate(self._records):
            if rec.step != AuditStep.KEY_ISSUED:
                continue
            earlier = [
                prev for prev in self._records[:i] if prev.slave_id == rec.slave_id
            ]
            earlier_steps = {prev.step for prev in earlier}
            for needed in (AuditStep.AUTHENTICATED, AuditStep.VERIFIED):
                if needed not in earlier_steps:
                    violations.append(
                        f"{rec.slave_id}: KEY_ISSUED at tick {rec.tick} "
                        f"without {needed.value}"
                    )
            provisioned = [
                prev
                for prev in earlier
                if prev.step == AuditStep.PROVISIONED
                and prev.employee_id in registered_employees
            ]
            if not provisioned:
                violations.append(
                    f"{rec.slave_id}: KEY_ISSUED at tick {rec.tick} "
                    "not traceable to a registered employee"
                )
            elif rec.employee_id != provisioned[-1].employee_id:
                violations.append(
                    f"{rec.slave_id}: KEY_ISSUED names {rec.employee_id}, "
                    f"provisioned by {provisioned[-1].employee_id}"
                )
        return violations

    def to_lines(self) -> List[str]:
        return [json.dumps(rec.to_dict()) for rec in self._records]

    def write(self, out_path: Path):
        with open(out_path, "w") as out_fh:
            for line in self.to_lines():
                print(line, file=out_fh)
