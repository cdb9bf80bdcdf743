import json
from enum import Enum
from typing import Dict, List, Optional

from shared.knowledge.closure import SecrecyResult
from shared.util import prettify_rows

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_BLOCKED = 2


class ReportFormat(Enum):
    TEXT = "text"
    STRUCTURED = "structured"


class RejectionOrigin(Enum):
    # adversary action, or a packet it injected, replayed or caused
    ATTACK = "attack"
    # honest packet for a session an earlier rejection already ended
    FALLOUT = "fallout"
    HONEST = "honest"


class Rejection:
    """A protocol error raised while handling a delivery or an adversary action"""

    def __init__(
        self,
        tick: int,
        principal: str,
        kind: str,
        reason: str,
        detail: str,
        origin: RejectionOrigin = RejectionOrigin.HONEST,
    ):
        self.tick = tick
        self.principal = principal
        self.kind = kind
        self.reason = reason
        self.detail = detail
        self.origin = origin

    def to_dict(self) -> Dict[str, object]:
        return {
            "tick": self.tick,
            "principal": self.principal,
            "kind": self.kind,
            "reason": self.reason,
            "detail": self.detail,
            "origin": self.origin.value,
        }


class RunReport:
    def __init__(
        self,
        name: str,
        seed: int,
        topology: str,
        key_mode: str,
        outcomes: Dict[str, str],
        wire_message_count: int,
        wire_bytes: int,
        secrecy: List[SecrecyResult],
        audit_summary: Dict[str, int],
        accountability: List[str],
        key_agreement: Dict[str, bool],
        rejections: List[Rejection],
        expected_rejections: List[str],
        transcript_digest: str,
        bootstrap_digest: str,
        accepted_attacks: Optional[List[str]] = None,
    ):
        self.name = name
        self.seed = seed
        self.topology = topology
        self.key_mode = key_mode
        self.outcomes = outcomes
        self.wire_message_count = wire_message_count
        self.wire_bytes = wire_bytes
        self.secrecy = secrecy
        self.audit_summary = audit_summary
        self.accountability = accountability
        self.key_agreement = key_agreement
        self.rejections = rejections
        self.expected_rejections = expected_rejections
        self.transcript_digest = transcript_digest
        self.bootstrap_digest = bootstrap_digest
        # adversary actions or packets that went through without a rejection
        self.accepted_attacks = accepted_attacks or []

    def all_keyed(self) -> bool:
        return all(outcome == "KEYED" for outcome in self.outcomes.values())

    def secrecy_holds(self) -> bool:
        return not any(result.derivable for result in self.secrecy)

    def leaked(self) -> List[str]:
        return [result.secret.label for result in self.secrecy if result.derivable]

    def observed_rejections(self) -> List[str]:
        return sorted({rejection.reason for rejection in self.rejections})

    def attack_rejections(self) -> List[Rejection]:
        return [r for r in self.rejections if r.origin == RejectionOrigin.ATTACK]

    def blocked(self) -> List[str]:
        """Expected rejections that did happen"""
        observed = {rejection.reason for rejection in self.attack_rejections()}
        return [reason for reason in self.expected_rejections if reason in observed]

    def unexpected_rejections(self) -> List[Rejection]:
        """Attacks refused for another reason, and honest traffic refused at all"""
        return [
            rejection
            for rejection in self.rejections
            if rejection.origin == RejectionOrigin.HONEST
            or (
                rejection.origin == RejectionOrigin.ATTACK
                and rejection.reason not in self.expected_rejections
            )
        ]

    @property
    def exit_code(self) -> int:
        if self.expected_rejections:
            every_attack_refused = (
                not self.accepted_attacks and not self.unexpected_rejections()
            )
            if self.blocked() and every_attack_refused and self.secrecy_holds():
                return EXIT_BLOCKED
            return EXIT_UNEXPECTED
        consistent = (
            all(self.key_agreement.values())
            and len(self.key_agreement) == len(self.outcomes)
            and not self.accountability
        )
        if self.all_keyed() and self.secrecy_holds() and consistent:
            return EXIT_OK
        return EXIT_UNEXPECTED

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "seed": self.seed,
            "topology": self.topology,
            "key_mode": self.key_mode,
            "outcomes": self.outcomes,
            "wire_message_count": self.wire_message_count,
            "wire_bytes": self.wire_bytes,
            "secrecy": [result.to_dict() for result in self.secrecy],
            "audit_summary": self.audit_summary,
            "accountability_violations": self.accountability,
            "key_agreement": self.key_agreement,
            "rejections": [rejection.to_dict() for rejection in self.rejections],
            "expected_rejections": self.expected_rejections,
            "accepted_attacks": self.accepted_attacks,
            "transcript_digest": self.transcript_digest,
            "bootstrap_digest": self.bootstrap_digest,
            "exit_code": self.exit_code,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text_lines(self) -> List[str]:
        lines = [
            f"Scenario: {self.name} (seed {self.seed})",
            f"Topology: {self.topology}, keys: {self.key_mode}",
            f"Wire messages: {self.wire_message_count} ({self.wire_bytes} bytes)",
            f"Transcript digest: {self.transcript_digest}",
            "",
        ]

        outcome_rows: List[List[object]] = [["slave", "outcome", "keys agree"]]
        for slave, outcome in self.outcomes.items():
            agree = self.key_agreement.get(slave)
            outcome_rows.append([slave, outcome, "-" if agree is None else agree])
        lines.extend(prettify_rows(outcome_rows))
        lines.append("")

        secrecy_rows: List[List[object]] = [["secret", "derivable"]]
        for result in self.secrecy:
            secrecy_rows.append([result.secret.label, result.derivable])
        lines.extend(prettify_rows(secrecy_rows))
        for result in self.secrecy:
            if result.path:
                lines.append(f"Derivation of {result.secret.label}:")
                lines.extend(f"    {step}" for step in result.path)
        lines.append("")

        audit_rows: List[List[object]] = [["audit step", "count"]]
        audit_rows.extend([step, count] for step, count in self.audit_summary.items())
        lines.extend(prettify_rows(audit_rows))
        lines.extend(f"Accountability: {v}" for v in self.accountability)

        if self.rejections:
            lines.append("")
            rejection_rows: List[List[object]] = [
                ["tick", "principal", "kind", "reason", "origin"]
            ]
            rejection_rows.extend(
                [rej.tick, rej.principal, rej.kind, rej.reason, rej.origin.value]
                for rej in self.rejections
            )
            lines.extend(prettify_rows(rejection_rows))
        lines.extend(f"Accepted attack: {attack}" for attack in self.accepted_attacks)
        if self.expected_rejections:
            lines.append(
                f"Expected rejections: {', '.join(self.expected_rejections)}, "
                f"observed: {', '.join(self.blocked()) or 'none'}"
            )
        lines.append(f"Exit code: {self.exit_code}")
        return lines

    def render(self, report_format: ReportFormat) -> str:
        if report_format == ReportFormat.STRUCTURED:
            return self.to_json()
        return "\n".join(self.to_text_lines())
