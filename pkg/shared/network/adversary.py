"""
Scripted Dolev-Yao adversary.

Scripts are one action per line, a verb followed by key=value pairs:

    observe
    drop kind=PJoin to=ems count=1
    replay event=0 to=ems at=6
    inject to=ems as=PJoin random=96 from=s1
    inject to=sm bytes=deadbeef
    steal_card employee=alice guess=hunter2
    steal_device slave=s1

Principals are referred to by name. `at` is the bus tick at or after which
the action fires; actions without it fire once honest traffic has died down.
"""

from typing import Dict, List, Optional

from shared.constants import AEAD_NONCE_SIZE, AEAD_TAG_SIZE, SYM_KEY_SIZE
from shared.crypto.envelope import X25519_SIZE, Envelope
from shared.crypto.keys import RandomSource
from shared.messages.packets import (
    PACKET_TYPES_BY_TAG,
    CiphertextPacket,
    EnvelopePacket,
    PDh2,
    encode,
)
from shared.messages.types import PrincipalId
from shared.network.clock import SimClock

PACKET_TYPES_BY_NAME = {
    packet_type.__name__: packet_type for packet_type in PACKET_TYPES_BY_TAG.values()
}
PACKET_KINDS = set(PACKET_TYPES_BY_NAME)
WRAPPED_KEY_SIZE = X25519_SIZE + AEAD_NONCE_SIZE + SYM_KEY_SIZE + AEAD_TAG_SIZE


class Action:
    VERB = ""
    ALLOWED_KEYS: List[str] = []

    def __init__(self, at: Optional[int] = None):
        self.at = at

    def describe(self) -> str:
        return self.VERB


class Observe(Action):
    VERB = "observe"


class Drop(Action):
    VERB = "drop"
    ALLOWED_KEYS = ["kind", "from", "to", "count"]

    def __init__(
        self,
        kind: Optional[str] = None,
        sender: Optional[str] = None,
        receiver: Optional[str] = None,
        count: Optional[int] = None,
        at: Optional[int] = None,
    ):
        Action.__init__(self, at)
        self.kind = kind
        self.sender = sender
        self.receiver = receiver
        self.remaining = count

    def matches(self, kind: str, sender: str, receiver: str) -> bool:
        if self.remaining is not None and self.remaining <= 0:
            return False
        return (
            (self.kind is None or self.kind == kind)
            and (self.sender is None or self.sender == sender)
            and (self.receiver is None or self.receiver == receiver)
        )

    def describe(self) -> str:
        return f"drop kind={self.kind} from={self.sender} to={self.receiver}"


class Replay(Action):
    VERB = "replay"
    ALLOWED_KEYS = ["event", "to"]

    def __init__(self, event: int, receiver: str, at: Optional[int] = None):
        Action.__init__(self, at)
        self.event = event
        self.receiver = receiver

    def describe(self) -> str:
        return f"replay event={self.event} to={self.receiver}"


class Inject(Action):
    VERB = "inject"
    ALLOWED_KEYS = ["to", "from", "bytes", "random", "as"]

    def __init__(
        self,
        receiver: str,
        raw: Optional[bytes] = None,
        random_size: Optional[int] = None,
        as_kind: Optional[str] = None,
        sender: Optional[str] = None,
        at: Optional[int] = None,
    ):
        Action.__init__(self, at)
        self.receiver = receiver
        self.raw = raw
        self.random_size = random_size
        self.as_kind = as_kind
        self.sender = sender

    def describe(self) -> str:
        shape = self.as_kind or "raw"
        return f"inject {shape} to={self.receiver}"


class StealCard(Action):
    VERB = "steal_card"
    ALLOWED_KEYS = ["employee", "guess"]

    def __init__(
        self, employee: str, guess: Optional[str] = None, at: Optional[int] = None
    ):
        Action.__init__(self, at)
        self.employee = employee
        self.guess = guess

    def describe(self) -> str:
        return f"steal_card employee={self.employee}"


class StealDevice(Action):
    VERB = "steal_device"
    ALLOWED_KEYS = ["slave"]

    def __init__(self, slave: str, at: Optional[int] = None):
        Action.__init__(self, at)
        self.slave = slave

    def describe(self) -> str:
        return f"steal_device slave={self.slave}"


ACTION_TYPES = {
    action.VERB: action
    for action in [Observe, Drop, Replay, Inject, StealCard, StealDevice]
}


def _parse_int(key: str, value: str) -> int:
    try:
        parsed = int(value)
    except ValueError:
        raise ValueError(f"'{key}' must be an integer, got '{value}'")
    if parsed < 0:
        raise ValueError(f"'{key}' must not be negative, got {parsed}")
    return parsed


def parse_action(line: str) -> Action:
    words = line.split()
    if not words:
        raise ValueError("empty adversary action")
    verb, pairs = words[0], words[1:]
    action_type = ACTION_TYPES.get(verb)
    if action_type is None:
        raise ValueError(
            f"unknown adversary action '{verb}', expected one of {sorted(ACTION_TYPES)}"
        )

    args: Dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"'{pair}' in '{line}' is not key=value")
        key, value = pair.split("=", 1)
        if key != "at" and key not in action_type.ALLOWED_KEYS:
            raise ValueError(f"'{verb}' does not take '{key}'")
        args[key] = value

    at = _parse_int("at", args["at"]) if "at" in args else None

    def required(key: str) -> str:
        if key not in args:
            raise ValueError(f"'{verb}' needs '{key}='")
        return args[key]

    if action_type is Observe:
        return Observe(at)
    if action_type is Drop:
        kind = args.get("kind")
        if kind is not None and kind not in PACKET_KINDS:
            raise ValueError(f"unknown packet kind '{kind}'")
        count = _parse_int("count", args["count"]) if "count" in args else None
        return Drop(kind, args.get("from"), args.get("to"), count, at)
    if action_type is Replay:
        return Replay(_parse_int("event", required("event")), required("to"), at)
    if action_type is Inject:
        receiver = required("to")
        if ("bytes" in args) == ("random" in args):
            raise ValueError("'inject' needs exactly one of 'bytes=' or 'random='")
        as_kind = args.get("as")
        if as_kind is not None and as_kind not in PACKET_KINDS:
            raise ValueError(f"unknown packet kind '{as_kind}'")
        raw = None
        if "bytes" in args:
            try:
                raw = bytes.fromhex(args["bytes"])
            except ValueError:
                raise ValueError(f"'bytes' is not hex: '{args['bytes']}'")
        random_size = (
            _parse_int("random", args["random"]) if "random" in args else None
        )
        return Inject(receiver, raw, random_size, as_kind, args.get("from"), at)
    if action_type is StealCard:
        return StealCard(required("employee"), args.get("guess"), at)
    return StealDevice(required("slave"), at)


class AdversaryScript:
    def __init__(self, actions: List[Action]):
        self.actions = actions

    @staticmethod
    def parse(text: str) -> "AdversaryScript":
        actions = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                actions.append(parse_action(line))
        return AdversaryScript(actions)

    def is_empty(self) -> bool:
        return not self.actions

    def referenced_names(self) -> List[str]:
        names: List[str] = []
        for action in self.actions:
            if isinstance(action, Drop):
                names.extend(n for n in (action.sender, action.receiver) if n)
            elif isinstance(action, Replay):
                names.append(action.receiver)
            elif isinstance(action, Inject):
                names.append(action.receiver)
            elif isinstance(action, StealDevice):
                names.append(action.slave)
        return names


class Adversary:
    """
    Runtime side of a script. Drop rules are passive and consulted by the
    bus on every send; the active actions are handed out by due_actions().
    """

    def __init__(self, script: AdversaryScript, rng: RandomSource, clock: SimClock):
        self.script = script
        self.rng = rng
        self.clock = clock
        self.observing = any(isinstance(a, Observe) for a in script.actions)
        self.observations: List[bytes] = []
        self.drops = [a for a in script.actions if isinstance(a, Drop)]
        self._active = [
            a for a in script.actions if not isinstance(a, (Observe, Drop))
        ]
        self.stolen_devices: Dict[str, Dict[str, object]] = {}
        self.stolen_cards: Dict[str, bytes] = {}

    def observe(self, raw: bytes):
        if self.observing:
            self.observations.append(raw)

    def should_drop(
        self, kind: str, sender: PrincipalId, receiver: PrincipalId
    ) -> bool:
        for rule in self.drops:
            if rule.at is not None and rule.at > self.clock.now:
                continue
            if rule.matches(kind, sender.name, receiver.name):
                if rule.remaining is not None:
                    rule.remaining -= 1
                return True
        return False

    def due_actions(self, quiescent: bool) -> List[Action]:
        """
        Pops the active actions that fire now, in script order. Once traffic
        has died down everything left fires, timed or not.
        """
        due = [
            a
            for a in self._active
            if quiescent or (a.at is not None and a.at <= self.clock.now)
        ]
        self._active = [a for a in self._active if a not in due]
        return due

    def has_pending_actions(self) -> bool:
        return bool(self._active)

    def random_bytes(self, size: int) -> bytes:
        return self.rng.bytes(size)


def forge_packet(kind: str, body: bytes, rng: RandomSource) -> bytes:
    """A correctly framed packet of the given kind around adversary-chosen bytes"""
    packet_type = PACKET_TYPES_BY_NAME[kind]
    if issubclass(packet_type, EnvelopePacket):
        return encode(packet_type(Envelope(rng.bytes(WRAPPED_KEY_SIZE), body)))
    if issubclass(packet_type, CiphertextPacket):
        return encode(packet_type(body))
    return encode(PDh2(rng.bytes(len(body)), body))
