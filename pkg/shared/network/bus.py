import hashlib
import json
from collections import deque
from enum import Enum
from pathlib import Path
from typing import Callable, Deque, Dict, List, Optional

from shared.errors import IndexOutOfRange, MalformedPacket, UnknownPrincipal
from shared.messages.packets import Packet, decode, encode
from shared.messages.types import PrincipalId
from shared.network.adversary import Adversary
from shared.network.clock import SimClock

# Turns raw packet bytes into the text form of their symbolic term
Lifter = Callable[[bytes], Optional[str]]


class Disposition(Enum):
    DELIVERED = "DELIVERED"
    DROPPED = "DROPPED"
    INJECTED = "INJECTED"
    REPLAYED = "REPLAYED"


ON_WIRE = (Disposition.DELIVERED, Disposition.REPLAYED, Disposition.INJECTED)


class BusEvent:
    def __init__(
        self,
        index: int,
        tick: int,
        sender: PrincipalId,
        receiver: PrincipalId,
        raw: bytes,
        disposition: Disposition,
        term: Optional[str] = None,
    ):
        self.index = index
        self.tick = tick
        self.sender = sender
        self.receiver = receiver
        self.raw = raw
        self.disposition = disposition
        self.term = term

    @property
    def kind(self) -> str:
        try:
            return decode(self.raw).kind
        except MalformedPacket:
            return "garbage"

    def to_dict(self) -> Dict[str, object]:
        return {
            "tick": self.tick,
            "from": str(self.sender),
            "to": str(self.receiver),
            "disposition": self.disposition.value,
            "kind": self.kind,
            "bytes": self.raw.hex(),
            "term": self.term,
        }

    def __str__(self) -> str:
        return (
            f"#{self.index} [{self.tick}] {self.sender} -> {self.receiver} "
            f"{self.kind} {self.disposition.value} ({len(self.raw)} bytes)"
        )


class Delivery:
    def __init__(self, event: BusEvent):
        self.event = event
        self.sender = event.sender
        self.receiver = event.receiver
        self.raw = event.raw


class Bus:
    """
    Tick-ordered, single-threaded message bus. Every send, replay and
    injection becomes one transcript event; non-dropped events are queued
    and handed out FIFO by next_delivery().
    """

    def __init__(
        self,
        clock: SimClock,
        adversary: Optional[Adversary] = None,
        lifter: Optional[Lifter] = None,
    ):
        self.clock = clock
        self.adversary = adversary
        self.lifter = lifter
        self.principals: List[PrincipalId] = []
        self.transcript: List[BusEvent] = []
        self.inbox_sizes: Dict[PrincipalId, int] = {}
        self._queue: Deque[Delivery] = deque()

    def register(self, principal: PrincipalId):
        if principal not in self.principals:
            self.principals.append(principal)
            self.inbox_sizes[principal] = 0

    def _check_registered(self, principal: PrincipalId):
        if principal not in self.principals:
            raise UnknownPrincipal(f"{principal} is not on the bus")

    def _append(
        self,
        sender: PrincipalId,
        receiver: PrincipalId,
        raw: bytes,
        disposition: Disposition,
    ) -> BusEvent:
        term = self.lifter(raw) if self.lifter else None
        event = BusEvent(
            len(self.transcript),
            self.clock.advance(),
            sender,
            receiver,
            raw,
            disposition,
            term,
        )
        self.transcript.append(event)
        if self.adversary is not None:
            self.adversary.observe(event.raw)
        if disposition != Disposition.DROPPED:
            self._queue.append(Delivery(event))
            self.inbox_sizes[receiver] += 1
        return event

    def send(self, sender: PrincipalId, receiver: PrincipalId, pkt: Packet) -> BusEvent:
        self._check_registered(sender)
        self._check_registered(receiver)
        disposition = Disposition.DELIVERED
        if self.adversary is not None and self.adversary.should_drop(
            pkt.kind, sender, receiver
        ):
            disposition = Disposition.DROPPED
        return self._append(sender, receiver, encode(pkt), disposition)

    def replay(self, index: int, receiver: PrincipalId) -> BusEvent:
        if not 0 <= index < len(self.transcript):
            raise IndexOutOfRange(
                f"event {index} does not exist, transcript has {len(self.transcript)}"
            )
        self._check_registered(receiver)
        original = self.transcript[index]
        return self._append(
            original.sender, receiver, original.raw, Disposition.REPLAYED
        )

    def inject(
        self, receiver: PrincipalId, raw: bytes, sender: PrincipalId
    ) -> BusEvent:
        """sender is whatever the adversary claims, it need not be registered"""
        self._check_registered(receiver)
        return self._append(sender, receiver, raw, Disposition.INJECTED)

    def has_pending(self) -> bool:
        return bool(self._queue)

    def next_delivery(self) -> Delivery:
        return self._queue.popleft()

    def adversary_observations(self) -> List[bytes]:
        if self.adversary is None:
            return []
        return list(self.adversary.observations)

    def wire_message_count(self) -> int:
        return len([ev for ev in self.transcript if ev.disposition in ON_WIRE])

    def to_lines(self) -> List[str]:
        return [json.dumps(ev.to_dict()) for ev in self.transcript]

    def digest(self) -> str:
        hasher = hashlib.sha256()
        for line in self.to_lines():
            hasher.update(line.encode() + b"\n")
        return hasher.hexdigest()

    def write(self, out_path: Path):
        with open(out_path, "w") as out_fh:
            for line in self.to_lines():
                print(line, file=out_fh)
