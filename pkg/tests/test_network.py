import pytest

from shared.crypto.keys import RandomSource
from shared.errors import IndexOutOfRange, UnknownPrincipal
from shared.messages.packets import Challenge, PJoin, decode
from shared.messages.types import PrincipalId, Role
from shared.network.adversary import (
    Adversary,
    AdversaryScript,
    Drop,
    Inject,
    Replay,
    StealCard,
    forge_packet,
    parse_action,
)
from shared.network.bus import Bus, Disposition
from shared.network.clock import SimClock

EMS = PrincipalId(Role.EMS, "ems")
SM = PrincipalId(Role.SM, "sm")
S1 = PrincipalId(Role.SLAVE, "s1")


def make_bus(script_text: str = "", seed: int = 5) -> Bus:
    clock = SimClock()
    script = AdversaryScript.parse(script_text)
    adversary = Adversary(script, RandomSource(seed), clock)
    bus = Bus(clock, adversary)
    for principal in (EMS, SM, S1):
        bus.register(principal)
    return bus


def test_bus_is_fifo_and_ticks(rng: RandomSource):
    bus = make_bus()
    first = bus.send(S1, SM, Challenge(rng.bytes(30)))
    second = bus.send(SM, S1, Challenge(rng.bytes(30)))

    assert (first.index, first.tick) == (0, 1)
    assert (second.index, second.tick) == (1, 2)
    assert bus.next_delivery().event is first
    assert bus.next_delivery().event is second
    assert not bus.has_pending()
    assert bus.wire_message_count() == 2


def test_bus_rejects_unknown_principals(rng: RandomSource):
    bus = make_bus()
    stranger = PrincipalId(Role.SLAVE, "s9")
    with pytest.raises(UnknownPrincipal):
        bus.send(stranger, SM, Challenge(rng.bytes(30)))
    with pytest.raises(UnknownPrincipal):
        bus.inject(stranger, b"\x00", S1)
    # a claimed sender need not exist
    assert bus.inject(SM, b"\x00", stranger).disposition == Disposition.INJECTED


def test_replay_copies_bytes_and_sender(rng: RandomSource):
    bus = make_bus()
    original = bus.send(S1, SM, Challenge(rng.bytes(30)))
    replayed = bus.replay(0, EMS)

    assert replayed.raw == original.raw
    assert replayed.sender == S1
    assert replayed.receiver == EMS
    assert replayed.disposition == Disposition.REPLAYED
    with pytest.raises(IndexOutOfRange):
        bus.replay(2, EMS)
    with pytest.raises(IndexOutOfRange):
        bus.replay(-1, EMS)


def test_drop_rule_with_count(rng: RandomSource):
    bus = make_bus("drop kind=Challenge to=sm count=1")
    dropped = bus.send(S1, SM, Challenge(rng.bytes(30)))
    passed = bus.send(S1, SM, Challenge(rng.bytes(30)))
    other = bus.send(S1, EMS, Challenge(rng.bytes(30)))

    assert dropped.disposition == Disposition.DROPPED
    assert passed.disposition == Disposition.DELIVERED
    assert other.disposition == Disposition.DELIVERED
    assert [bus.next_delivery().event for _ in range(2)] == [passed, other]
    assert bus.wire_message_count() == 2
    assert len(bus.transcript) == 3


def test_drop_rule_waits_for_its_tick(rng: RandomSource):
    bus = make_bus("drop kind=Challenge at=2")
    events = [bus.send(S1, SM, Challenge(rng.bytes(30))) for _ in range(3)]
    assert [ev.disposition for ev in events] == [
        Disposition.DELIVERED,
        Disposition.DELIVERED,
        Disposition.DROPPED,
    ]


def test_observer_sees_everything(rng: RandomSource):
    bus = make_bus("observe\ndrop to=sm")
    bus.send(S1, SM, Challenge(rng.bytes(30)))
    bus.inject(S1, b"\x01\x02", EMS)
    assert bus.adversary_observations() == [ev.raw for ev in bus.transcript]


def test_silent_adversary_keeps_nothing(rng: RandomSource):
    bus = make_bus()
    bus.send(S1, SM, Challenge(rng.bytes(30)))
    assert bus.adversary_observations() == []


def test_digest_follows_content(rng: RandomSource):
    first = make_bus()
    second = make_bus()
    payload = rng.bytes(30)
    first.send(S1, SM, Challenge(payload))
    second.send(S1, SM, Challenge(payload))
    assert first.digest() == second.digest()
    second.send(SM, S1, Challenge(payload))
    assert first.digest() != second.digest()


def test_script_parsing():
    script = AdversaryScript.parse(
        """
        observe   # watch the wire
        drop kind=PJoin to=ems count=2
        replay event=3 to=sm at=10
        inject to=ems as=PJoin random=96 from=s1
        inject to=sm bytes=deadbeef
        steal_card employee=alice guess=hunter2
        """
    )
    observe, drop, replay, forged, raw, steal = script.actions

    assert observe.describe() == "observe"
    assert isinstance(drop, Drop) and drop.remaining == 2 and drop.kind == "PJoin"
    assert isinstance(replay, Replay) and (replay.event, replay.at) == (3, 10)
    assert isinstance(forged, Inject) and forged.random_size == 96
    assert forged.sender == "s1" and forged.as_kind == "PJoin"
    assert isinstance(raw, Inject) and raw.raw == bytes.fromhex("deadbeef")
    assert isinstance(steal, StealCard) and steal.guess == "hunter2"
    assert script.referenced_names() == ["ems", "sm", "ems", "sm"]


@pytest.mark.parametrize(
    "line",
    [
        "teleport to=sm",
        "replay to=sm",
        "replay event=x to=sm",
        "replay event=-1 to=sm",
        "replay event=1 to=sm colour=red",
        "drop kind=Telegram",
        "inject to=sm",
        "inject to=sm bytes=00 random=4",
        "inject to=sm bytes=zz",
        "inject to=sm random=4 as=Postcard",
        "steal_device",
        "observe loudly",
    ],
)
def test_script_parse_errors(line: str):
    with pytest.raises(ValueError):
        parse_action(line)


def test_due_actions_split_timed_and_quiescent():
    clock = SimClock()
    script = AdversaryScript.parse("replay event=0 to=sm at=2\nsteal_device slave=s1")
    adversary = Adversary(script, RandomSource(1), clock)

    assert adversary.due_actions(quiescent=False) == []
    clock.advance()
    clock.advance()
    (timed,) = adversary.due_actions(quiescent=False)
    assert isinstance(timed, Replay)
    assert adversary.has_pending_actions()
    assert len(adversary.due_actions(quiescent=True)) == 1
    assert not adversary.has_pending_actions()


def test_forge_packet_is_well_framed(rng: RandomSource):
    body = rng.bytes(96)
    forged = decode(forge_packet("PJoin", body, rng))
    assert isinstance(forged, PJoin)
    assert forged.env.body == body

    challenge = decode(forge_packet("Challenge", body, rng))
    assert isinstance(challenge, Challenge)
    assert challenge.ct == body
