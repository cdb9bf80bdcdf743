"""
Wires a ScenarioConfig onto the bus and drives it until nothing moves.

Masters enroll first on their own bootstrap bus. Every slave is then
commissioned by its employee's handheld and joins in config order, with
the bus pumped empty after each join. Adversary actions without an `at`
tick fire once the last join has settled.
"""

from logging import Logger
from typing import Dict, List, Optional, Set, Tuple

from commands.run.help_classes.config_classes import (
    EMS_NAME,
    SM_NAME,
    DhProfile,
    ScenarioConfig,
)
from commands.run.report import Rejection, RejectionOrigin, RunReport
from shared.actors.audit import AuditStep, AuditTrail
from shared.actors.card import HandheldState, IdCard, card_unlock, hh_commission
from shared.actors.ems import EmsState, ems_process_join, ems_register_employee
from shared.actors.slave import (
    Phase,
    SlaveState,
    slave_accept_key,
    slave_answer_challenge,
    slave_build_pjoin,
    slave_dh_confirm,
    slave_dh_respond,
)
from shared.actors.verifier import (
    KeySource,
    MasterState,
    SessionPhase,
    SmState,
    Verifier,
    issue_symmetric_key,
    master_challenge,
    master_forward,
    sm_begin_verification,
    sm_dh_finish,
    sm_dh_init,
    verifier_check_response,
)
from shared.crypto.dh import STANDARD_GROUP, TOY_GROUP
from shared.crypto.keys import RandomSource, SymKey, generate_keypair
from shared.errors import ProtocolError, UnexpectedPacket
from shared.knowledge.closure import SecrecyResult, check_secrecy
from shared.knowledge.lifting import (
    SecretVault,
    identity,
    lift_card,
    lift_device_dump,
    lift_packet,
)
from shared.knowledge.terms import Atom, Term, labeled, parse_term, public_atom
from shared.messages.packets import (
    Challenge,
    ChallengeResponse,
    Delegation,
    KeyDelivery,
    Packet,
    PAuthDev,
    PDh1,
    PDh2,
    PDh3,
    PJoin,
    PJoinFwd,
    decode,
)
from shared.messages.types import (
    MASTER_SETTING,
    Capability,
    ConfigurationData,
    PrincipalId,
    Role,
)
from shared.network.adversary import (
    Action,
    Adversary,
    Inject,
    Replay,
    StealCard,
    StealDevice,
    forge_packet,
)
from shared.network.bus import ON_WIRE, Bus, BusEvent, Delivery, Disposition
from shared.network.clock import SimClock

DEVICE_KINDS = (Challenge, KeyDelivery, PDh1, PDh3)
DEVICE_KIND_NAMES = [packet_type.__name__ for packet_type in DEVICE_KINDS]
VERIFIER_KINDS = ("ChallengeResponse", "PDh2")
INTRUDER = PrincipalId(Role.SLAVE, "intruder")

Reply = Tuple[PrincipalId, Packet]


class Scenario:
    def __init__(self, logger: Logger, config: ScenarioConfig):
        self.logger = logger
        self.config = config
        self.rng = RandomSource(config.seed)
        self.clock = SimClock()
        self.audit = AuditTrail(self.clock)
        self.vault = SecretVault()
        self.params = (
            TOY_GROUP if config.dh_profile == DhProfile.TOY else STANDARD_GROUP
        )

        self.rejections: List[Rejection] = []
        # last reason a slave's session was refused by someone else
        self.failures: Dict[PrincipalId, str] = {}
        self.stolen_terms: List[Term] = []
        # main-bus events sent in reaction to an injected or replayed packet
        self.tainted: Set[int] = set()
        self.accepted_attacks: List[str] = []

        self.ems_id = PrincipalId(Role.EMS, EMS_NAME)
        self.sm_id = PrincipalId(Role.SM, SM_NAME)
        ems_keys = generate_keypair(self.ems_id, self.rng)
        sm_keys = generate_keypair(self.sm_id, self.rng)
        self.ems = EmsState(
            self.ems_id, ems_keys, sm_keys.public, self.audit, config.kdf_iterations
        )
        self.sm = SmState(self.sm_id, sm_keys, self.ems_id, ems_keys.public, self.audit)
        self.vault.add_keypair(ems_keys.public, ems_keys.private, self.ems_id)
        self.vault.add_keypair(sm_keys.public, sm_keys.private, self.sm_id)
        self.public_owners: List[PrincipalId] = [self.ems_id, self.sm_id]

        self.cards: Dict[str, IdCard] = {}
        for employee in config.employees.values():
            employee_id = PrincipalId(Role.EMPLOYEE, employee.id)
            self.cards[employee.id] = ems_register_employee(
                self.ems, employee_id, employee.password.encode(), self.rng
            )
            self.vault.add_aparam(self.ems.registry[employee_id].secret, employee_id)

        self.masters: Dict[PrincipalId, MasterState] = {}
        self.devices: Dict[PrincipalId, SlaveState] = {}
        for master in config.masters.values():
            master_id = PrincipalId(Role.MASTER, master.id)
            keys = generate_keypair(master_id, self.rng)
            device = SlaveState(master_id)
            self.masters[master_id] = MasterState(
                master_id,
                keys,
                device,
                self.sm_id,
                sm_keys.public,
                self.audit,
                config.delegation_mode_of(master),
                config.hierarchical_key_source,
            )
            self.devices[master_id] = device
            self.vault.add_keypair(keys.public, keys.private, master_id)
            self.public_owners.append(master_id)

        self.slaves: Dict[PrincipalId, SlaveState] = {}
        for slave in config.slaves.values():
            slave_id = PrincipalId(Role.SLAVE, slave.id)
            self.slaves[slave_id] = SlaveState(slave_id)
            self.devices[slave_id] = self.slaves[slave_id]

        self.handhelds: Dict[str, HandheldState] = {}
        self.names: Dict[str, PrincipalId] = {
            principal.name: principal
            for principal in [self.ems_id, self.sm_id, *self.devices]
        }

        self.signers = {"EMS": self.ems_id, "SM": self.sm_id}
        self.adversary = Adversary(
            config.adversary.script, self.rng.fork("adversary"), self.clock
        )
        self.bootstrap_bus = Bus(self.clock, lifter=self._lift)
        self.bus = Bus(self.clock, self.adversary, self._lift)
        for principal in self.names.values():
            self.bootstrap_bus.register(principal)
            self.bus.register(principal)

    def run(self) -> RunReport:
        self.logger.info(
            f"Running {self.config.name}: {self.config.topology.value} topology, "
            f"{self.config.key_mode.value} keys, seed {self.config.seed}"
        )
        self._bootstrap_masters()

        for slave in self.config.slaves.values():
            settings: List[Tuple[str, str]] = []
            master_name = self.config.master_of(slave)
            if master_name is not None:
                settings.append((MASTER_SETTING, master_name))
            self._commission(
                PrincipalId(Role.SLAVE, slave.id),
                slave.employee,
                slave.handheld,
                slave.capability,
                settings,
            )

        for slave_state in self.slaves.values():
            if slave_state.phase != Phase.PROVISIONED:
                continue
            self.bus.send(
                slave_state.id,
                self._verifier_id(slave_state, join=True),
                slave_build_pjoin(slave_state, self.rng),
            )
            self._pump(self.bus, final=False)
        self._pump(self.bus, final=True)

        return self.report()

    def _bootstrap_masters(self):
        for config in self.config.masters.values():
            master = self.masters[PrincipalId(Role.MASTER, config.id)]
            employee = self.config.employee_of(config)
            assert employee is not None
            self._commission(
                master.id, employee, config.handheld, Capability.SYM_ONLY, []
            )
            if master.device.phase != Phase.PROVISIONED:
                continue

            self.bootstrap_bus.send(
                master.id, self.ems_id, slave_build_pjoin(master.device, self.rng)
            )
            self._pump(self.bootstrap_bus, final=False)
            if not master.trusted:
                self.logger.error(
                    f"{master.id} did not complete its own enrollment "
                    f"({master.device.phase.value}), its slaves cannot join"
                )
                continue

            self.ems.register_master(master.id, master.keypair.public)
            self.sm.register_master(
                master.id,
                master.keypair.public,
                master.delegation_key,
                master.delegation_mode,
            )
            self.logger.info(
                f"{master.id} is trusted, delegation via {master.delegation_mode.value}"
            )

    def _commission(
        self,
        device_id: PrincipalId,
        employee: str,
        handheld: str,
        capability: Capability,
        settings: List[Tuple[str, str]],
    ):
        employee_id = PrincipalId(Role.EMPLOYEE, employee)
        handheld_id = PrincipalId(Role.HH, handheld)
        hh = self.handhelds.setdefault(handheld, HandheldState(handheld_id))
        cd = ConfigurationData(
            device_id, employee_id, handheld_id, capability, settings
        )
        try:
            hh_commission(
                hh,
                self.cards[employee],
                self.config.employees[employee].password.encode(),
                cd,
                self.ems.keypair.public,
                self.devices[device_id],
                self.rng,
                self.audit,
            )
        except ProtocolError as err:
            self._record(
                str(handheld_id), "commission", err, RejectionOrigin.HONEST
            )

    def _pump(self, bus: Bus, final: bool):
        while True:
            while bus.has_pending():
                # timed actions fire before and after every delivery
                if bus is self.bus:
                    self._fire(self.adversary.due_actions(quiescent=False))
                self._dispatch(bus, bus.next_delivery())
                if bus is self.bus:
                    self._fire(self.adversary.due_actions(quiescent=False))
            if bus is self.bus and final and self.adversary.has_pending_actions():
                self._fire(self.adversary.due_actions(quiescent=True))
                continue
            return

    def _dispatch(self, bus: Bus, delivery: Delivery):
        event = delivery.event
        self.logger.debug(str(event))
        attack = bus is self.bus and self._from_adversary(event)
        try:
            pkt = decode(event.raw)
            replies = self._handle(delivery.receiver, delivery.sender, pkt)
        except ProtocolError as err:
            self._reject(delivery, err, attack)
            return
        sent = [
            bus.send(delivery.receiver, receiver, reply) for receiver, reply in replies
        ]
        if not attack:
            return
        if sent:
            self.tainted.update(reply_event.index for reply_event in sent)
        else:
            self.logger.error(
                f"{event.receiver} accepted {event.kind} from the adversary"
            )
            self.accepted_attacks.append(
                f"{event.kind} to {event.receiver} at tick {event.tick}"
            )

    def _from_adversary(self, event: BusEvent) -> bool:
        if event.disposition in (Disposition.INJECTED, Disposition.REPLAYED):
            return True
        return event.index in self.tainted

    def _handle(
        self, receiver: PrincipalId, sender: PrincipalId, pkt: Packet
    ) -> List[Reply]:
        if receiver == self.ems_id and isinstance(pkt, (PJoin, PJoinFwd)):
            return [(self.sm_id, ems_process_join(self.ems, pkt, self.rng))]

        if receiver == self.sm_id:
            if isinstance(pkt, PAuthDev):
                slave_id, first = sm_begin_verification(self.sm, pkt, self.rng)
                if isinstance(first, Delegation):
                    master_name = self.sm.session(slave_id).cd.master_name()
                    assert master_name is not None
                    return [(PrincipalId(Role.MASTER, master_name), first)]
                return [(slave_id, first)]
            return self._verify(self.sm, sender, pkt)

        master = self.masters.get(receiver)
        if master is not None:
            if isinstance(pkt, PJoin):
                return [(self.ems_id, master_forward(master, pkt, self.rng))]
            if isinstance(pkt, Delegation):
                return [master_challenge(master, pkt, self.rng)]
            if isinstance(pkt, DEVICE_KINDS):
                return self._device_step(master.device, pkt)
            return self._verify(master, sender, pkt)

        device = self.devices.get(receiver)
        if device is not None:
            return self._device_step(device, pkt)
        raise UnexpectedPacket(f"{receiver} does not handle {pkt.kind}")

    def _verify(
        self, verifier: Verifier, slave_id: PrincipalId, pkt: Packet
    ) -> List[Reply]:
        if isinstance(pkt, ChallengeResponse):
            verifier_check_response(verifier, slave_id, pkt)
            if verifier.session(slave_id).cd.capability == Capability.ASYM_CAPABLE:
                dh_init = sm_dh_init(verifier, slave_id, self.params, self.rng)
                return [(slave_id, dh_init)]
            supplied = self._supplied_key(verifier, slave_id)
            return [
                (slave_id, issue_symmetric_key(verifier, slave_id, self.rng, supplied))
            ]
        if isinstance(pkt, PDh2):
            return [(slave_id, sm_dh_finish(verifier, slave_id, pkt, self.rng))]
        raise UnexpectedPacket(f"{verifier.id} does not handle {pkt.kind}")

    def _supplied_key(
        self, verifier: Verifier, slave_id: PrincipalId
    ) -> Optional[SymKey]:
        if isinstance(verifier, MasterState) and verifier.key_source == KeySource.SM:
            return self.sm.grant_delegated_key(
                verifier.id, slave_id, verifier.session(slave_id), self.rng
            )
        return None

    def _device_step(self, device: SlaveState, pkt: Packet) -> List[Reply]:
        if isinstance(pkt, Challenge):
            response = slave_answer_challenge(device, pkt, self.rng)
            return [(self._verifier_id(device), response)]
        if isinstance(pkt, PDh1):
            reply = slave_dh_respond(device, pkt, self.rng)
            return [(self._verifier_id(device), reply)]
        if isinstance(pkt, KeyDelivery):
            slave_accept_key(device, pkt)
        elif isinstance(pkt, PDh3):
            slave_dh_confirm(device, pkt)
        else:
            raise UnexpectedPacket(f"{device.id} does not handle {pkt.kind}")
        self.logger.info(f"{device.id} is KEYED")
        return []

    def _verifier_id(self, device: SlaveState, join: bool = False) -> PrincipalId:
        """Where the device sends its protocol messages: its master, else EMS/SM"""
        master_name = device.cd.master_name() if device.cd else None
        if master_name is not None:
            return PrincipalId(Role.MASTER, master_name)
        return self.ems_id if join else self.sm_id

    def _verifier_state(self, device: SlaveState) -> Verifier:
        verifier_id = self._verifier_id(device)
        if verifier_id == self.sm_id:
            return self.sm
        return self.masters[verifier_id]

    def _session_already_ended(self, delivery: Delivery) -> bool:
        device = self.devices.get(delivery.receiver)
        if device is not None and device.phase == Phase.ABORTED:
            return True
        if delivery.event.kind in VERIFIER_KINDS:
            verifier: Verifier = self.masters.get(delivery.receiver, self.sm)
            session = verifier.pending.get(delivery.sender)
            return session is not None and session.phase == SessionPhase.ABORTED
        return False

    def _reject(self, delivery: Delivery, err: ProtocolError, attack: bool):
        event = delivery.event
        if attack:
            origin = RejectionOrigin.ATTACK
        elif self._session_already_ended(delivery):
            origin = RejectionOrigin.FALLOUT
        else:
            origin = RejectionOrigin.HONEST
        self._record(str(event.receiver), event.kind, err, origin, event.sender)
        if origin == RejectionOrigin.FALLOUT:
            return

        if delivery.receiver in self.slaves or (
            delivery.receiver in self.masters and event.kind in DEVICE_KIND_NAMES
        ):
            self.devices[delivery.receiver].abort(err.reason)
        if delivery.sender in self.devices:
            self.failures[delivery.sender] = err.reason
            if event.kind in VERIFIER_KINDS:
                verifier: Verifier = self.masters.get(delivery.receiver, self.sm)
                verifier.abort(delivery.sender, err.reason)

    def _record(
        self,
        principal: str,
        kind: str,
        err: ProtocolError,
        origin: RejectionOrigin,
        sender: Optional[PrincipalId] = None,
    ):
        claimed = f" from {sender}" if sender is not None else ""
        self.logger.warning(
            f"{principal} rejected {kind}{claimed}: {err.reason}: {err}"
        )
        self.rejections.append(
            Rejection(self.clock.now, principal, kind, err.reason, str(err), origin)
        )

    def _fire(self, actions: List[Action]):
        for action in actions:
            self.logger.info(f"Adversary at tick {self.clock.now}: {action.describe()}")
            try:
                self._perform(action)
            except ProtocolError as err:
                self._record(
                    self._action_target(action),
                    action.VERB,
                    err,
                    RejectionOrigin.ATTACK,
                )

    def _action_target(self, action: Action) -> str:
        if isinstance(action, (Replay, Inject)):
            return str(self.names[action.receiver])
        if isinstance(action, StealCard):
            return f"{Role.HH.value}:rogue-{action.employee}"
        if isinstance(action, StealDevice):
            return str(self.names[action.slave])
        return "adversary"

    def _perform(self, action: Action):
        if isinstance(action, Replay):
            self.bus.replay(action.event, self.names[action.receiver])
        elif isinstance(action, Inject):
            raw = action.raw
            if raw is None:
                raw = self.adversary.random_bytes(action.random_size or 0)
            if action.as_kind is not None:
                raw = forge_packet(action.as_kind, raw, self.adversary.rng)
            sender = INTRUDER
            if action.sender is not None:
                sender = self.names.get(
                    action.sender, PrincipalId(Role.SLAVE, action.sender)
                )
            self.bus.inject(self.names[action.receiver], raw, sender)
        elif isinstance(action, StealCard):
            self._steal_card(action)
        elif isinstance(action, StealDevice):
            device = self.devices[self.names[action.slave]]
            exposed = device.exposed_fields()
            self.adversary.stolen_devices[action.slave] = exposed
            self._harvest()
            self.stolen_terms.append(identity(device.id))
            self.stolen_terms.extend(lift_device_dump(exposed, self.vault))
            device.store.read_sealed()
            self.accepted_attacks.append(f"tamper-proof store of {device.id} read out")

    def _steal_card(self, action: StealCard):
        card = self.cards[action.employee]
        employee_id = PrincipalId(Role.EMPLOYEE, action.employee)
        self.adversary.stolen_cards[action.employee] = card.encode()
        # the simulation knows the password, the thief does not
        password = self.config.employees[action.employee].password.encode()
        self.stolen_terms.append(
            lift_card(
                card.locked_payload,
                employee_id,
                self.vault,
                card_unlock(card, password),
            )
        )
        if action.guess is None:
            return

        rogue = SlaveState(PrincipalId(Role.SLAVE, f"rogue-{action.employee}"))
        rogue_hh = HandheldState(PrincipalId(Role.HH, f"rogue-{action.employee}"))
        cd = ConfigurationData(
            rogue.id, employee_id, rogue_hh.id, Capability.SYM_ONLY, []
        )
        hh_commission(
            rogue_hh,
            card,
            action.guess.encode(),
            cd,
            self.ems.keypair.public,
            rogue,
            self.adversary.rng,
        )
        self.accepted_attacks.append(f"stolen card of {employee_id} opened")
        self.logger.warning(
            f"Stolen card of {employee_id} opened with a guessed password, "
            f"{rogue.id} is {rogue.phase.value}"
        )

    def _lift(self, raw: bytes) -> Optional[str]:
        self._harvest()
        return str(lift_packet(raw, self.vault, self.signers))

    def _harvest(self):
        """Teaches the vault every secret value that exists right now"""
        for device in self.devices.values():
            label = device.id.label()
            self.vault.add_nonce(device.store.nonce_s, labeled("NONCE_S", label))
            self.vault.add_symmetric(device.store.rnd_s, labeled("RND_S", label))
            for key in (device.store.pending_key, device.session_key):
                self.vault.add_symmetric(key, labeled("SESSION_KEY", label))
        for verifier in [self.sm, *self.masters.values()]:
            for slave_id, session in verifier.pending.items():
                self.vault.add_symmetric(
                    session.challenger_nonce,
                    labeled("CHALLENGER_NONCE", slave_id.label()),
                )
            for slave_id, key in verifier.issued_keys.items():
                self.vault.add_symmetric(key, labeled("SESSION_KEY", slave_id.label()))

    def adversary_knowledge(self) -> List[Term]:
        """Every public key and identity, plus whatever the script granted or stole"""
        known: List[Term] = [
            public_atom(owner.label()) for owner in self.public_owners
        ]
        principals = [self.ems_id, self.sm_id, *self.devices]
        principals.extend(PrincipalId(Role.EMPLOYEE, name) for name in self.cards)
        principals.extend(hh.id for hh in self.handhelds.values())
        known.extend(identity(principal) for principal in principals)
        known.extend(labeled("CD", device.label()) for device in self.devices)
        known.extend(self.config.adversary.knows)
        known.extend(self.stolen_terms)
        return known

    def secret_atoms(self) -> List[Atom]:
        secrets: List[Atom] = []
        for kind in self.config.checks:
            if kind == "APARAM":
                secrets.extend(
                    labeled(kind, PrincipalId(Role.EMPLOYEE, name).label())
                    for name in self.cards
                )
            else:
                secrets.extend(labeled(kind, device.label()) for device in self.devices)
        return secrets

    def transcript_terms(self) -> List[Term]:
        events = self.bootstrap_bus.transcript + self.bus.transcript
        return [parse_term(event.term) for event in events if event.term]

    def check_secrecy(self) -> List[SecrecyResult]:
        return check_secrecy(
            self.transcript_terms(), self.adversary_knowledge(), self.secret_atoms()
        )

    def outcome(self, slave: SlaveState) -> str:
        if slave.phase == Phase.KEYED:
            return "KEYED"
        reason = slave.abort_reason or self.failures.get(slave.id)
        if reason is None:
            refused = [
                rec
                for rec in self.audit.for_slave(slave.id)
                if rec.step == AuditStep.REJECTED
            ]
            if refused:
                reason = refused[-1].detail.split(":", 1)[0]
        return f"REJECTED({reason or 'Stalled:' + slave.phase.value})"

    def keys_agree(self, slave: SlaveState) -> bool:
        verifier = self._verifier_state(slave)
        issued = verifier.issued_keys.get(slave.id)
        if slave.session_key is None or issued != slave.session_key:
            return False
        granted = self.sm.issued_keys.get(slave.id)
        return verifier is self.sm or granted is None or granted == issued

    def report(self) -> RunReport:
        keyed = [s for s in self.slaves.values() if s.phase == Phase.KEYED]
        registered = [PrincipalId(Role.EMPLOYEE, name) for name in self.cards]
        return RunReport(
            name=self.config.name,
            seed=self.config.seed,
            topology=self.config.topology.value,
            key_mode=self.config.key_mode.value,
            outcomes={str(s.id): self.outcome(s) for s in self.slaves.values()},
            wire_message_count=self.bus.wire_message_count(),
            wire_bytes=sum(
                len(ev.raw) for ev in self.bus.transcript if ev.disposition in ON_WIRE
            ),
            secrecy=self.check_secrecy(),
            audit_summary={step.value: self.audit.count(step) for step in AuditStep},
            accountability=self.audit.accountability_violations(registered),
            key_agreement={str(s.id): self.keys_agree(s) for s in keyed},
            rejections=self.rejections,
            expected_rejections=self.config.adversary.expected_rejections,
            transcript_digest=self.bus.digest(),
            bootstrap_digest=self.bootstrap_bus.digest(),
            accepted_attacks=self.accepted_attacks,
        )