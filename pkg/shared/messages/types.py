from enum import Enum
from typing import List, Optional, Tuple

from shared.crypto.envelope import Envelope
from shared.errors import MalformedPacket
from shared.messages.fields import pack_fields, unpack_fields

MASTER_SETTING = "master"


class Role(Enum):
    EMS = "EMS"
    SM = "SM"
    HH = "HH"
    ID_CARD = "ID_CARD"
    SLAVE = "SLAVE"
    MASTER = "MASTER"
    EMPLOYEE = "EMPLOYEE"


class Capability(Enum):
    SYM_ONLY = "sym_only"
    ASYM_CAPABLE = "asym_capable"


class PrincipalId:
    def __init__(self, role: Role, name: str):
        self.role = role
        self.name = name

    def encode(self) -> bytes:
        return pack_fields([self.role.value.encode(), self.name.encode()])

    @staticmethod
    def decode(data: bytes) -> "PrincipalId":
        role_raw, name_raw = unpack_fields(data, 2)
        try:
            role = Role(role_raw.decode())
            name = name_raw.decode()
        except (ValueError, UnicodeDecodeError):
            raise MalformedPacket(f"invalid principal encoding: {data.hex()}")
        return PrincipalId(role, name)

    def label(self) -> str:
        return f"{self.role.value}:{self.name}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PrincipalId):
            return False
        return self.role == other.role and self.name == other.name

    def __hash__(self) -> int:
        return hash((self.role, self.name))

    def __lt__(self, other: "PrincipalId") -> bool:
        return (self.role.value, self.name) < (other.role.value, other.name)

    def __str__(self) -> str:
        return self.label()

    def __repr__(self) -> str:
        return f"PrincipalId({self.label()})"


class ConfigurationData:
    """CD: what the commissioning engineer installs into the slave"""

    def __init__(
        self,
        slave_id: PrincipalId,
        employee_id: PrincipalId,
        handheld_id: Optional[PrincipalId],
        capability: Capability,
        settings: List[Tuple[str, str]],
    ):
        if employee_id.role != Role.EMPLOYEE:
            raise ValueError(f"CD employee must have role EMPLOYEE, got {employee_id}")
        self.slave_id = slave_id
        self.employee_id = employee_id
        self.handheld_id = handheld_id
        self.capability = capability
        self.settings = list(settings)

    def get_setting(self, key: str) -> Optional[str]:
        for setting_key, value in self.settings:
            if setting_key == key:
                return value
        return None

    def master_name(self) -> Optional[str]:
        return self.get_setting(MASTER_SETTING)

    def is_hierarchical(self) -> bool:
        return self.master_name() is not None

    def encode(self) -> bytes:
        flat_settings: List[bytes] = []
        for key, value in self.settings:
            flat_settings.append(key.encode())
            flat_settings.append(value.encode())
        return pack_fields(
            [
                self.slave_id.encode(),
                self.employee_id.encode(),
                self.handheld_id.encode() if self.handheld_id else b"",
                self.capability.value.encode(),
                pack_fields(flat_settings),
            ]
        )

    @staticmethod
    def decode(data: bytes) -> "ConfigurationData":
        slave_raw, employee_raw, handheld_raw, capability_raw, settings_raw = (
            unpack_fields(data, 5)
        )
        flat = unpack_fields(settings_raw)
        if len(flat) % 2 != 0:
            raise MalformedPacket("odd number of setting fields in CD")
        try:
            capability = Capability(capability_raw.decode())
            settings = [
                (flat[i].decode(), flat[i + 1].decode()) for i in range(0, len(flat), 2)
            ]
            return ConfigurationData(
                PrincipalId.decode(slave_raw),
                PrincipalId.decode(employee_raw),
                PrincipalId.decode(handheld_raw) if handheld_raw else None,
                capability,
                settings,
            )
        except (ValueError, UnicodeDecodeError) as err:
            raise MalformedPacket(f"invalid configuration data: {err}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfigurationData):
            return False
        return self.encode() == other.encode()


class Aparam:
    def __init__(self, secret: bytes):
        self.secret = secret

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Aparam) and self.secret == other.secret


def encode_envelope(env: Envelope) -> bytes:
    return pack_fields([env.wrapped_key, env.body])


def decode_envelope(data: bytes) -> Envelope:
    wrapped_key, body = unpack_fields(data, 2)
    return Envelope(wrapped_key, body)


class EncApparam:
    """APARAM under the EMS public key, plus the EMS signature over that envelope"""

    def __init__(self, env: Envelope, ems_signature: bytes):
        self.env = env
        self.ems_signature = ems_signature

    def signed_bytes(self) -> bytes:
        return encode_envelope(self.env)

    def encode(self) -> bytes:
        return pack_fields([encode_envelope(self.env), self.ems_signature])

    @staticmethod
    def decode(data: bytes) -> "EncApparam":
        env_raw, signature = unpack_fields(data, 2)
        return EncApparam(decode_envelope(env_raw), signature)
