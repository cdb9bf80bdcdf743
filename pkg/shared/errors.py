from typing import List


class ProtocolError(Exception):
    """Base for every error an actor can raise while running the protocol.

    `reason` is the stable name used in audit records, reports and the
    expected_rejections list of scenario configs.
    """

    def __init__(self, detail: str = ""):
        Exception.__init__(self, detail or self.__class__.__name__)
        self.detail = detail

    @property
    def reason(self) -> str:
        return self.__class__.__name__


# crypto
class AuthFail(ProtocolError):
    pass


class DegenerateShare(ProtocolError):
    pass


class EmptyPassword(ProtocolError):
    pass


# codec
class MalformedPacket(ProtocolError):
    pass


# commissioning
class DuplicateEmployee(ProtocolError):
    pass


class WrongPassword(ProtocolError):
    pass


class IntegrityError(ProtocolError):
    pass


class BadCardSignature(ProtocolError):
    pass


class AlreadyProvisioned(ProtocolError):
    pass


# join / authentication
class WrongPhase(ProtocolError):
    pass


class MasterNotTrusted(ProtocolError):
    pass


class UnknownEmployee(ProtocolError):
    pass


class AparamMismatch(ProtocolError):
    pass


class ReplayDetected(ProtocolError):
    pass


class UnknownMaster(ProtocolError):
    pass


class BadMasterSignature(ProtocolError):
    pass


# verification / key establishment
class BadEmsSignature(ProtocolError):
    pass


class BadSmSignature(ProtocolError):
    pass


class WrongNetwork(ProtocolError):
    pass


class CounterMismatch(ProtocolError):
    pass


class NotVerified(ProtocolError):
    pass


class WrongCapability(ProtocolError):
    pass


class UnknownSession(ProtocolError):
    pass


class UnexpectedPacket(ProtocolError):
    pass


# simulator
class UnknownPrincipal(ProtocolError):
    pass


class IndexOutOfRange(ProtocolError):
    pass


class TamperProofSealed(ProtocolError):
    pass


class ConfigError(Exception):
    """Scenario config problems, collected so all of them can be reported at once"""

    def __init__(self, diagnostics: List[str]):
        Exception.__init__(self, "; ".join(diagnostics))
        self.diagnostics = diagnostics


def protocol_error_names() -> List[str]:
    return sorted(error.__name__ for error in ProtocolError.__subclasses__())
