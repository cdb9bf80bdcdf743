import random
from typing import NewType

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from shared.constants import NONCE_MODULUS, NONCE_SIZE, SYM_KEY_SIZE

SymKey = NewType("SymKey", bytes)
Nonce = NewType("Nonce", bytes)


class RandomSource:
    """
    The single seeded randomness source of a scenario.

    Every key, nonce, AEAD IV and DH secret is drawn from here, so equal
    seeds give byte-identical transcripts.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = random.Random(seed)

    def bytes(self, n: int) -> bytes:
        if n == 0:
            return b""
        return self._rng.getrandbits(8 * n).to_bytes(n, "big")

    def randint(self, low: int, high: int) -> int:
        return self._rng.randint(low, high)

    def fork(self, label: str) -> "RandomSource":
        # Independent stream, e.g. for the adversary, so scripted attacks do
        # not shift the honest actors' draws
        derived = random.Random(f"{self.seed}:{label}").getrandbits(64)
        return RandomSource(derived)


def gen_symkey(rng: RandomSource) -> SymKey:
    return SymKey(rng.bytes(SYM_KEY_SIZE))


def gen_nonce(rng: RandomSource) -> Nonce:
    return Nonce(rng.bytes(NONCE_SIZE))


def inc(n: bytes, k: int = 1) -> Nonce:
    value = (int.from_bytes(n, "big") + k) % NONCE_MODULUS
    return Nonce(value.to_bytes(NONCE_SIZE, "big"))


def nonce_offset(base: bytes, candidate: bytes) -> int:
    """How many increments lead from base to candidate (mod 2^128)"""
    diff = int.from_bytes(candidate, "big") - int.from_bytes(base, "big")
    return diff % NONCE_MODULUS


class PublicKey:
    """Public half of a principal's key material (encryption + verification)"""

    def __init__(self, encryption: bytes, verification: bytes):
        self.encryption = encryption
        self.verification = verification

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PublicKey):
            return False
        return (
            self.encryption == other.encryption
            and self.verification == other.verification
        )

    def __hash__(self) -> int:
        return hash((self.encryption, self.verification))

    def fingerprint(self) -> str:
        return (self.encryption + self.verification).hex()[:16]


class PrivateKey:
    def __init__(self, decryption: bytes, signing: bytes):
        self.decryption = decryption
        self.signing = signing


class KeyPair:
    """
    Raw key bytes only. The cryptography key objects are rebuilt on use, which
    keeps actor states plain data that can be copied and serialized.
    """

    def __init__(self, public: PublicKey, private: PrivateKey, owner: object):
        self.public = public
        self.private = private
        self.owner = owner


def generate_keypair(owner: object, rng: RandomSource) -> KeyPair:
    enc_private = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    sig_private = Ed25519PrivateKey.from_private_bytes(rng.bytes(32))

    raw_private = PrivateKey(
        decryption=enc_private.private_bytes_raw(),
        signing=sig_private.private_bytes_raw(),
    )
    raw_public = PublicKey(
        encryption=enc_private.public_key().public_bytes(
            Encoding.Raw, PublicFormat.Raw
        ),
        verification=sig_private.public_key().public_bytes(
            Encoding.Raw, PublicFormat.Raw
        ),
    )
    return KeyPair(raw_public, raw_private, owner)
