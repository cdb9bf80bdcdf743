"""
Public-key encryption of arbitrary-length payloads and detached signatures.

Envelope layout:
    wrapped_key = ephemeral X25519 public (32 bytes) || sym_encrypt(kek, content_key)
    body        = sym_encrypt(content_key, plaintext)

where kek is HKDF over the X25519 shared secret. The pre-shared variant
wraps the content key directly under a SymKey and has no ephemeral part.
"""

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from shared.constants import SYM_KEY_SIZE
from shared.crypto.keys import PrivateKey, PublicKey, RandomSource, gen_symkey
from shared.crypto.symmetric import sym_decrypt, sym_encrypt
from shared.errors import AuthFail

X25519_SIZE = 32
KEK_LABEL = b"trustdeploy envelope kek"


class Envelope:
    def __init__(self, wrapped_key: bytes, body: bytes):
        self.wrapped_key = wrapped_key
        self.body = body

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Envelope):
            return False
        return self.wrapped_key == other.wrapped_key and self.body == other.body

    def __hash__(self) -> int:
        return hash((self.wrapped_key, self.body))

    def __repr__(self) -> str:
        return f"Envelope(wrapped_key={len(self.wrapped_key)}B, body={len(self.body)}B)"


def _derive_kek(shared_secret: bytes, ephemeral_public: bytes, recipient: bytes):
    hkdf = HKDF(
        algorithm=hashes.SHA256(),
        length=SYM_KEY_SIZE,
        salt=None,
        info=KEK_LABEL + ephemeral_public + recipient,
    )
    return hkdf.derive(shared_secret)


def pk_encrypt(pub: PublicKey, plaintext: bytes, rng: RandomSource) -> Envelope:
    ephemeral = X25519PrivateKey.from_private_bytes(rng.bytes(X25519_SIZE))
    ephemeral_public = ephemeral.public_key().public_bytes(
        Encoding.Raw, PublicFormat.Raw
    )
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(pub.encryption))
    kek = _derive_kek(shared, ephemeral_public, pub.encryption)

    content_key = gen_symkey(rng)
    wrapped_key = ephemeral_public + sym_encrypt(kek, content_key, rng)
    body = sym_encrypt(content_key, plaintext, rng)
    return Envelope(wrapped_key, body)


def pk_decrypt(priv: PrivateKey, env: Envelope) -> bytes:
    if len(env.wrapped_key) <= X25519_SIZE:
        raise AuthFail("wrapped key too short")
    ephemeral_public = env.wrapped_key[:X25519_SIZE]
    own = X25519PrivateKey.from_private_bytes(priv.decryption)
    own_public = own.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
    try:
        shared = own.exchange(X25519PublicKey.from_public_bytes(ephemeral_public))
    except ValueError:
        # all-zero shared secret from a low-order point
        raise AuthFail("degenerate ephemeral key")
    kek = _derive_kek(shared, ephemeral_public, own_public)
    content_key = sym_decrypt(kek, env.wrapped_key[X25519_SIZE:])
    return sym_decrypt(content_key, env.body)


def psk_encrypt(key: bytes, plaintext: bytes, rng: RandomSource) -> Envelope:
    content_key = gen_symkey(rng)
    return Envelope(
        sym_encrypt(key, content_key, rng), sym_encrypt(content_key, plaintext, rng)
    )


def psk_decrypt(key: bytes, env: Envelope) -> bytes:
    content_key = sym_decrypt(key, env.wrapped_key)
    if len(content_key) != SYM_KEY_SIZE:
        raise AuthFail("wrapped content key has the wrong size")
    return sym_decrypt(content_key, env.body)


def sign(priv: PrivateKey, message: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(priv.signing).sign(message)


def verify(pub: PublicKey, message: bytes, signature: bytes) -> bool:
    try:
        key = Ed25519PublicKey.from_public_bytes(pub.verification)
        key.verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True
