from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.pbkdf2 import PBKDF2HMAC

from shared.constants import (
    AEAD_NONCE_SIZE,
    AEAD_TAG_SIZE,
    DEFAULT_KDF_ITERATIONS,
    SYM_KEY_SIZE,
)
from shared.crypto.keys import RandomSource, SymKey
from shared.errors import AuthFail, EmptyPassword


def check_key(key: bytes):
    if len(key) != SYM_KEY_SIZE:
        raise ValueError(
            f"Symmetric keys are {SYM_KEY_SIZE} bytes, got {len(key)} bytes"
        )


def sym_encrypt(key: bytes, plaintext: bytes, rng: RandomSource) -> bytes:
    """AES-128-GCM, output is iv || ciphertext || tag"""
    check_key(key)
    iv = rng.bytes(AEAD_NONCE_SIZE)
    return iv + AESGCM(key).encrypt(iv, plaintext, None)


def sym_decrypt(key: bytes, ciphertext: bytes) -> bytes:
    if len(key) != SYM_KEY_SIZE:
        raise AuthFail("key has the wrong size")
    if len(ciphertext) < AEAD_NONCE_SIZE + AEAD_TAG_SIZE:
        raise AuthFail("ciphertext too short")
    iv = ciphertext[:AEAD_NONCE_SIZE]
    try:
        return AESGCM(key).decrypt(iv, ciphertext[AEAD_NONCE_SIZE:], None)
    except InvalidTag:
        raise AuthFail("authentication tag mismatch")


def derive_card_key(
    password: bytes, salt: bytes, iterations: int = DEFAULT_KDF_ITERATIONS
) -> SymKey:
    if not password:
        raise EmptyPassword("card passwords cannot be empty")
    kdf = PBKDF2HMAC(
        algorithm=hashes.SHA256(),
        length=SYM_KEY_SIZE,
        salt=salt,
        iterations=iterations,
    )
    return SymKey(kdf.derive(password))
