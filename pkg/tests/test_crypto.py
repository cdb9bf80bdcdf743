import pytest

from shared.constants import NONCE_MODULUS, NONCE_SIZE, SYM_KEY_SIZE
from shared.crypto.dh import (
    STANDARD_GROUP,
    TOY_GROUP,
    DhParams,
    check_share,
    dh_gen,
    dh_kdf,
    dh_share,
    dh_shared,
)
from shared.crypto.envelope import (
    Envelope,
    pk_decrypt,
    pk_encrypt,
    psk_decrypt,
    psk_encrypt,
    sign,
    verify,
)
from shared.crypto.keys import (
    RandomSource,
    gen_nonce,
    gen_symkey,
    generate_keypair,
    inc,
    nonce_offset,
)
from shared.crypto.symmetric import derive_card_key, sym_decrypt, sym_encrypt
from shared.errors import AuthFail, DegenerateShare, EmptyPassword
from shared.messages.types import PrincipalId, Role


def flip_bit(data: bytes, position: int) -> bytes:
    mutated = bytearray(data)
    mutated[position] ^= 0x01
    return bytes(mutated)


@pytest.mark.parametrize("plaintext", [b"", b"x", b"a longer message " * 20])
def test_sym_round_trip(rng: RandomSource, plaintext: bytes):
    key = gen_symkey(rng)
    assert sym_decrypt(key, sym_encrypt(key, plaintext, rng)) == plaintext


def test_sym_decrypt_rejects_tampering(rng: RandomSource):
    key = gen_symkey(rng)
    ct = sym_encrypt(key, b"payload", rng)
    for position in range(len(ct)):
        with pytest.raises(AuthFail):
            sym_decrypt(key, flip_bit(ct, position))


def test_sym_decrypt_rejects_wrong_key_and_truncation(rng: RandomSource):
    key = gen_symkey(rng)
    other = gen_symkey(rng)
    ct = sym_encrypt(key, b"payload", rng)
    with pytest.raises(AuthFail):
        sym_decrypt(other, ct)
    with pytest.raises(AuthFail):
        sym_decrypt(key, ct[:10])


def test_sym_encrypt_rejects_bad_key_size(rng: RandomSource):
    with pytest.raises(ValueError):
        sym_encrypt(b"short", b"payload", rng)


def test_nonce_is_usable_as_key(rng: RandomSource):
    nonce = gen_nonce(rng)
    assert len(nonce) == SYM_KEY_SIZE == NONCE_SIZE
    assert sym_decrypt(nonce, sym_encrypt(nonce, b"m", rng)) == b"m"


def test_inc_wraps_and_offsets():
    top = (NONCE_MODULUS - 1).to_bytes(NONCE_SIZE, "big")
    assert inc(top) == bytes(NONCE_SIZE)
    base = (5).to_bytes(NONCE_SIZE, "big")
    assert inc(base, 3) == (8).to_bytes(NONCE_SIZE, "big")
    assert nonce_offset(base, inc(base, 4)) == 4
    assert nonce_offset(top, inc(top, 2)) == 2


def test_random_source_is_deterministic():
    first = RandomSource(99)
    second = RandomSource(99)
    assert [first.bytes(16) for _ in range(5)] == [second.bytes(16) for _ in range(5)]
    assert RandomSource(99).fork("adversary").bytes(8) != RandomSource(99).bytes(8)


def test_pk_envelope(rng: RandomSource):
    owner = PrincipalId(Role.EMS, "ems")
    keys = generate_keypair(owner, rng)
    other = generate_keypair(owner, rng)
    env = pk_encrypt(keys.public, b"long payload " * 40, rng)

    assert pk_decrypt(keys.private, env) == b"long payload " * 40
    with pytest.raises(AuthFail):
        pk_decrypt(other.private, env)
    with pytest.raises(AuthFail):
        pk_decrypt(keys.private, Envelope(flip_bit(env.wrapped_key, 40), env.body))
    with pytest.raises(AuthFail):
        pk_decrypt(keys.private, Envelope(env.wrapped_key, flip_bit(env.body, 3)))
    with pytest.raises(AuthFail):
        pk_decrypt(keys.private, Envelope(env.wrapped_key[:20], env.body))


def test_psk_envelope(rng: RandomSource):
    key = gen_symkey(rng)
    env = psk_encrypt(key, b"delegation", rng)
    assert psk_decrypt(key, env) == b"delegation"
    with pytest.raises(AuthFail):
        psk_decrypt(gen_symkey(rng), env)


def test_sign_and_verify(rng: RandomSource):
    keys = generate_keypair(PrincipalId(Role.SM, "sm"), rng)
    other = generate_keypair(PrincipalId(Role.SM, "sm2"), rng)
    signature = sign(keys.private, b"SM:sm")

    assert verify(keys.public, b"SM:sm", signature)
    assert not verify(keys.public, b"SM:sm2", signature)
    assert not verify(other.public, b"SM:sm", signature)
    assert not verify(keys.public, b"SM:sm", b"garbage")


def test_card_key_needs_password():
    salt = bytes(16)
    assert len(derive_card_key(b"secret", salt, 10)) == SYM_KEY_SIZE
    assert derive_card_key(b"secret", salt, 10) != derive_card_key(b"Secret", salt, 10)
    with pytest.raises(EmptyPassword):
        derive_card_key(b"", salt, 10)


def test_dh_params_validate_generator():
    with pytest.raises(ValueError):
        DhParams(23, 1)
    with pytest.raises(ValueError):
        DhParams(23, 22)


def test_dh_toy_group_exhaustive():
    """Every secret pair of the toy group against the modular-exponentiation oracle"""
    p, g = TOY_GROUP.p, TOY_GROUP.g
    for a in range(2, p - 1):
        for b in range(2, p - 1):
            share_a = dh_share(TOY_GROUP, a)
            share_b = dh_share(TOY_GROUP, b)
            assert share_a == pow(g, a, p)
            # g^11 = p - 1 for the toy group
            if share_b == p - 1:
                with pytest.raises(DegenerateShare):
                    dh_shared(TOY_GROUP, a, share_b)
                continue
            if share_a == p - 1:
                with pytest.raises(DegenerateShare):
                    dh_shared(TOY_GROUP, b, share_a)
                continue
            expected = dh_kdf(TOY_GROUP, pow(g, a * b, p))
            assert dh_shared(TOY_GROUP, a, share_b) == expected
            assert dh_shared(TOY_GROUP, b, share_a) == expected


@pytest.mark.parametrize("share", [0, 1, 22, 23, 100])
def test_dh_rejects_degenerate_shares(share: int):
    with pytest.raises(DegenerateShare):
        check_share(TOY_GROUP, share)


def test_dh_standard_group_agrees(rng: RandomSource):
    secret_a, share_a = dh_gen(STANDARD_GROUP, rng)
    secret_b, share_b = dh_gen(STANDARD_GROUP, rng)
    assert STANDARD_GROUP.p.bit_length() == 2048
    key_a = dh_shared(STANDARD_GROUP, secret_a, share_b)
    assert key_a == dh_shared(STANDARD_GROUP, secret_b, share_a)
    assert len(key_a) == SYM_KEY_SIZE


def test_dh_gen_avoids_degenerate_shares(rng: RandomSource):
    for _ in range(200):
        secret, share = dh_gen(TOY_GROUP, rng)
        check_share(TOY_GROUP, share)
        assert share == dh_share(TOY_GROUP, secret)
