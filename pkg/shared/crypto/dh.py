from typing import Tuple

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from shared.constants import SYM_KEY_SIZE
from shared.crypto.keys import RandomSource, SymKey
from shared.errors import DegenerateShare

DH_KDF_LABEL = b"trustdeploy dh session key"

# RFC 3526 group 14
MODP_2048_HEX = (
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3D"
    "C2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D"
    "670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9"
    "DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF"
)


class DhParams:
    def __init__(self, p: int, g: int):
        if not 2 <= g <= p - 2:
            raise ValueError(f"Generator must lie in [2, p-2], got g={g} for p={p}")
        self.p = p
        self.g = g

    def element_size(self) -> int:
        return (self.p.bit_length() + 7) // 8

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DhParams):
            return False
        return self.p == other.p and self.g == other.g

    def __repr__(self) -> str:
        return f"DhParams(p={self.p.bit_length()} bits, g={self.g})"


TOY_GROUP = DhParams(23, 5)
STANDARD_GROUP = DhParams(int(MODP_2048_HEX, 16), 2)


def dh_share(params: DhParams, secret: int) -> int:
    return pow(params.g, secret, params.p)


def dh_gen(params: DhParams, rng: RandomSource) -> Tuple[int, int]:
    """Secret and share, redrawn until the share passes check_share"""
    while True:
        secret = rng.randint(2, params.p - 2)
        share = dh_share(params, secret)
        if 2 <= share <= params.p - 2:
            return secret, share


def check_share(params: DhParams, share: int):
    if not 2 <= share <= params.p - 2:
        raise DegenerateShare(f"share {share} outside [2, p-2]")


def dh_kdf(params: DhParams, element: int) -> SymKey:
    hkdf = HKDF(
        algorithm=hashes.SHA256(),
        length=SYM_KEY_SIZE,
        salt=None,
        info=DH_KDF_LABEL,
    )
    return SymKey(hkdf.derive(element.to_bytes(params.element_size(), "big")))


def dh_shared(params: DhParams, secret: int, peer_share: int) -> SymKey:
    check_share(params, peer_share)
    return dh_kdf(params, pow(peer_share, secret, params.p))
