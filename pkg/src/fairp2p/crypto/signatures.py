"""Ed25519 signatures behind a (keygen, sign, verify) contract."""
from dataclasses import dataclass
from functools import lru_cache
import random

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives import serialization

SIG_SCHEME = "ed25519"
PK_SIZE = 32
SIG_SIZE = 64


@dataclass(frozen=True)
class SigKeyPair:
    secret: bytes
    public: bytes

    @classmethod
    def generate(cls, rng: random.Random) -> "SigKeyPair":
        seed = rng.getrandbits(256).to_bytes(32, "big")
        pub = _private(seed).public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return cls(seed, pub)


@lru_cache(maxsize=64)
def _private(seed: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(seed)


@lru_cache(maxsize=256)
def _public(pk: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(pk)


def sign(message: bytes, sk: bytes) -> bytes:
    return _private(sk).sign(message)


def verify(message: bytes, sig: bytes, pk: bytes) -> bool:
    if len(pk) != PK_SIZE or len(sig) != SIG_SIZE:
        return False
    try:
        _public(pk).verify(sig, message)
    except (InvalidSignature, ValueError):
        return False
    return True
