"""ElGamal over the curve group with a verifiable-decryption proof.

The proof is a Schnorr-style argument that log_G(h) == log_c1(c2 - m),
made non-interactive with a Fiat-Shamir challenge.
"""
from __future__ import annotations

from dataclasses import dataclass
import random

from ..errors import DecodeError, EncodeFailure
from .ec import G, IDENTITY, P, A, B, POINT_BYTES, Q, Point, sqrt_mod_p
from .hashing import H

SCALAR_BYTES = 48
CIPHERTEXT_BYTES = 2 * POINT_BYTES
PROOF_BYTES = 2 * POINT_BYTES + SCALAR_BYTES


def random_scalar(rng: random.Random) -> int:
    return rng.randrange(1, Q)


@dataclass(frozen=True)
class VpkeKeyPair:
    secret: int
    public: Point

    @classmethod
    def from_secret(cls, k: int) -> "VpkeKeyPair":
        if not 1 <= k < Q:
            raise ValueError("secret key must lie in [1, q-1]")
        return cls(k, G * k)


def vpke_keygen(rng: random.Random) -> VpkeKeyPair:
    return VpkeKeyPair.from_secret(random_scalar(rng))


@dataclass(frozen=True)
class Ciphertext:
    c1: Point
    c2: Point

    def encode(self) -> bytes:
        return self.c1.encode() + self.c2.encode()

    @classmethod
    def decode(cls, data: bytes) -> "Ciphertext":
        if len(data) != CIPHERTEXT_BYTES:
            raise DecodeError("bad ciphertext length")
        return cls(Point.decode(data[:POINT_BYTES]), Point.decode(data[POINT_BYTES:]))


@dataclass(frozen=True)
class VpkeProof:
    A: Point
    B: Point
    Z: int

    def encode(self) -> bytes:
        return self.A.encode() + self.B.encode() + self.Z.to_bytes(SCALAR_BYTES, "big")

    @classmethod
    def decode(cls, data: bytes) -> "VpkeProof":
        if len(data) != PROOF_BYTES:
            raise DecodeError("bad proof length")
        z = int.from_bytes(data[2 * POINT_BYTES:], "big")
        if z >= Q:
            raise DecodeError("response scalar out of range")
        return cls(Point.decode(data[:POINT_BYTES]),
                   Point.decode(data[POINT_BYTES:2 * POINT_BYTES]), z)


def encode_to_group(m: bytes) -> Point:
    """Koblitz-style try-and-increment: x = m || counter, first x on the curve wins."""
    if len(m) != 32:
        raise ValueError("only 32-byte values can be encoded")
    base = int.from_bytes(m, "big") << 8
    for ctr in range(256):
        x = base | ctr
        y = sqrt_mod_p(x * x * x + A * x + B)
        if y is not None:
            if y & 1:
                y = P - y
            return Point(x, y, check=False)
    raise EncodeFailure("no curve point for this value in 256 tries")


def decode_from_group(pt: Point) -> bytes:
    if pt.is_identity or pt.x >> 264:
        raise DecodeError("point does not carry an encoded 32-byte value")
    return (pt.x >> 8).to_bytes(32, "big")


def venc(h: Point, m: Point, r: int) -> Ciphertext:
    if not 1 <= r < Q:
        raise ValueError("encryption randomness must lie in [1, q-1]")
    return Ciphertext(G * r, m + h * r)


def vdec(k: int, ct: Ciphertext) -> Point:
    return ct.c2 - ct.c1 * k


def _challenge(h: Point, ct: Ciphertext, m: Point, a: Point, b: Point) -> int:
    digest = H(G.encode(), a.encode(), b.encode(), h.encode(),
               ct.c1.encode(), ct.c2.encode(), m.encode())
    return int.from_bytes(digest, "big") % Q


def prove_pke(k: int, ct: Ciphertext, x: int) -> tuple[Point, VpkeProof]:
    """Decrypt ``ct`` and prove the decryption is correct, with nonce ``x``."""
    m = vdec(k, ct)
    a = G * x
    b = ct.c1 * x
    c = _challenge(G * k, ct, m, a, b)
    return m, VpkeProof(a, b, (x + k * c) % Q)


def verify_pke(h: Point, ct: Ciphertext, m: Point, proof: VpkeProof) -> bool:
    if not isinstance(proof.Z, int) or not 0 <= proof.Z < Q:
        return False
    c = _challenge(h, ct, m, proof.A, proof.B)
    if G * proof.Z != proof.A + h * c:
        return False
    return m * c + ct.c1 * proof.Z == proof.B + ct.c2 * c


def encrypt_value(h: Point, value: bytes, rng: random.Random) -> Ciphertext:
    return venc(h, encode_to_group(value), random_scalar(rng))


def decrypt_value(k: int, ct: Ciphertext) -> bytes:
    return decode_from_group(vdec(k, ct))


__all__ = [
    "IDENTITY", "Ciphertext", "VpkeKeyPair", "VpkeProof", "decode_from_group",
    "decrypt_value", "encode_to_group", "encrypt_value", "prove_pke",
    "random_scalar", "vdec", "venc", "verify_pke", "vpke_keygen",
]
