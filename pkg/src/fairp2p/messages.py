"""Canonical wire codec and signed-payload layouts.

Every message is tag(1) || sid(32) || index(8) || count(2) || (len(4) || part)*.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

from .crypto.hashing import H, u64
from .errors import DecodeError

SID_BYTES = 32
NO_SID = bytes(SID_BYTES)


class Kind(IntEnum):
    # off-chain, party to party
    SELL = 0x01
    MTREE = 0x02
    DELIVER = 0x03
    RECEIPT = 0x04
    KEY_REQ = 0x05
    KEY_REVEAL = 0x06
    # transactions, party to contract
    START = 0x10
    JOIN = 0x11
    PREPARED = 0x12
    CONSUME = 0x13
    DELIVERED = 0x14
    VFD_PROOF = 0x15
    REVEAL_KEYS = 0x16
    WRONG_RK = 0x17
    POM_DOWNLOAD = 0x18
    POM_STREAM = 0x19
    RECEIVED = 0x1A
    CLAIM_DELIVERY = 0x1B
    CLAIM_REVEALING = 0x1C
    RESET = 0x1D
    WITHDRAW = 0x1E
    # contract events
    STARTED = 0x20
    JOINED = 0x21
    READY = 0x22
    INITIATED = 0x23
    GET_VFD_PROOF = 0x24
    REVEALING = 0x25
    REVEALED = 0x26
    SOLD = 0x27
    NOT_SOLD = 0x28
    RECEIVED_EV = 0x29
    PAYING_DELIVERY = 0x2A
    PAYING_REVEALING = 0x2B
    CLOSED = 0x2C


OFFCHAIN = frozenset(k for k in Kind if k < 0x10)
TRANSACTIONS = frozenset(k for k in Kind if 0x10 <= k < 0x20)
EVENTS = frozenset(k for k in Kind if k >= 0x20)

# None means a variable number of parts (checked by the handler).
PART_COUNTS: dict[Kind, int | None] = {
    Kind.SELL: None,
    Kind.MTREE: 2,             # concatenated leaf digests, signature
    Kind.DELIVER: 2,           # ciphertext, chunk signature
    Kind.RECEIPT: 1,
    Kind.KEY_REQ: 1,
    Kind.KEY_REVEAL: 2,        # key, key signature
    Kind.START: 7,             # pk_P, root, theta, n, B_P, B_C, B_pf
    Kind.JOIN: 1,
    Kind.PREPARED: 0,
    Kind.CONSUME: 2,           # pk_C, vpk_C (empty when streaming)
    Kind.DELIVERED: 0,
    Kind.VFD_PROOF: 1,         # receipt signature, empty for no receipt
    Kind.REVEAL_KEYS: 1,
    Kind.WRONG_RK: 0,
    Kind.POM_DOWNLOAD: 8,      # j, c_i, sig, H(m_i), merkle proof, rk_j point, erk, proof
    Kind.POM_STREAM: 6,        # c_i, sig, k_i, key sig, H(m_i), merkle proof
    Kind.RECEIVED: 0,
    Kind.CLAIM_DELIVERY: 1,
    Kind.CLAIM_REVEALING: 1,
    Kind.RESET: 0,
    Kind.WITHDRAW: 0,
    Kind.STARTED: 7,
    Kind.JOINED: 1,
    Kind.READY: 0,
    Kind.INITIATED: 2,
    Kind.GET_VFD_PROOF: 0,
    Kind.REVEALING: 0,         # ctr travels in the index field
    Kind.REVEALED: 1,
    Kind.SOLD: 0,
    Kind.NOT_SOLD: 0,
    Kind.RECEIVED_EV: 0,
    Kind.PAYING_DELIVERY: 0,
    Kind.PAYING_REVEALING: 0,
    Kind.CLOSED: 0,
}

_HEADER = 1 + SID_BYTES + 8 + 2


@dataclass(frozen=True)
class Message:
    kind: Kind
    sid: bytes = NO_SID
    index: int = 0
    parts: tuple[bytes, ...] = field(default_factory=tuple)

    def encode(self) -> bytes:
        out = [bytes([self.kind]), self.sid, u64(self.index), len(self.parts).to_bytes(2, "big")]
        for p in self.parts:
            out.append(len(p).to_bytes(4, "big"))
            out.append(p)
        return b"".join(out)

    def __len__(self) -> int:
        return _HEADER + sum(4 + len(p) for p in self.parts)


def decode(data: bytes) -> Message:
    if len(data) < _HEADER:
        raise DecodeError("truncated header")
    try:
        kind = Kind(data[0])
    except ValueError:
        raise DecodeError(f"unknown kind tag {data[0]:#04x}") from None
    sid = data[1:1 + SID_BYTES]
    index = int.from_bytes(data[33:41], "big")
    count = int.from_bytes(data[41:43], "big")
    expected = PART_COUNTS[kind]
    if expected is not None and count != expected:
        raise DecodeError(f"{kind.name} carries {count} parts, expected {expected}")
    parts = []
    off = _HEADER
    for _ in range(count):
        if off + 4 > len(data):
            raise DecodeError("truncated part length")
        size = int.from_bytes(data[off:off + 4], "big")
        off += 4
        if off + size > len(data):
            raise DecodeError("truncated part")
        parts.append(data[off:off + size])
        off += size
    if off != len(data):
        raise DecodeError("trailing bytes")
    return Message(kind, sid, index, tuple(parts))


# Signed payloads. The first byte is a domain tag so a signature made for one
# purpose never verifies as another.
SIG_CHUNK = b"\x01"
SIG_MTREE = b"\x02"
SIG_RECEIPT = b"\x03"
SIG_KEYREQ = b"\x04"
SIG_KEY = b"\x05"


def contract_address(pk_provider: bytes) -> bytes:
    return H(b"contract", pk_provider)


def content_id(root: bytes, address: bytes) -> bytes:
    return H(root, address)


def session_id(root: bytes, address: bytes, pk_d: bytes, pk_c: bytes, nonce: int) -> bytes:
    return H(root, address, pk_d, pk_c, u64(nonce))


def chunk_payload(cid: bytes, i: int, c: bytes) -> bytes:
    # Chunks are signed once at prepare time, before any session exists,
    # so they bind the content id rather than a session id.
    return SIG_CHUNK + cid + u64(i) + c


def mtree_payload(root: bytes, n: int) -> bytes:
    return SIG_MTREE + root + u64(n)


def receipt_payload(sid: bytes, i: int, pk_c: bytes, pk_x: bytes) -> bytes:
    return SIG_RECEIPT + sid + u64(i) + pk_c + pk_x


def keyreq_payload(sid: bytes, i: int, pk_c: bytes) -> bytes:
    return SIG_KEYREQ + sid + u64(i) + pk_c


def key_payload(sid: bytes, i: int, k: bytes) -> bytes:
    return SIG_KEY + sid + u64(i) + k
