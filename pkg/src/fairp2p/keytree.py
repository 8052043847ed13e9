"""Hash-derived key tree over chunk keys and prefix reveal sets.

The tree is heap-indexed: node i has children 2i+1 (bit 0) and 2i+2 (bit 1),
and chunk i (1-based) is keyed by the leaf at n-2+i.
"""
from __future__ import annotations

from dataclasses import dataclass
import random

from .crypto.hashing import DIGEST_SIZE, H
from .crypto.vpke import (
    CIPHERTEXT_BYTES, Ciphertext, decrypt_value, encrypt_value,
)
from .errors import DecodeError, InvalidTree
from .merkle import is_power_of_two

_BIT = (b"\x00", b"\x01")


def _expand(n: int, root: bytes) -> list[bytes]:
    kt = [root]
    for i in range(n - 1):
        kt.append(H(kt[i], _BIT[0]))
        kt.append(H(kt[i], _BIT[1]))
    return kt


def gen_sub_keys(n: int, mk: bytes) -> list[bytes]:
    if not is_power_of_two(n):
        raise InvalidTree(f"leaf count {n} is not a power of two")
    return _expand(n, H(mk))


def subtree_from_node(n: int, value: bytes) -> list[bytes]:
    """Same recurrence, but ``value`` is the subtree root itself (not hashed)."""
    if not is_power_of_two(n):
        raise InvalidTree(f"leaf count {n} is not a power of two")
    return _expand(n, value)


def leaf_keys(kt: list[bytes]) -> list[bytes]:
    n = (len(kt) + 1) // 2
    return kt[n - 1:]


def _depth_below(n: int, pos: int) -> int:
    # log n - floor(log(pos + 1)): how many levels between node pos and the leaves
    return n.bit_length() - (pos + 1).bit_length()


def leaf_span(n: int, pos: int) -> tuple[int, int]:
    """Inclusive range of leaf positions under node ``pos``."""
    lo = hi = pos
    for _ in range(_depth_below(n, pos)):
        lo, hi = 2 * lo + 1, 2 * hi + 2
    return lo, hi


@dataclass(frozen=True)
class RevealSet:
    items: tuple[tuple[int, bytes], ...]

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def encode(self) -> bytes:
        out = [bytes([len(self.items)])]
        for pos, value in self.items:
            out.append(pos.to_bytes(8, "big"))
            out.append(value)
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "RevealSet":
        if not data:
            raise DecodeError("empty reveal set")
        count = data[0]
        width = 8 + DIGEST_SIZE
        if len(data) != 1 + count * width:
            raise DecodeError("reveal set length mismatch")
        items = []
        for k in range(count):
            off = 1 + k * width
            items.append((int.from_bytes(data[off:off + 8], "big"),
                          data[off + 8:off + width]))
        return cls(tuple(items))


def reveal_from_tree(kt: list[bytes], ctr: int) -> RevealSet:
    n = (len(kt) + 1) // 2
    if not 1 <= ctr <= n:
        raise ValueError(f"ctr {ctr} outside [1, {n}]")
    if ctr == 1:
        return RevealSet(((n - 1, kt[n - 1]),))
    ind = [n - 1 + i for i in range(ctr)]
    while True:
        t = []
        for j in range(len(ind) // 2):
            a, b = ind[2 * j], ind[2 * j + 1]
            # siblings share a parent only when a is a left child and b = a + 1
            if a % 2 == 1 and b == a + 1:
                t.append((a - 1) // 2)
            else:
                t.extend((a, b))
        if len(ind) % 2:
            t.append(ind[-1])
        if len(t) == len(ind):
            break
        ind = t
    return RevealSet(tuple((p, kt[p]) for p in ind))


def reveal_keys(n: int, ctr: int, mk: bytes) -> RevealSet:
    return reveal_from_tree(gen_sub_keys(n, mk), ctr)


def validate_rkeys(n: int, ctr: int, positions) -> bool:
    """True iff the subtrees at ``positions`` tile leaves n-1..n+ctr-2 exactly.

    Positions must be strictly ascending with disjoint subtrees, so neither
    over-reveal nor duplicate cover is accepted.
    """
    if not is_power_of_two(n) or not 1 <= ctr <= n:
        return False
    positions = list(positions)
    if not positions:
        return False
    expect = n - 1
    prev = -1
    for pos in positions:
        if not isinstance(pos, int) or pos <= prev or not 0 <= pos <= 2 * n - 2:
            return False
        prev = pos
        lo, hi = leaf_span(n, pos)
        if lo != expect:
            return False
        expect = hi + 1
    return expect == n + ctr - 1


def recover_keys(n: int, ctr: int, rk: RevealSet) -> list[bytes]:
    if not validate_rkeys(n, ctr, rk.positions):
        raise InvalidTree("reveal set does not cover the requested prefix")
    ks = []
    for pos, value in rk.items:
        size = 1 << _depth_below(n, pos)
        ks.extend(leaf_keys(subtree_from_node(size, value)))
    return ks


def recover_chunk_key(i: int, j: int, n: int, rk: RevealSet) -> bytes | None:
    if not 0 <= j < len(rk):
        return None
    x, y = rk.items[j]
    ind = n + i - 2
    if ind < x:
        return None
    path = []
    while ind > x:
        path.append(0 if ind % 2 else 1)
        ind = (ind - 1) // 2
    if ind != x:
        return None
    for bit in reversed(path):
        y = H(y, _BIT[bit])
    return y


@dataclass(frozen=True)
class EncryptedRevealSet:
    items: tuple[tuple[int, Ciphertext], ...]

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.items)

    def __len__(self) -> int:
        return len(self.items)

    def encode(self) -> bytes:
        out = [bytes([len(self.items)])]
        for pos, ct in self.items:
            out.append(pos.to_bytes(8, "big"))
            out.append(ct.encode())
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "EncryptedRevealSet":
        if not data:
            raise DecodeError("empty encrypted reveal set")
        count = data[0]
        width = 8 + CIPHERTEXT_BYTES
        if len(data) != 1 + count * width:
            raise DecodeError("encrypted reveal set length mismatch")
        items = []
        for k in range(count):
            off = 1 + k * width
            items.append((int.from_bytes(data[off:off + 8], "big"),
                          Ciphertext.decode(data[off + 8:off + width])))
        return cls(tuple(items))

    def digest(self) -> bytes:
        return H(self.encode())


def encrypt_reveal_set(rk: RevealSet, vpk, rng: random.Random) -> EncryptedRevealSet:
    return EncryptedRevealSet(tuple((p, encrypt_value(vpk, v, rng)) for p, v in rk.items))


def decrypt_reveal_set(erk: EncryptedRevealSet, vsk: int) -> RevealSet:
    return RevealSet(tuple((p, decrypt_value(vsk, ct)) for p, ct in erk.items))
