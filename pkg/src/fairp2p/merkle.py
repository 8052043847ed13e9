"""Binary Merkle tree over content chunks.

Leaves are H(chunk), internal nodes H(left || right). Leaf indices are
1-based at the API surface.
"""
from __future__ import annotations

from dataclasses import dataclass

from .crypto.hashing import DIGEST_SIZE, H
from .errors import DecodeError, InvalidTree

LEFT = 0  # sibling sits on the left
RIGHT = 1


def is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class MerkleTree:
    levels: tuple[tuple[bytes, ...], ...]  # levels[0] = leaves, levels[-1] = (root,)

    @property
    def n(self) -> int:
        return len(self.levels[0])

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def leaves(self) -> tuple[bytes, ...]:
        return self.levels[0]

    def leaf(self, i: int) -> bytes:
        return self.levels[0][i - 1]


@dataclass(frozen=True)
class MerkleProof:
    index: int
    path: tuple[tuple[int, bytes], ...]  # (side, sibling digest), bottom-up

    def encode(self) -> bytes:
        out = [self.index.to_bytes(8, "big"), bytes([len(self.path)])]
        for side, digest in self.path:
            out.append(bytes([side]))
            out.append(digest)
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "MerkleProof":
        if len(data) < 9:
            raise DecodeError("truncated merkle proof")
        depth = data[8]
        if len(data) != 9 + depth * (1 + DIGEST_SIZE):
            raise DecodeError("merkle proof length mismatch")
        path = []
        off = 9
        for _ in range(depth):
            side = data[off]
            if side not in (LEFT, RIGHT):
                raise DecodeError("bad side byte")
            path.append((side, data[off + 1: off + 1 + DIGEST_SIZE]))
            off += 1 + DIGEST_SIZE
        return cls(int.from_bytes(data[:8], "big"), tuple(path))


def tree_from_leaves(leaves) -> MerkleTree:
    leaves = tuple(leaves)
    if not is_power_of_two(len(leaves)):
        raise InvalidTree(f"leaf count {len(leaves)} is not a power of two")
    levels = [leaves]
    while len(levels[-1]) > 1:
        cur = levels[-1]
        levels.append(tuple(H(cur[k], cur[k + 1]) for k in range(0, len(cur), 2)))
    return MerkleTree(tuple(levels))


def build_mt(chunks) -> MerkleTree:
    return tree_from_leaves(H(c) for c in chunks)


def gen_mtp(mt: MerkleTree, i: int) -> MerkleProof:
    if not 1 <= i <= mt.n:
        raise IndexError(f"leaf index {i} outside [1, {mt.n}]")
    pos = i - 1
    path = []
    for level in mt.levels[:-1]:
        if pos & 1:
            path.append((LEFT, level[pos - 1]))
        else:
            path.append((RIGHT, level[pos + 1]))
        pos >>= 1
    return MerkleProof(i, tuple(path))


def verify_mtp(root: bytes, i: int, proof: MerkleProof, leaf: bytes) -> bool:
    # The side bits must spell out the claimed position, so a proof cannot
    # be replayed at another index.
    if not isinstance(i, int) or i < 1 or proof.index != i:
        return False
    depth = len(proof.path)
    if i > 1 << depth:
        return False
    pos = i - 1
    acc = leaf
    for side, sibling in proof.path:
        if len(sibling) != DIGEST_SIZE or side != (LEFT if pos & 1 else RIGHT):
            return False
        acc = H(sibling, acc) if side == LEFT else H(acc, sibling)
        pos >>= 1
    return acc == root
