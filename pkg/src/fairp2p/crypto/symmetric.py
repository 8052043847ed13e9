"""Hash-stream cipher: block j of a chunk is XORed with H(key || j)."""
from ..errors import MalformedChunk
from .hashing import H, u64

BLOCK = 32


def keystream(key: bytes, t: int) -> bytes:
    return b"".join(H(key, u64(j)) for j in range(1, t + 1))


def sym_encrypt(key: bytes, chunk: bytes, t: int | None = None) -> bytes:
    if len(key) != 32:
        raise MalformedChunk("symmetric key must be 32 bytes")
    if len(chunk) % BLOCK:
        raise MalformedChunk(f"chunk length {len(chunk)} is not a multiple of {BLOCK}")
    if t is None:
        t = len(chunk) // BLOCK
    elif t * BLOCK != len(chunk):
        raise MalformedChunk(f"expected {t} blocks, got {len(chunk) // BLOCK}")
    if t == 0:
        return b""
    ks = keystream(key, t)
    x = int.from_bytes(chunk, "big") ^ int.from_bytes(ks, "big")
    return x.to_bytes(len(chunk), "big")


# XOR stream: decryption is the same map.
sym_decrypt = sym_encrypt
