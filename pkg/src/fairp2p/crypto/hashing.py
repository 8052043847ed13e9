import hashlib

HASH_NAME = "sha256"
DIGEST_SIZE = 32


def H(*parts: bytes) -> bytes:
    """Hash the plain concatenation of ``parts``."""
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


def u64(i: int) -> bytes:
    return i.to_bytes(8, "big")
