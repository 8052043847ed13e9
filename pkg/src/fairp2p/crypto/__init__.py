from .hashing import DIGEST_SIZE, HASH_NAME, H, u64
from .symmetric import BLOCK, keystream, sym_decrypt, sym_encrypt
from .signatures import PK_SIZE, SIG_SCHEME, SIG_SIZE, SigKeyPair, sign, verify
from .ec import CURVE_NAME, G, IDENTITY, Point
from .vpke import (
    Ciphertext, VpkeKeyPair, VpkeProof, decode_from_group, decrypt_value,
    encode_to_group, encrypt_value, prove_pke, random_scalar, vdec, venc,
    verify_pke, vpke_keygen,
)

BUILD_CONSTANTS = {"hash": HASH_NAME, "signature": SIG_SCHEME, "group": CURVE_NAME}
