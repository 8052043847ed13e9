"""Prime-order group: NIST P-384 (cofactor 1), written additively.

Points are immutable affine values; scalar multiplication runs in Jacobian
coordinates with a fixed 4-bit window.
"""
from __future__ import annotations

from ..errors import DecodeError

CURVE_NAME = "P-384"

P = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEFFFFFFFF0000000000000000FFFFFFFF
A = P - 3
B = 0xB3312FA7E23EE7E4988E056BE3F82D19181D9C6EFE8141120314088F5013875AC656398D8A2ED19D2A85C8EDD3EC2AEF
Q = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFC7634D81F4372DDF581A0DB248B0A77AECEC196ACCC52973
GX = 0xAA87CA22BE8B05378EB1C71EF320AD746E1D3B628BA79B9859F741E082542A385502F25DBF55296C3A545E3872760AB7
GY = 0x3617DE4A96262C6F5D9E98BF9292DC29F8F41DBD289A147CE9DA3113B5F0B8C00A60B1CE1D7E819D7A431D7C90EA0E5F

FIELD_BYTES = 48
POINT_BYTES = 1 + FIELD_BYTES  # SEC1 compressed


def _on_curve(x: int, y: int) -> bool:
    return (y * y - (x * x * x + A * x + B)) % P == 0


def sqrt_mod_p(v: int) -> int | None:
    # p = 3 mod 4
    r = pow(v, (P + 1) // 4, P)
    return r if r * r % P == v % P else None


# Jacobian helpers; None is the point at infinity.

def _jdouble(pt):
    if pt is None:
        return None
    x, y, z = pt
    if y == 0:
        return None
    yy = y * y % P
    s = 4 * x * yy % P
    zz = z * z % P
    m = 3 * (x - zz) * (x + zz) % P  # a = -3
    x3 = (m * m - 2 * s) % P
    y3 = (m * (s - x3) - 8 * yy * yy) % P
    z3 = 2 * y * z % P
    return (x3, y3, z3)


def _jadd(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1, z1 = p1
    x2, y2, z2 = p2
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2 * z2z2 % P
    s2 = y2 * z1 * z1z1 % P
    if u1 == u2:
        if s1 != s2:
            return None
        return _jdouble(p1)
    h = (u2 - u1) % P
    r = (s2 - s1) % P
    hh = h * h % P
    hhh = h * hh % P
    v = u1 * hh % P
    x3 = (r * r - hhh - 2 * v) % P
    y3 = (r * (v - x3) - s1 * hhh) % P
    z3 = h * z1 * z2 % P
    return (x3, y3, z3)


def _to_affine(pt):
    if pt is None:
        return None
    x, y, z = pt
    zi = pow(z, -1, P)
    zi2 = zi * zi % P
    return (x * zi2 % P, y * zi2 * zi % P)


def _jmul(pt, k: int):
    table = [None, pt]
    for _ in range(14):
        table.append(_jadd(table[-1], pt))
    acc = None
    for shift in range((k.bit_length() + 3) // 4 * 4 - 4, -1, -4):
        acc = _jdouble(_jdouble(_jdouble(_jdouble(acc))))
        acc = _jadd(acc, table[(k >> shift) & 0xF])
    return acc


class Point:
    __slots__ = ("x", "y")

    def __init__(self, x: int | None, y: int | None, check: bool = True):
        if x is not None and check and not _on_curve(x, y):
            raise DecodeError("point is not on the curve")
        self.x = x
        self.y = y

    @property
    def is_identity(self) -> bool:
        return self.x is None

    def _jac(self):
        return None if self.x is None else (self.x, self.y, 1)

    @classmethod
    def _from_jac(cls, pt) -> "Point":
        aff = _to_affine(pt)
        if aff is None:
            return IDENTITY
        return cls(aff[0], aff[1], check=False)

    def __add__(self, other: "Point") -> "Point":
        return Point._from_jac(_jadd(self._jac(), other._jac()))

    def __neg__(self) -> "Point":
        if self.x is None:
            return self
        return Point(self.x, (-self.y) % P, check=False)

    def __sub__(self, other: "Point") -> "Point":
        return self + (-other)

    def __mul__(self, k: int) -> "Point":
        k %= Q
        if k == 0 or self.x is None:
            return IDENTITY
        return Point._from_jac(_jmul(self._jac(), k))

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Point) and self.x == other.x and self.y == other.y

    def __hash__(self) -> int:
        return hash((self.x, self.y))

    def __repr__(self) -> str:
        if self.x is None:
            return "Point(identity)"
        return f"Point({self.x:#x}, {self.y:#x})"

    def encode(self) -> bytes:
        """SEC1 compressed encoding; the identity is all-zero bytes."""
        if self.x is None:
            return bytes(POINT_BYTES)
        return bytes([2 + (self.y & 1)]) + self.x.to_bytes(FIELD_BYTES, "big")

    @classmethod
    def decode(cls, data: bytes) -> "Point":
        if data == bytes(POINT_BYTES):
            return IDENTITY
        if len(data) != POINT_BYTES or data[0] not in (2, 3):
            raise DecodeError("bad point encoding")
        x = int.from_bytes(data[1:], "big")
        if x >= P:
            raise DecodeError("x coordinate out of range")
        y = sqrt_mod_p(x * x * x + A * x + B)
        if y is None:
            raise DecodeError("x is not on the curve")
        if (y & 1) != data[0] - 2:
            y = P - y
        return cls(x, y, check=False)


IDENTITY = Point(None, None)
G = Point(GX, GY)

