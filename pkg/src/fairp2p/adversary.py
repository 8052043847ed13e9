"""Static corruption: envelope triggers plus named behavioural deviations.

Triggers act on outbound envelopes in the scheduler. Deviations are party
subclasses that override one honest step each. Corrupted parties in the same
run form a coalition and can read each other's secrets.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from .crypto.ec import A as CURVE_A, B as CURVE_B, Point, sqrt_mod_p
from .crypto.hashing import H
from .crypto.signatures import sign
from .crypto.vpke import prove_pke, random_scalar, venc
from .keytree import EncryptedRevealSet, reveal_from_tree
from .merkle import gen_mtp, tree_from_leaves
from .messages import Kind, Message, mtree_payload, receipt_payload
from .arbiter import PomDownload
from .protocols import Consumer, Deliverer, Provider
from . import vfd

ACTIONS = ("abort", "withhold", "substitute-payload", "delay-to-max", "send-forged")

DEVIATIONS = {
    "P": {"wrong_key", "garbage_chunk", "short_reveal", "no_reveal", "forged_mtree",
          "bad_erk_encoding", "stop_after", "no_claim"},
    "D": {"stop_after", "no_proof", "no_claim", "sybil"},
    "C": {"withhold_from", "withhold_deliverer_from", "no_delivered", "false_pom",
          "false_wrongrk", "sybil"},
}


@dataclass(frozen=True)
class Trigger:
    party: str
    action: str
    at_round: int | None = None
    on_kind: str | None = None
    index: int | None = None
    to: str | None = None
    part: int = 0
    once: bool = False

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown trigger action {self.action!r}")
        if self.on_kind is not None and self.on_kind not in Kind.__members__:
            raise ValueError(f"unknown message kind {self.on_kind!r}")

    def matches(self, src: str, dst: str, msg: Message, now: int) -> bool:
        if self.party not in ("*", src):
            return False
        if self.to is not None and dst != self.to:
            return False
        if self.at_round is not None and now < self.at_round:
            return False
        if self.on_kind is not None and msg.kind.name != self.on_kind:
            return False
        if self.index is not None and msg.index != self.index:
            return False
        return True


@dataclass(frozen=True)
class AdversarySpec:
    corrupted: frozenset[str] = frozenset()
    deviations: dict[str, dict[str, Any]] = field(default_factory=dict)
    triggers: tuple[Trigger, ...] = ()

    def validate(self, parties) -> None:
        parties = set(parties)
        if len(self.corrupted) > 2:
            raise ValueError("at most two parties may be corrupted")
        if not self.corrupted <= parties:
            raise ValueError(f"unknown corrupted parties {sorted(self.corrupted - parties)}")
        for name, devs in self.deviations.items():
            if name not in self.corrupted:
                raise ValueError(f"deviation for honest party {name}")
            allowed = DEVIATIONS[role_of(name)]
            bad = set(devs) - allowed
            if bad:
                raise ValueError(f"unknown deviations for {name}: {sorted(bad)}")
            if devs.get("sybil") and not {"D", "C"} <= {role_of(p) for p in self.corrupted}:
                raise ValueError("sybil play needs both deliverer and a consumer corrupted")
        for t in self.triggers:
            if t.action == "delay-to-max":
                continue  # the network adversary may stretch any envelope
            if t.party not in self.corrupted:
                raise ValueError(f"trigger {t.action} on honest party {t.party}")

    @classmethod
    def from_dict(cls, d: dict | None) -> "AdversarySpec":
        d = d or {}
        trig = tuple(Trigger(**t) for t in d.get("triggers", ()))
        return cls(frozenset(d.get("corrupted", ())), dict(d.get("deviations", {})), trig)


def role_of(name: str) -> str:
    return "C" if name.startswith("C") else name


# ---------------------------------------------------------------------------
# deviations


class EvilProvider(Provider):
    def __init__(self, *a, deviations: dict, **kw):
        self.dev = deviations
        super().__init__(*a, **kw)

    def _plaintext(self, i):
        if self.dev.get("garbage_chunk") == i:
            return H(b"garbage", bytes([i % 256])) * (self.cfg.eta // 32)
        return super()._plaintext(i)

    def _encryption_key(self, i):
        if self.cfg.mode == "download" and self.dev.get("wrong_key") == i:
            return H(b"off-tree key", self.leaves[i - 1])
        return super()._encryption_key(i)

    def _reveal_key(self, i):
        if self.cfg.mode == "stream" and self.dev.get("wrong_key") == i:
            return H(b"off-tree key", self.leaves[i - 1])
        return super()._reveal_key(i)

    def _on_key_req(self, src, msg, now):
        limit = self.dev.get("stop_after")
        if limit is not None and msg.index > limit:
            return []
        return super()._on_key_req(src, msg, now)

    def _claim(self):
        if self.dev.get("no_claim"):
            return []
        return super()._claim()

    def _mtree(self):
        msg = super()._mtree()
        if not self.dev.get("forged_mtree"):
            return msg
        blob = bytearray(msg.parts[0])
        blob[0] ^= 0xFF
        # re-signed, so only the root comparison can catch it
        leaves = [bytes(blob[k:k + 32]) for k in range(0, len(blob), 32)]
        root = tree_from_leaves(leaves).root
        return Message(Kind.MTREE, parts=(bytes(blob), sign(mtree_payload(root, self.cfg.n), self.keys.secret)))

    def _reveal_set(self, ctr):
        if self.dev.get("short_reveal") and ctr > 1:
            return reveal_from_tree(self.kt, ctr - 1)
        return super()._reveal_set(ctr)

    def _encrypt_reveal(self, rk):
        erk = super()._encrypt_reveal(rk)
        if not self.dev.get("bad_erk_encoding"):
            return erk
        # element 0 carries a point whose x-coordinate cannot hold a 32-byte value
        x = 1 << 300
        while sqrt_mod_p(x * x * x + CURVE_A * x + CURVE_B) is None:
            x += 1
        y = sqrt_mod_p(x * x * x + CURVE_A * x + CURVE_B)
        bogus = Point(x, y)
        ct = venc(self.vpk_c, bogus, random_scalar(self.rng))
        items = ((erk.items[0][0], ct),) + erk.items[1:]
        return EncryptedRevealSet(items)

    def _on_revealing(self, src, msg, now):
        if self.dev.get("no_reveal"):
            return []
        return super()._on_revealing(src, msg, now)


class EvilDeliverer(Deliverer):
    def __init__(self, *a, deviations: dict, **kw):
        self.dev = deviations
        self.coalition: dict = {}
        super().__init__(*a, **kw)

    def _send(self, msgs):
        limit = self.dev.get("stop_after")
        if limit is not None:
            msgs = [m for m in msgs if not (m.kind == Kind.DELIVER and m.index > limit)]
        return super()._send(msgs)

    def _on_get_vfd_proof(self, src, msg, now):
        if self.dev.get("no_proof"):
            return []
        return super()._on_get_vfd_proof(src, msg, now)

    def _claim(self):
        if self.dev.get("no_claim"):
            return []
        return super()._claim()

    def _on_initiated(self, src, msg, now):
        out = super()._on_initiated(src, msg, now)
        if not self.dev.get("sybil") or self.consumer is None:
            return out
        # self-dealing: the colluding consumer signs a full receipt, nothing is sent
        partner = self.coalition[self.consumer]
        n = self.cfg.n
        sig = sign(receipt_payload(self.sid, n, self.pk_c, self.keys.public), partner.keys.secret)
        self.latest = vfd.Receipt(n, sig)
        self.sent_deliver = 0
        if self.cfg.mode == "download":
            self.sender = replace(self.sender, latest=self.latest, halted=True, deadline=None)
            return []
        self.streaming = False
        self.deadline = None
        return self._claim()


class EvilConsumer(Consumer):
    def __init__(self, *a, deviations: dict, **kw):
        self.dev = deviations
        self.coalition: dict = {}
        super().__init__(*a, **kw)

    def _withheld(self, i: int, to_deliverer: bool) -> bool:
        k = self.dev.get("withhold_from")
        if k is not None and i >= k:
            return True
        k = self.dev.get("withhold_deliverer_from")
        return to_deliverer and k is not None and i >= k

    def _receipt_for_deliverer(self, msgs):
        out = [m for m in msgs if not self._withheld(m.index, True)]
        if len(out) != len(msgs) and self.receiver is not None:
            # stop the download once receipts are withheld
            self.receiver = replace(self.receiver, halted=True, deadline=None)
        return super()._receipt_for_deliverer(out)

    def _on_deliver(self, src, msg, now):
        out = super()._on_deliver(src, msg, now)
        if self.dev.get("no_delivered") or self.dev.get("withhold_from"):
            out = [(d, m) for d, m in out if m.kind != Kind.DELIVERED]
        return out

    def _stream_receipts(self, i):
        out = []
        for dst, m in super()._stream_receipts(i):
            if not self._withheld(i, dst == self.book.deliverer):
                out.append((dst, m))
        if self.dev.get("withhold_from") is not None and i >= self.dev["withhold_from"]:
            self.streaming = False
        return out

    def _on_key_reveal(self, src, msg, now):
        out = super()._on_key_reveal(src, msg, now)
        if self.dev.get("withhold_from") is not None:
            out = [(d, m) for d, m in out if m.kind != Kind.RECEIVED]
        if self.dev.get("sybil"):
            out += self._feed_from_partner(now)
        return out

    def _check_reveal(self, erk, now):
        if self.dev.get("sybil"):
            partner = self.coalition[self.book.deliverer]
            self.receiver = replace(self.receiver, accepted=partner.chunks[:self.ctr])
        if self.dev.get("false_wrongrk"):
            self.complaint = "false wrongRK"
            return [(self.book.contract, Message(Kind.WRONG_RK, self.sid))]
        out = super()._check_reveal(erk, now)
        if self.dev.get("false_pom") and not out and self.ctr >= 1:
            out = self._forged_pom(erk)
        return out

    def _forged_pom(self, erk):
        # claims chunk 1 is bad by citing a leaf that is not in the tree
        i = 1
        j = self._covering(erk, i)
        c, sig = self.receiver.accepted[0]
        point, proof = prove_pke(self.vkeys.secret, erk.items[j][1], random_scalar(self.rng))
        pom = PomDownload(i, j, c, sig, H(b"not the leaf"), gen_mtp(self.mt, i), point, erk, proof)
        self.complaint = "false PoM"
        return [(self.book.contract, pom.to_message(self.sid))]

    def _feed_from_partner(self, now):
        # the colluding deliverer hands chunks over out of band
        if not self.streaming or self.pending is not None or self.x > self.cfg.n:
            return []
        c, sig = self.coalition[self.book.deliverer].chunks[self.x - 1]
        return self._stream_deliver(Message(Kind.DELIVER, self.sid, self.x, (c, sig)), now)

    def _on_mtree(self, src, msg, now):
        out = super()._on_mtree(src, msg, now)
        if not self.dev.get("sybil"):
            return out
        if self.cfg.mode == "download" and self.receiver is not None:
            # nothing will be delivered; idle instead of timing out
            self.receiver = replace(self.receiver, deadline=None)
            return out
        return out + self._feed_from_partner(now)
