"""Party state machines for the downloading and streaming protocols.

Each party reacts to ``start``, ``receive`` and ``tick`` calls from the
scheduler and returns outbound ``(destination, Message)`` pairs. The contract
is addressed by the name in ``Directory.contract``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import random

from .crypto.ec import Point
from .crypto.hashing import DIGEST_SIZE, H
from .crypto.signatures import SigKeyPair, sign, verify
from .crypto.symmetric import sym_decrypt, sym_encrypt
from .crypto.vpke import prove_pke, random_scalar, vdec, decode_from_group, vpke_keygen
from .errors import DecodeError
from .keytree import (
    EncryptedRevealSet, RevealSet, encrypt_reveal_set, gen_sub_keys, leaf_keys,
    leaf_span, recover_keys, reveal_from_tree, validate_rkeys,
)
from .merkle import MerkleTree, build_mt, gen_mtp, is_power_of_two, tree_from_leaves
from .messages import (
    Kind, Message, chunk_payload, content_id, contract_address, key_payload,
    keyreq_payload, mtree_payload, receipt_payload,
)
from .arbiter import PomDownload, PomStream
from . import vfd

Out = tuple[str, Message]

# rounds (times delta) from seeing started until ready must follow
PREPARE_TIMER = 8


@dataclass(frozen=True)
class SessionConfig:
    n: int
    eta: int
    price_p: int
    price_c: int
    penalty: int | None = None
    theta: int = 1
    mode: str = "download"
    delta: int = 1
    sessions: int = 1
    vfd_timer: int = 2
    key_response_timer: int = 2
    key_receipt_timer: int = 2
    chunk_receipt_timer: int = 4

    def __post_init__(self):
        if self.mode not in ("download", "stream"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not is_power_of_two(self.n):
            raise ValueError("n must be a power of two")
        if self.eta <= 0 or self.eta % 32:
            raise ValueError("chunk size must be a positive multiple of 32 bytes")
        if not self.price_c > self.price_p >= 0:
            raise ValueError("consumer price must exceed deliverer price")
        if self.theta < 1 or self.delta < 1 or not 1 <= self.sessions <= self.theta:
            raise ValueError("need theta >= sessions >= 1 and delta >= 1")
        if self.penalty is not None and self.penalty < 0:
            raise ValueError("negative penalty")

    @property
    def penalty_fee(self) -> int:
        return self.n * self.price_c // 4 if self.penalty is None else self.penalty

    def t(self, rounds: int) -> int:
        return rounds * self.delta


def pad_content(raw: bytes, eta: int) -> tuple[list[bytes], int, int]:
    """Split into eta-byte chunks, zero-padding to a power-of-two chunk count.

    Returns (chunks, n, original length).
    """
    if not raw:
        raise ValueError("empty content")
    if eta <= 0 or eta % 32:
        raise ValueError("chunk size must be a positive multiple of 32 bytes")
    count = -(-len(raw) // eta)
    n = 1
    while n < count:
        n *= 2
    body = raw + bytes(n * eta - len(raw))
    return [body[k * eta:(k + 1) * eta] for k in range(n)], n, len(raw)


@dataclass
class Directory:
    """Public address book: role names and consumer keys to party names."""
    provider: str = "P"
    deliverer: str = "D"
    contract: str = "G"
    by_pk: dict[bytes, str] = field(default_factory=dict)

    def register(self, pk: bytes, name: str) -> None:
        self.by_pk[pk] = name


@dataclass
class Offer:
    pk_p: bytes
    root: bytes
    theta: int
    n: int
    price_p: int
    price_c: int
    penalty: int

    @property
    def address(self) -> bytes:
        return contract_address(self.pk_p)

    @property
    def cid(self) -> bytes:
        return content_id(self.root, self.address)

    @classmethod
    def from_event(cls, msg: Message) -> "Offer":
        p = msg.parts
        ints = [int.from_bytes(x, "big") for x in p[2:]]
        return cls(p[0], p[1], *ints)


def mtree_message(mt: MerkleTree, sk: bytes) -> Message:
    sig = sign(mtree_payload(mt.root, mt.n), sk)
    return Message(Kind.MTREE, parts=(b"".join(mt.leaves), sig))


def parse_mtree(msg: Message, offer: Offer) -> MerkleTree | None:
    blob, sig = msg.parts
    if len(blob) != offer.n * DIGEST_SIZE:
        return None
    mt = tree_from_leaves(blob[k:k + DIGEST_SIZE] for k in range(0, len(blob), DIGEST_SIZE))
    if mt.root != offer.root or not verify(mtree_payload(mt.root, mt.n), sig, offer.pk_p):
        return None
    return mt


class Party:
    def __init__(self, name: str, cfg: SessionConfig, rng: random.Random, book: Directory):
        self.name = name
        self.cfg = cfg
        self.rng = rng
        self.book = book
        self.halted = False
        self.halt_round: int | None = None
        self.sessions_done = 0
        self.offer: Offer | None = None
        self.prepare_deadline: int | None = None

    def start(self, now: int) -> list[Out]:
        return []

    def receive(self, src: str, msg: Message, now: int) -> list[Out]:
        if self.halted:
            return []
        handler = getattr(self, "_on_" + msg.kind.name.lower(), None)
        if handler is None:
            return []
        return handler(src, msg, now) or []

    def tick(self, now: int) -> list[Out]:
        if self.prepare_deadline is not None and now >= self.prepare_deadline:
            self.prepare_deadline = None
            return self._prepare_expired(now)
        return self._tick(now)

    def deadlines(self) -> list[int]:
        out = self._deadlines()
        if self.prepare_deadline is not None:
            out.append(self.prepare_deadline)
        return out

    def _tick(self, now: int) -> list[Out]:
        return []

    def _deadlines(self) -> list[int]:
        return []

    def _prepare_expired(self, now: int) -> list[Out]:
        # the contract never became ready: give up on this offer
        self.halt(now)
        return []

    def halt(self, now: int) -> None:
        if not self.halted:
            self.halted = True
            self.halt_round = now

    def _on_started(self, src, msg, now):
        self.offer = Offer.from_event(msg)
        self.prepare_deadline = now + self.cfg.t(PREPARE_TIMER)

    def _on_ready(self, src, msg, now):
        self.prepare_deadline = None

    def _on_closed(self, src, msg, now):
        self.prepare_deadline = None
        self.halt(now)

    def _session_over(self, now) -> bool:
        self.sessions_done += 1
        if self.sessions_done >= self.cfg.sessions:
            self.halt(now)
            return True
        return False


# ---------------------------------------------------------------------------


class Provider(Party):
    def __init__(self, name, cfg, rng, book, chunks: list[bytes]):
        super().__init__(name, cfg, rng, book)
        if len(chunks) != cfg.n or any(len(c) != cfg.eta for c in chunks):
            raise ValueError("content must be n chunks of eta bytes")
        self.chunks = list(chunks)
        self.keys = SigKeyPair.generate(rng)
        self.mt = build_mt(chunks)
        self.kt: list[bytes] | None = None
        self.signed: list[tuple[bytes, bytes]] = []
        self._new_session()

    def _new_session(self):
        self.sid = None
        self.consumer = None
        self.pk_c = b""
        self.vpk_c: Point | None = None
        self.z = 1
        self.latest: vfd.Receipt | None = None
        self.key_deadline: int | None = None
        self.streaming = False
        self.claimed = False

    @property
    def address(self) -> bytes:
        return contract_address(self.keys.public)

    def start(self, now):
        c = self.cfg
        ints = [v.to_bytes(8, "big") for v in (c.theta, c.n, c.price_p, c.price_c, c.penalty_fee)]
        msg = Message(Kind.START, parts=(self.keys.public, self.mt.root, *ints))
        return [(self.book.contract, msg)]

    # prepare ----------------------------------------------------------------

    def _prepare_expired(self, now):
        self.halt(now)
        return [(self.book.contract, Message(Kind.WITHDRAW))]

    def _plaintext(self, i: int) -> bytes:
        return self.chunks[i - 1]

    def _encryption_key(self, i: int) -> bytes:
        return self.leaves[i - 1]

    def _on_joined(self, src, msg, now):
        mk = self.rng.randbytes(32)
        self.kt = gen_sub_keys(self.cfg.n, mk)
        self.leaves = leaf_keys(self.kt)
        cid = content_id(self.mt.root, self.address)
        self.signed = []
        for i in range(1, self.cfg.n + 1):
            c = sym_encrypt(self._encryption_key(i), self._plaintext(i))
            self.signed.append((c, sign(chunk_payload(cid, i, c), self.keys.secret)))
        parts = tuple(x for pair in self.signed for x in pair)
        return [(self.book.deliverer, Message(Kind.SELL, parts=parts))]

    # deliver / stream -------------------------------------------------------

    def _mtree(self) -> Message:
        return mtree_message(self.mt, self.keys.secret)

    def _on_initiated(self, src, msg, now):
        self._new_session()
        self.sid = msg.sid
        self.pk_c = msg.parts[0]
        self.consumer = self.book.by_pk.get(self.pk_c)
        if self.cfg.mode == "download":
            try:
                self.vpk_c = Point.decode(msg.parts[1])
            except DecodeError:
                return []
        else:
            self.streaming = True
        if self.consumer is None:
            return []
        m = self._mtree()
        return [(self.consumer, Message(Kind.MTREE, self.sid, 0, m.parts))]

    def _reveal_key(self, i: int) -> bytes:
        return self.leaves[i - 1]

    def _on_key_req(self, src, msg, now):
        if not self.streaming or src != self.consumer or self.key_deadline is not None:
            return []
        i = msg.index
        if i != self.z or not verify(keyreq_payload(self.sid, i, self.pk_c), msg.parts[0], self.pk_c):
            self.streaming = False
            return []
        k = self._reveal_key(i)
        sig = sign(key_payload(self.sid, i, k), self.keys.secret)
        self.key_deadline = now + self.cfg.t(self.cfg.key_receipt_timer)
        return [(self.consumer, Message(Kind.KEY_REVEAL, self.sid, i, (k, sig)))]

    def _on_receipt(self, src, msg, now):
        if not self.streaming or src != self.consumer or self.key_deadline is None:
            return []
        i = msg.index
        if i != self.z or not verify(receipt_payload(self.sid, i, self.pk_c, self.keys.public),
                                     msg.parts[0], self.pk_c):
            return []  # the receipt timer will run out
        self.latest = vfd.Receipt(i, msg.parts[0])
        self.z += 1
        self.key_deadline = None
        if self.z == self.cfg.n + 1:
            self.streaming = False
            return self._claim()
        return []

    def _claim(self) -> list[Out]:
        if self.claimed or self.latest is None:
            return []
        self.claimed = True
        msg = Message(Kind.CLAIM_REVEALING, self.sid, self.latest.index, (self.latest.sig,))
        return [(self.book.contract, msg)]

    def _on_received_ev(self, src, msg, now):
        self.streaming = False
        self.key_deadline = None
        return self._claim()

    def _tick(self, now):
        if self.key_deadline is not None and now >= self.key_deadline:
            self.key_deadline = None
            self.streaming = False
        return []

    def _deadlines(self):
        return [] if self.key_deadline is None else [self.key_deadline]

    # reveal -----------------------------------------------------------------

    def _reveal_set(self, ctr: int) -> RevealSet:
        return reveal_from_tree(self.kt, ctr)

    def _encrypt_reveal(self, rk: RevealSet) -> EncryptedRevealSet:
        return encrypt_reveal_set(rk, self.vpk_c, self.rng)

    def _on_revealing(self, src, msg, now):
        if self.cfg.mode != "download" or msg.sid != self.sid or self.vpk_c is None:
            return []
        erk = self._encrypt_reveal(self._reveal_set(msg.index))
        return [(self.book.contract, Message(Kind.REVEAL_KEYS, self.sid, 0, (erk.encode(),)))]

    def _finish(self, now):
        if not self._session_over(now):
            return [(self.book.contract, Message(Kind.RESET))]
        return []

    def _on_sold(self, src, msg, now):
        return self._finish(now)

    def _on_not_sold(self, src, msg, now):
        return self._finish(now)


# ---------------------------------------------------------------------------


class Deliverer(Party):
    def __init__(self, name, cfg, rng, book):
        super().__init__(name, cfg, rng, book)
        self.keys = SigKeyPair.generate(rng)
        self.chunks: tuple[tuple[bytes, bytes], ...] = ()
        self.sent_deliver = 0
        self._new_session()

    def _new_session(self):
        self.sid = None
        self.consumer = None
        self.pk_c = b""
        self.sender: vfd.SenderState | None = None
        self.y = 0
        self.latest: vfd.Receipt | None = None
        self.deadline: int | None = None
        self.streaming = False
        self.claimed = False

    def _on_started(self, src, msg, now):
        super()._on_started(src, msg, now)
        return [(self.book.contract, Message(Kind.JOIN, parts=(self.keys.public,)))]

    def _on_sell(self, src, msg, now):
        if src != self.book.provider or self.offer is None or self.chunks:
            return []
        parts = msg.parts
        n = self.offer.n
        if len(parts) != 2 * n:
            self.halt(now)
            return []
        cid = self.offer.cid
        pairs = tuple((parts[2 * k], parts[2 * k + 1]) for k in range(n))
        for i, (c, sig) in enumerate(pairs, 1):
            if not verify(chunk_payload(cid, i, c), sig, self.offer.pk_p):
                self.halt(now)
                return []
        self.chunks = pairs
        return [(self.book.contract, Message(Kind.PREPARED))]

    def _deliver(self, i: int) -> Message:
        c, sig = self.chunks[i - 1]
        return Message(Kind.DELIVER, self.sid, i, (c, sig))

    def _send(self, msgs) -> list[Out]:
        out = []
        for m in msgs:
            if m.kind == Kind.DELIVER:
                self.sent_deliver += 1
            out.append((self.consumer, m))
        return out

    def _on_initiated(self, src, msg, now):
        if not self.chunks:
            return []
        self._new_session()
        self.sid = msg.sid
        self.pk_c = msg.parts[0]
        self.consumer = self.book.by_pk.get(self.pk_c)
        if self.consumer is None:
            return []
        if self.cfg.mode == "download":
            st = vfd.SenderState(self.sid, self.chunks, self.keys.public, self.pk_c,
                                 timer=self.cfg.t(self.cfg.vfd_timer))
            self.sender, msgs = vfd.sender_activate(st, now)
            return self._send(msgs)
        self.streaming = True
        self.y = 1
        self.deadline = now + self.cfg.t(self.cfg.chunk_receipt_timer)
        return self._send([self._deliver(1)])

    def _on_receipt(self, src, msg, now):
        if src != self.consumer:
            return []
        if self.cfg.mode == "download":
            if self.sender is None:
                return []
            self.sender, msgs = vfd.sender_on_receipt(self.sender, msg, now)
            return self._send(msgs)
        if not self.streaming:
            return []
        i = msg.index
        if i != self.y or not verify(receipt_payload(self.sid, i, self.pk_c, self.keys.public),
                                     msg.parts[0], self.pk_c):
            return []
        self.latest = vfd.Receipt(i, msg.parts[0])
        if i == self.cfg.n:
            self.streaming = False
            self.deadline = None
            return self._claim()
        self.y = i + 1
        self.deadline = now + self.cfg.t(self.cfg.chunk_receipt_timer)
        return self._send([self._deliver(self.y)])

    def _proof(self) -> vfd.Receipt | None:
        return None if self.sender is None else self.sender.prove()

    def _on_get_vfd_proof(self, src, msg, now):
        pi = self._proof()
        if pi is None:
            out = Message(Kind.VFD_PROOF, self.sid, 0, (b"",))
        else:
            out = Message(Kind.VFD_PROOF, self.sid, pi.index, (pi.sig,))
        return [(self.book.contract, out)]

    def _claim(self) -> list[Out]:
        if self.claimed or self.latest is None:
            return []
        self.claimed = True
        msg = Message(Kind.CLAIM_DELIVERY, self.sid, self.latest.index, (self.latest.sig,))
        return [(self.book.contract, msg)]

    def _on_received_ev(self, src, msg, now):
        self.streaming = False
        self.deadline = None
        return self._claim()

    def _tick(self, now):
        if self.sender is not None:
            self.sender = vfd.sender_tick(self.sender, now)
        if self.deadline is not None and now >= self.deadline:
            self.deadline = None
            self.streaming = False
        return []

    def _deadlines(self):
        out = [] if self.deadline is None else [self.deadline]
        if self.sender is not None and not self.sender.halted and self.sender.deadline is not None:
            out.append(self.sender.deadline)
        return out

    def _on_sold(self, src, msg, now):
        self._session_over(now)

    def _on_not_sold(self, src, msg, now):
        self._session_over(now)


# ---------------------------------------------------------------------------


class Consumer(Party):
    def __init__(self, name, cfg, rng, book):
        super().__init__(name, cfg, rng, book)
        self.keys: SigKeyPair | None = None
        self.vkeys = None
        self.ready_seen = False
        self.requested = False
        self.active = False
        self.finished = False
        self.output: list[bytes] = []
        self.decrypt_rounds: dict[int, int] = {}
        self.pom_sent = False
        self.complaint: str | None = None
        self._pk_d = b""
        self._new_session()

    def _new_session(self):
        self.sid = None
        self.mt: MerkleTree | None = None
        self.receiver: vfd.ReceiverState | None = None
        self.stash: list[tuple[str, Message]] = []
        self.mtree_bad = False
        self.ctr = 0
        self.x = 1
        self.pending: tuple[bytes, bytes] | None = None
        self.key_deadline: int | None = None
        self.streaming = False

    # joining ----------------------------------------------------------------

    def _on_ready(self, src, msg, now):
        super()._on_ready(src, msg, now)
        self.ready_seen = True
        return self._maybe_consume(now)

    def _maybe_consume(self, now):
        if self.finished or self.active or self.requested or not self.ready_seen or self.offer is None:
            return []
        self.requested = True
        self.keys = SigKeyPair.generate(self.rng)
        self.book.register(self.keys.public, self.name)
        if self.cfg.mode == "download":
            self.vkeys = vpke_keygen(self.rng)
            vpk = self.vkeys.public.encode()
        else:
            vpk = b""
        return [(self.book.contract, Message(Kind.CONSUME, parts=(self.keys.public, vpk)))]

    def _on_initiated(self, src, msg, now):
        self.ready_seen = False
        if self.keys is None or msg.parts[0] != self.keys.public:
            self.requested = False  # someone else got this session
            return []
        stash = self.stash
        self._new_session()
        self.stash = stash
        self.active = True
        self.sid = msg.sid
        return []

    def _psi(self, i: int, c: bytes, sig: bytes) -> bool:
        return verify(chunk_payload(self.offer.cid, i, c), sig, self.offer.pk_p)

    def _on_mtree(self, src, msg, now):
        if not self.active or self.mt is not None or src != self.book.provider:
            return []
        mt = parse_mtree(msg, self.offer)
        if mt is None:
            self.complaint = "bad merkle tree"
            self.mtree_bad = True
            self.stash = []
            return []
        self.mt = mt
        if self.cfg.mode == "download":
            st = vfd.ReceiverState(self.sid, self.cfg.n, self.keys.secret, self.keys.public,
                                   self._pk_d, self._psi, timer=self.cfg.t(self.cfg.vfd_timer))
            self.receiver = vfd.receiver_activate(st, now)
        else:
            self.streaming = True
        return self._replay(now)

    def _replay(self, now):
        out = []
        stash, self.stash = self.stash, []
        for s, m in stash:
            if m.sid == self.sid:
                out += self.receive(s, m, now)
        return out

    def _on_joined(self, src, msg, now):
        self._pk_d = msg.parts[0]

    # download ---------------------------------------------------------------

    def _receipt_for_deliverer(self, msgs):
        return [(self.book.deliverer, m) for m in msgs]

    def _on_deliver(self, src, msg, now):
        if src != self.book.deliverer or self.finished:
            return []
        if not self.active or self.mt is None:
            # early arrival: hold until the session and tree are known
            if self.requested and not self.mtree_bad:
                self.stash.append((src, msg))
            return []
        if self.cfg.mode == "stream":
            return self._stream_deliver(msg, now)
        if self.receiver is None:
            return []
        self.receiver, msgs = vfd.receiver_on_deliver(self.receiver, msg, now)
        out = self._receipt_for_deliverer(msgs)
        if self.receiver.complete and msgs:
            out.append((self.book.contract, Message(Kind.DELIVERED, self.sid)))
        return out

    def _on_revealing(self, src, msg, now):
        if self.active and msg.sid == self.sid:
            self.ctr = msg.index

    def _on_revealed(self, src, msg, now):
        if not self.active or msg.sid != self.sid or self.receiver is None:
            return []
        try:
            erk = EncryptedRevealSet.decode(msg.parts[0])
        except DecodeError:
            return []
        return self._check_reveal(erk, now)

    def _wrong_rk(self) -> list[Out]:
        self.complaint = "wrongRK"
        return [(self.book.contract, Message(Kind.WRONG_RK, self.sid))]

    def _check_reveal(self, erk: EncryptedRevealSet, now: int) -> list[Out]:
        n, ctr = self.cfg.n, self.ctr
        if not validate_rkeys(n, ctr, erk.positions):
            return self._wrong_rk()
        points = [vdec(self.vkeys.secret, ct) for _, ct in erk.items]
        values = []
        for j, pt in enumerate(points):
            try:
                values.append(decode_from_group(pt))
            except DecodeError:
                lo, _ = leaf_span(n, erk.items[j][0])
                return self._pom(lo - n + 2, j, erk)
        rk = RevealSet(tuple((p, v) for (p, _), v in zip(erk.items, values)))
        keys = recover_keys(n, ctr, rk)
        chunks = self.receiver.accepted
        for i in range(1, ctr + 1):
            plain = sym_decrypt(keys[i - 1], chunks[i - 1][0])
            if H(plain) != self.mt.leaf(i):
                return self._pom(i, self._covering(erk, i), erk)
            self.output.append(plain)
            self.decrypt_rounds[i] = now
        return []

    def _covering(self, erk: EncryptedRevealSet, i: int) -> int:
        leaf = self.cfg.n + i - 2
        for j, (pos, _) in enumerate(erk.items):
            lo, hi = leaf_span(self.cfg.n, pos)
            if lo <= leaf <= hi:
                return j
        raise ValueError(f"no reveal element covers chunk {i}")

    def _pom(self, i: int, j: int, erk: EncryptedRevealSet) -> list[Out]:
        c, sig = self.receiver.accepted[i - 1]
        ct = erk.items[j][1]
        point, proof = prove_pke(self.vkeys.secret, ct, random_scalar(self.rng))
        pom = PomDownload(i, j, c, sig, self.mt.leaf(i), gen_mtp(self.mt, i), point, erk, proof)
        self.pom_sent = True
        self.complaint = f"PoM chunk {i}"
        return [(self.book.contract, pom.to_message(self.sid))]

    # stream -----------------------------------------------------------------

    def _stream_deliver(self, msg: Message, now: int) -> list[Out]:
        if not self.streaming or self.pending is not None:
            return []
        i = msg.index
        c, sig = msg.parts
        if i != self.x or not self._psi(i, c, sig):
            self.streaming = False
            self.key_deadline = None
            return []
        self.pending = (c, sig)
        self.key_deadline = now + self.cfg.t(self.cfg.key_response_timer)
        req = sign(keyreq_payload(self.sid, i, self.keys.public), self.keys.secret)
        return [(self.book.provider, Message(Kind.KEY_REQ, self.sid, i, (req,)))]

    def _stream_receipts(self, i: int) -> list[Out]:
        sk, pk = self.keys.secret, self.keys.public
        to_d = sign(receipt_payload(self.sid, i, pk, self._pk_d), sk)
        to_p = sign(receipt_payload(self.sid, i, pk, self.offer.pk_p), sk)
        return [(self.book.deliverer, Message(Kind.RECEIPT, self.sid, i, (to_d,))),
                (self.book.provider, Message(Kind.RECEIPT, self.sid, i, (to_p,)))]

    def _on_key_reveal(self, src, msg, now):
        if not self.streaming or self.pending is None or src != self.book.provider:
            return []
        i = msg.index
        k, ksig = msg.parts
        self.key_deadline = None
        if i != self.x or len(k) != 32 or not verify(key_payload(self.sid, i, k), ksig, self.offer.pk_p):
            self.streaming = False
            return []
        c, sig = self.pending
        self.pending = None
        plain = sym_decrypt(k, c)
        if H(plain) != self.mt.leaf(i):
            self.streaming = False
            self.pom_sent = True
            self.complaint = f"PoM chunk {i}"
            pom = PomStream(i, c, sig, k, ksig, self.mt.leaf(i), gen_mtp(self.mt, i))
            return [(self.book.contract, pom.to_message(self.sid))]
        self.output.append(plain)
        self.decrypt_rounds[i] = now
        out = self._stream_receipts(i)
        self.x += 1
        if self.x == self.cfg.n + 1:
            self.streaming = False
            out.append((self.book.contract, Message(Kind.RECEIVED, self.sid)))
        return out

    def _on_received_ev(self, src, msg, now):
        self.streaming = False
        self.key_deadline = None

    # shared -----------------------------------------------------------------

    def _tick(self, now):
        if self.receiver is not None:
            self.receiver = vfd.receiver_tick(self.receiver, now)
        if self.key_deadline is not None and now >= self.key_deadline:
            self.key_deadline = None
            self.streaming = False
        return []

    def _deadlines(self):
        out = [] if self.key_deadline is None else [self.key_deadline]
        r = self.receiver
        if r is not None and not r.halted and r.deadline is not None:
            out.append(r.deadline)
        return out

    def _final(self, msg, now):
        if self.active and msg.sid == self.sid:
            self.active = False
            self.finished = True
            self.halt(now)

    def _on_sold(self, src, msg, now):
        self._final(msg, now)

    def _on_not_sold(self, src, msg, now):
        self._final(msg, now)

