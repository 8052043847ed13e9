"""Ledger and the two arbiter contracts (downloading and streaming).

Contracts are single-threaded reducers. ``handle`` applies one transaction;
``on_timeouts`` fires any expired timers. A rejected transaction restores
the pre-call snapshot, so rejections never leave partial state behind.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import copy

from .crypto.ec import Point
from .crypto.hashing import DIGEST_SIZE, H
from .crypto.signatures import PK_SIZE, verify
from .crypto.symmetric import sym_decrypt
from .crypto.vpke import VpkeProof, decode_from_group, verify_pke
from .errors import DecodeError, FairP2PError
from .keytree import EncryptedRevealSet, RevealSet, leaf_span, recover_chunk_key, validate_rkeys
from .merkle import MerkleProof, is_power_of_two, verify_mtp
from .messages import (
    Kind, Message, TRANSACTIONS, chunk_payload, content_id, contract_address,
    key_payload, receipt_payload, session_id,
)
from .vfd import Receipt, verify_proof


class Reject(FairP2PError):
    pass


class Ledger:
    """Party balances plus per-contract escrow. Total supply never changes."""

    def __init__(self, balances: dict[str, int]):
        if any(v < 0 for v in balances.values()):
            raise ValueError("negative opening balance")
        self.balances = dict(balances)
        self.escrow: dict[str, int] = {}

    def total(self) -> int:
        return sum(self.balances.values()) + sum(self.escrow.values())

    def balance(self, party: str) -> int:
        return self.balances.get(party, 0)

    def lock(self, party: str, contract: str, amount: int) -> None:
        if amount < 0 or self.balance(party) < amount:
            raise Reject(f"{party} cannot lock {amount}")
        self.balances[party] = self.balance(party) - amount
        self.escrow[contract] = self.escrow.get(contract, 0) + amount

    def pay(self, contract: str, party: str, amount: int) -> None:
        if amount < 0 or self.escrow.get(contract, 0) < amount:
            raise Reject(f"escrow of {contract} cannot pay {amount}")
        self.escrow[contract] -= amount
        self.balances[party] = self.balance(party) + amount

    def snapshot(self):
        return dict(self.balances), dict(self.escrow)

    def restore(self, snap) -> None:
        self.balances, self.escrow = dict(snap[0]), dict(snap[1])


@dataclass(frozen=True)
class ContractTimers:
    """Timer lengths in rounds, already scaled by the network delay bound."""
    deliver: int
    dispute: int
    reveal: int
    proof_wait: int
    receive: int
    finish: int

    @classmethod
    def defaults(cls, n: int, delta: int = 1) -> "ContractTimers":
        receive = 4 * n + 8
        return cls(deliver=(2 * n + 6) * delta, dispute=8 * delta, reveal=4 * delta,
                   proof_wait=2 * delta, receive=receive * delta,
                   finish=(receive + 8) * delta)


@dataclass(frozen=True)
class Emitted:
    message: Message
    to: tuple[str, ...] | None = None  # None: every party


@dataclass
class Counters:
    accepted_calls: int = 0
    accepted_bytes: int = 0
    rejected_calls: int = 0
    by_kind: dict[str, int] = field(default_factory=dict)
    session_bytes: list[int] = field(default_factory=list)


# Allowed phase edges; anything else is a bug.
DOWNLOAD_EDGES = frozenset({
    ("empty", "started"), ("started", "joined"), ("joined", "ready"),
    ("ready", "initiated"), ("initiated", "revealing"), ("revealing", "revealed"),
    ("revealed", "sold"), ("revealed", "not_sold"),
    # extensions: nothing delivered, provider never reveals, repeat, withdraw
    ("initiated", "not_sold"), ("revealing", "not_sold"),
    ("sold", "ready"), ("not_sold", "ready"),
    ("started", "closed"), ("joined", "closed"), ("ready", "closed"),
    ("sold", "closed"), ("not_sold", "closed"),
})

STREAM_EDGES = frozenset({
    ("empty", "started"), ("started", "joined"), ("joined", "ready"),
    ("ready", "initiated"), ("initiated", "received"),
    ("initiated", "payingDelivery"), ("initiated", "payingRevealing"),
    ("received", "payingDelivery"), ("received", "payingRevealing"),
    ("payingDelivery", "payingRevealing"), ("payingRevealing", "payingDelivery"),
    ("payingDelivery", "payingDelivery"), ("payingRevealing", "payingRevealing"),
    ("initiated", "sold"), ("initiated", "not_sold"),
    ("received", "sold"), ("received", "not_sold"),
    ("payingDelivery", "sold"), ("payingDelivery", "not_sold"),
    ("payingRevealing", "sold"), ("payingRevealing", "not_sold"),
    ("sold", "ready"), ("not_sold", "ready"),
    ("started", "closed"), ("joined", "closed"), ("ready", "closed"),
    ("sold", "closed"), ("not_sold", "closed"),
})


@dataclass
class CommonState:
    sigma: str = "empty"
    theta: int = 0
    n: int = 0
    root: bytes = b""
    price_p: int = 0
    price_c: int = 0
    penalty: int = 0
    ctr: int = 0
    pk_p: bytes = b""
    pk_d: bytes = b""
    pk_c: bytes = b""
    party_p: str | None = None
    party_d: str | None = None
    party_c: str | None = None
    address: bytes = b""
    sid: bytes = bytes(32)
    sessions: int = 0


@dataclass
class DownloadState(CommonState):
    vpk_c: bytes = b""
    erk_hash: bytes = b""
    erk_positions: tuple[int, ...] = ()
    awaiting_proof: bool = False
    t_deliver: int | None = None
    t_proof: int | None = None
    t_reveal: int | None = None
    t_dispute: int | None = None


@dataclass
class StreamState(CommonState):
    ctr_d: int = 0
    ctr_p: int = 0
    plt: bool = False
    t_receive: int | None = None
    t_finish: int | None = None


def _int(b: bytes) -> int:
    if len(b) != 8:
        raise Reject("bad integer field")
    return int.from_bytes(b, "big")


# ---------------------------------------------------------------------------
# Proofs of misbehavior


@dataclass(frozen=True)
class PomDownload:
    i: int
    j: int
    chunk: bytes
    chunk_sig: bytes
    leaf: bytes
    mproof: MerkleProof
    rk_point: Point
    erk: EncryptedRevealSet
    vd_proof: VpkeProof

    def to_message(self, sid: bytes) -> Message:
        parts = (self.j.to_bytes(8, "big"), self.chunk, self.chunk_sig, self.leaf,
                 self.mproof.encode(), self.rk_point.encode(), self.erk.encode(),
                 self.vd_proof.encode())
        return Message(Kind.POM_DOWNLOAD, sid, self.i, parts)

    @classmethod
    def from_message(cls, msg: Message) -> "PomDownload":
        p = msg.parts
        return cls(msg.index, int.from_bytes(p[0], "big") if len(p[0]) == 8 else -1,
                   p[1], p[2], p[3], MerkleProof.decode(p[4]), Point.decode(p[5]),
                   EncryptedRevealSet.decode(p[6]), VpkeProof.decode(p[7]))


@dataclass(frozen=True)
class PomStream:
    i: int
    chunk: bytes
    chunk_sig: bytes
    key: bytes
    key_sig: bytes
    leaf: bytes
    mproof: MerkleProof

    def to_message(self, sid: bytes) -> Message:
        return Message(Kind.POM_STREAM, sid, self.i, (
            self.chunk, self.chunk_sig, self.key, self.key_sig, self.leaf, self.mproof.encode()))

    @classmethod
    def from_message(cls, msg: Message) -> "PomStream":
        p = msg.parts
        return cls(msg.index, p[0], p[1], p[2], p[3], p[4], MerkleProof.decode(p[5]))


def _chunk_checks(i, n, chunk, sig, leaf, mproof, root, cid, pk_p) -> bool:
    if not 1 <= i <= n or len(leaf) != DIGEST_SIZE:
        return False
    if len(mproof.path) != n.bit_length() - 1:
        return False
    if not verify(chunk_payload(cid, i, chunk), sig, pk_p):
        return False
    return verify_mtp(root, i, mproof, leaf)


def validate_pom_download(pom: PomDownload, root: bytes, n: int, erk_hash: bytes,
                          pk_p: bytes, vpk_c: Point, cid: bytes) -> bool:
    """Cheap checks first; the verifiable-decryption check covers element j only."""
    if not 0 <= pom.j < len(pom.erk):
        return False
    if pom.erk.digest() != erk_hash:
        return False
    if not _chunk_checks(pom.i, n, pom.chunk, pom.chunk_sig, pom.leaf, pom.mproof, root, cid, pk_p):
        return False
    pos, ct = pom.erk.items[pom.j]
    if not verify_pke(vpk_c, ct, pom.rk_point, pom.vd_proof):
        return False
    try:
        value = decode_from_group(pom.rk_point)
    except DecodeError:
        # A correctly decrypted point that carries no 32-byte key is itself
        # provider misbehavior, as long as element j is the one covering chunk i.
        lo, hi = leaf_span(n, pos)
        return pos <= 2 * n - 2 and lo <= n + pom.i - 2 <= hi
    key = recover_chunk_key(pom.i, 0, n, RevealSet(((pos, value),)))
    if key is None:
        return False
    try:
        plain = sym_decrypt(key, pom.chunk)
    except FairP2PError:
        return False
    return H(plain) != pom.leaf


def validate_pom_stream(pom: PomStream, root: bytes, n: int, pk_p: bytes, cid: bytes, sid: bytes) -> bool:
    if not _chunk_checks(pom.i, n, pom.chunk, pom.chunk_sig, pom.leaf, pom.mproof, root, cid, pk_p):
        return False
    if len(pom.key) != 32 or not verify(key_payload(sid, pom.i, pom.key), pom.key_sig, pk_p):
        return False
    try:
        plain = sym_decrypt(pom.key, pom.chunk)
    except FairP2PError:
        return False
    return H(plain) != pom.leaf


# ---------------------------------------------------------------------------
# Contracts


class _Contract:
    EDGES: frozenset = frozenset()
    ACTIVE: frozenset = frozenset()

    def __init__(self, ledger: Ledger, timers: ContractTimers | None = None, name: str = "G"):
        self.ledger = ledger
        self.name = name
        self.timers = timers
        self.counters = Counters()
        self.event_log: list[tuple[int, str, str, dict]] = []
        self.transitions: list[tuple[str, str]] = []
        self.settlements: list[dict] = []
        self._session_bytes = 0
        self.last_reject = ""


    # plumbing ---------------------------------------------------------------

    def _emit(self, now: int, kind: Kind, index: int = 0, parts=(), to=None, sid=None, **info) -> Emitted:
        msg = Message(kind, self.state.sid if sid is None else sid, index, tuple(parts))
        self.event_log.append((now, self.name, kind.name, dict(info, index=index)))
        return Emitted(msg, to)

    def _move(self, new: str) -> None:
        old = self.state.sigma
        if (old, new) not in self.EDGES:
            raise AssertionError(f"illegal transition {old} -> {new}")
        self.transitions.append((old, new))
        self.state.sigma = new

    def _guard(self, cond: bool, why: str) -> None:
        if not cond:
            raise Reject(why)

    def handle(self, sender: str, msg: Message, now: int) -> list[Emitted]:
        """Apply one transaction; returns emitted events, or [] if rejected."""
        saved_state = copy.copy(self.state)
        saved_ledger = self.ledger.snapshot()
        saved_logs = (len(self.event_log), len(self.transitions), len(self.settlements),
                      len(self.counters.session_bytes))
        saved_bytes = self._session_bytes
        size = len(msg)
        # counted up front so a transaction that closes the session is billed to it
        self._session_bytes += size
        try:
            if msg.kind not in TRANSACTIONS:
                raise Reject(f"{msg.kind.name} is not a transaction")
            handler = getattr(self, "_on_" + msg.kind.name.lower(), None)
            if handler is None:
                raise Reject(f"{msg.kind.name} not supported here")
            out = handler(sender, msg, now)
        except (Reject, DecodeError, IndexError) as exc:
            self.state = saved_state
            self.ledger.restore(saved_ledger)
            del self.event_log[saved_logs[0]:]
            del self.transitions[saved_logs[1]:]
            del self.settlements[saved_logs[2]:]
            del self.counters.session_bytes[saved_logs[3]:]
            self._session_bytes = saved_bytes
            self.counters.rejected_calls += 1
            self.last_reject = str(exc)
            return []
        self.counters.accepted_calls += 1
        self.counters.accepted_bytes += size
        self.counters.by_kind[msg.kind.name] = self.counters.by_kind.get(msg.kind.name, 0) + 1
        return out

    def _close_session(self, outcome: str, penalized: bool = False) -> None:
        """penalized: the provider's deposit went to the consumer."""
        st = self.state
        self.counters.session_bytes.append(self._session_bytes)
        self.settlements.append({"sid": st.sid.hex(), "ctr": st.ctr, "outcome": outcome,
                                 "penalized": penalized,
                                 "onchain_bytes": self._session_bytes})
        self._session_bytes = 0

    # prepare phase (shared) -------------------------------------------------

    def _on_start(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "empty", "already started")
        pk, root = msg.parts[0], msg.parts[1]
        theta, n, bp, bc, pf = (_int(p) for p in msg.parts[2:])
        self._guard(len(pk) == PK_SIZE and len(root) == DIGEST_SIZE, "bad key or root")
        self._guard(is_power_of_two(n), "n must be a power of two")
        self._guard(theta >= 1 and bc > bp >= 0 and pf >= 0, "bad parameters")
        self.ledger.lock(sender, self.name, theta * (n * bp + pf))
        st.pk_p, st.root, st.theta, st.n = pk, root, theta, n
        st.price_p, st.price_c, st.penalty = bp, bc, pf
        st.party_p = sender
        st.address = contract_address(pk)
        if self.timers is None:
            self.timers = ContractTimers.defaults(n)
        self._move("started")
        return [self._emit(now, Kind.STARTED, parts=msg.parts)]

    def _on_join(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "started", "not started")
        self._guard(len(msg.parts[0]) == PK_SIZE, "bad key")
        st.pk_d, st.party_d = msg.parts[0], sender
        self._move("joined")
        return [self._emit(now, Kind.JOINED, parts=msg.parts)]

    def _on_prepared(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "joined" and sender == st.party_d, "not the joined deliverer")
        self._move("ready")
        return [self._emit(now, Kind.READY)]

    def _on_reset(self, sender, msg, now):
        st = self.state
        self._guard(sender == st.party_p and st.sigma in ("sold", "not_sold"), "cannot reset")
        self._clear_session()
        st.theta -= 1
        self._move("ready")
        return [self._emit(now, Kind.READY, sid=bytes(32))]

    def _on_withdraw(self, sender, msg, now):
        st = self.state
        self._guard(sender == st.party_p and st.sigma in ("started", "joined", "ready", "sold", "not_sold"),
                    "cannot withdraw")
        self.ledger.pay(self.name, sender, self.ledger.escrow.get(self.name, 0))
        self._move("closed")
        return [self._emit(now, Kind.CLOSED)]

    def _consume_common(self, sender, msg, now):
        st = self.state
        self._guard(st.theta > 0, "no repeats left")
        self._guard(st.sigma == "ready", "not ready")
        self._guard(len(msg.parts[0]) == PK_SIZE, "bad consumer key")
        self.ledger.lock(sender, self.name, st.n * st.price_c)
        st.pk_c, st.party_c = msg.parts[0], sender
        st.sid = session_id(st.root, st.address, st.pk_d, st.pk_c, st.sessions)
        st.sessions += 1

    @property
    def cid(self) -> bytes:
        return content_id(self.state.root, self.state.address)

    def deadlines(self) -> list[int]:
        raise NotImplementedError

    def armed(self) -> bool:
        return bool(self.deadlines())

    def is_final(self) -> bool:
        return self.state.sigma in ("sold", "not_sold", "closed")


class DownloadArbiter(_Contract):
    EDGES = DOWNLOAD_EDGES

    def __init__(self, ledger: Ledger, timers: ContractTimers | None = None, name: str = "G"):
        super().__init__(ledger, timers, name)
        self.state = DownloadState()

    def _clear_session(self):
        st = self.state
        st.ctr = 0
        st.pk_c = st.vpk_c = st.erk_hash = b""
        st.party_c = None
        st.erk_positions = ()
        st.awaiting_proof = False
        st.t_deliver = st.t_proof = st.t_reveal = st.t_dispute = None
        st.sid = bytes(32)

    def deadlines(self) -> list[int]:
        st = self.state
        return [t for t in (st.t_deliver, st.t_proof, st.t_reveal, st.t_dispute) if t is not None]

    def _on_consume(self, sender, msg, now):
        st = self.state
        vpk = Point.decode(msg.parts[1])
        self._guard(not vpk.is_identity, "identity encryption key")
        self._consume_common(sender, msg, now)
        st.vpk_c = msg.parts[1]
        st.t_deliver = now + self.timers.deliver
        self._move("initiated")
        return [self._emit(now, Kind.INITIATED, parts=msg.parts)]

    def _request_proof(self, now):
        st = self.state
        st.awaiting_proof = True
        st.t_deliver = None
        st.t_proof = now + self.timers.proof_wait
        return [self._emit(now, Kind.GET_VFD_PROOF, to=(st.party_d,))]

    def _on_delivered(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "initiated" and not st.awaiting_proof and sender == st.party_c,
                    "delivered not expected")
        return self._request_proof(now)

    def _on_vfd_proof(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "initiated" and st.awaiting_proof and sender == st.party_d,
                    "proof not requested")
        ctr = verify_proof(Receipt(msg.index, msg.parts[0]), st.sid, st.n, st.pk_c, st.pk_d)
        self._guard(ctr > 0, "receipt does not verify")
        return self._settle_delivery(ctr, now)

    def _settle_delivery(self, ctr, now):
        st = self.state
        st.ctr = ctr
        st.awaiting_proof = False
        st.t_proof = None
        self.ledger.pay(self.name, st.party_d, ctr * st.price_p)
        self.ledger.pay(self.name, st.party_p, (st.n - ctr) * st.price_p)
        if ctr == 0:
            # nothing to reveal: refund the consumer and the penalty deposit
            self.ledger.pay(self.name, st.party_c, st.n * st.price_c)
            self.ledger.pay(self.name, st.party_p, st.penalty)
            self._move("not_sold")
            self._close_session("not_sold")
            return [self._emit(now, Kind.NOT_SOLD, index=0)]
        st.t_reveal = now + self.timers.reveal
        self._move("revealing")
        return [self._emit(now, Kind.REVEALING, index=ctr)]

    def _on_reveal_keys(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "revealing" and sender == st.party_p, "not revealing")
        erk = EncryptedRevealSet.decode(msg.parts[0])
        st.erk_hash = erk.digest()
        st.erk_positions = erk.positions
        st.t_reveal = None
        st.t_dispute = now + self.timers.dispute
        self._move("revealed")
        return [self._emit(now, Kind.REVEALED, parts=msg.parts, erk_size=len(erk))]

    def _refund_consumer_with_penalty(self, now):
        st = self.state
        self.ledger.pay(self.name, st.party_c, st.n * st.price_c + st.penalty)
        st.t_dispute = st.t_reveal = None
        self._move("not_sold")
        self._close_session("not_sold", penalized=True)
        return [self._emit(now, Kind.NOT_SOLD, index=st.ctr)]

    def _on_wrong_rk(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "revealed" and sender == st.party_c and now < st.t_dispute,
                    "complaint window closed")
        self._guard(not validate_rkeys(st.n, st.ctr, st.erk_positions), "reveal set is valid")
        return self._refund_consumer_with_penalty(now)

    def _on_pom_download(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "revealed" and sender == st.party_c and now < st.t_dispute,
                    "complaint window closed")
        pom = PomDownload.from_message(msg)
        ok = validate_pom_download(pom, st.root, st.n, st.erk_hash, st.pk_p,
                                   Point.decode(st.vpk_c), self.cid)
        self._guard(ok, "proof of misbehavior rejected")
        return self._refund_consumer_with_penalty(now)

    def on_timeouts(self, now: int) -> list[Emitted]:
        st = self.state
        if st.sigma == "initiated" and not st.awaiting_proof and st.t_deliver is not None and now >= st.t_deliver:
            return self._request_proof(now)
        if st.sigma == "initiated" and st.awaiting_proof and now >= st.t_proof:
            return self._settle_delivery(0, now)
        if st.sigma == "revealing" and now >= st.t_reveal:
            return self._refund_consumer_with_penalty(now)
        if st.sigma == "revealed" and now >= st.t_dispute:
            self.ledger.pay(self.name, st.party_p, st.ctr * st.price_c + st.penalty)
            self.ledger.pay(self.name, st.party_c, (st.n - st.ctr) * st.price_c)
            st.t_dispute = None
            self._move("sold")
            self._close_session("sold")
            return [self._emit(now, Kind.SOLD, index=st.ctr)]
        return []


class StreamArbiter(_Contract):
    EDGES = STREAM_EDGES
    ACTIVE = frozenset({"initiated", "received", "payingDelivery", "payingRevealing"})

    def __init__(self, ledger: Ledger, timers: ContractTimers | None = None, name: str = "G"):
        super().__init__(ledger, timers, name)
        self.state = StreamState()

    def _clear_session(self):
        st = self.state
        st.ctr = st.ctr_d = st.ctr_p = 0
        st.plt = False
        st.pk_c = b""
        st.party_c = None
        st.t_receive = st.t_finish = None
        st.sid = bytes(32)

    def deadlines(self) -> list[int]:
        st = self.state
        return [t for t in (st.t_receive, st.t_finish) if t is not None]

    def _on_consume(self, sender, msg, now):
        st = self.state
        self._consume_common(sender, msg, now)
        st.t_receive = now + self.timers.receive
        st.t_finish = now + self.timers.finish
        self._move("initiated")
        return [self._emit(now, Kind.INITIATED, parts=msg.parts)]

    def _to_received(self, now):
        self.state.t_receive = None
        self._move("received")
        return [self._emit(now, Kind.RECEIVED_EV)]

    def _on_received(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "initiated" and sender == st.party_c and now < st.t_receive,
                    "received not expected")
        return self._to_received(now)

    def _on_pom_stream(self, sender, msg, now):
        st = self.state
        self._guard(st.sigma == "initiated" and sender == st.party_c and now < st.t_receive,
                    "complaint window closed")
        pom = PomStream.from_message(msg)
        self._guard(validate_pom_stream(pom, st.root, st.n, st.pk_p, self.cid, st.sid),
                    "proof of misbehavior rejected")
        st.plt = True
        return self._to_received(now)

    def _claim(self, sender, msg, now, party, pk, current):
        st = self.state
        i = msg.index
        self._guard(sender == party, "wrong claimant")
        self._guard(st.t_finish is not None and now < st.t_finish, "claim window closed")
        self._guard(st.sigma in ("received", "payingDelivery", "payingRevealing")
                    or (st.sigma == "initiated" and i == st.n), "claims not open")
        self._guard(st.ctr == 0 and 0 < i <= st.n and i > current, "claim index not admissible")
        self._guard(verify(receipt_payload(st.sid, i, st.pk_c, pk), msg.parts[0], st.pk_c),
                    "receipt does not verify")

    def _on_claim_delivery(self, sender, msg, now):
        st = self.state
        self._claim(sender, msg, now, st.party_d, st.pk_d, st.ctr_d)
        st.ctr_d = msg.index
        self._move("payingDelivery")
        return [self._emit(now, Kind.PAYING_DELIVERY, index=msg.index)]

    def _on_claim_revealing(self, sender, msg, now):
        st = self.state
        self._claim(sender, msg, now, st.party_p, st.pk_p, st.ctr_p)
        st.ctr_p = msg.index
        self._move("payingRevealing")
        return [self._emit(now, Kind.PAYING_REVEALING, index=msg.index)]

    def on_timeouts(self, now: int) -> list[Emitted]:
        st = self.state
        out = []
        if st.sigma == "initiated" and st.t_receive is not None and now >= st.t_receive:
            out += self._to_received(now)
        if st.sigma in self.ACTIVE and st.t_finish is not None and now >= st.t_finish:
            ctr = max(st.ctr_d, st.ctr_p)
            st.ctr = ctr
            n = st.n
            self.ledger.pay(self.name, st.party_d, ctr * st.price_p)
            if st.plt:
                self.ledger.pay(self.name, st.party_p, (n - ctr) * st.price_p + ctr * st.price_c)
                self.ledger.pay(self.name, st.party_c, (n - ctr) * st.price_c + st.penalty)
            else:
                self.ledger.pay(self.name, st.party_p,
                                (n - ctr) * st.price_p + ctr * st.price_c + st.penalty)
                self.ledger.pay(self.name, st.party_c, (n - ctr) * st.price_c)
            st.t_finish = st.t_receive = None
            self._move("sold" if ctr > 0 else "not_sold")
            self._close_session(st.sigma, penalized=st.plt)
            out.append(self._emit(now, Kind.SOLD if ctr > 0 else Kind.NOT_SOLD, index=ctr))
        return out
