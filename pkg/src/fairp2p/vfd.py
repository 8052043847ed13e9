"""Verifiable fair delivery: chunk-for-receipt streaming between two peers.

Sender and receiver are pure step functions over frozen state. Each event
carries the current round; timers are absolute round deadlines.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .crypto.signatures import sign, verify
from .messages import Kind, Message, receipt_payload

DEFAULT_TIMER = 2

# Psi(i, c_i, sigma_i) -> bool
Predicate = Callable[[int, bytes, bytes], bool]


@dataclass(frozen=True)
class Receipt:
    index: int
    sig: bytes


@dataclass(frozen=True)
class SenderState:
    sid: bytes
    chunks: tuple[tuple[bytes, bytes], ...]
    pk_sender: bytes
    pk_receiver: bytes
    timer: int = DEFAULT_TIMER
    sent: int = 0
    latest: Receipt | None = None
    deadline: int | None = None
    halted: bool = False

    @property
    def n(self) -> int:
        return len(self.chunks)

    def prove(self) -> Receipt | None:
        return self.latest


@dataclass(frozen=True)
class ReceiverState:
    sid: bytes
    n: int
    sk_receiver: bytes
    pk_receiver: bytes
    pk_sender: bytes
    psi: Predicate
    timer: int = DEFAULT_TIMER
    accepted: tuple[tuple[bytes, bytes], ...] = ()
    deadline: int | None = None
    halted: bool = False

    @property
    def expected(self) -> int:
        return len(self.accepted) + 1

    @property
    def complete(self) -> bool:
        return len(self.accepted) == self.n


def _deliver(st: SenderState, i: int) -> Message:
    c, sig = st.chunks[i - 1]
    return Message(Kind.DELIVER, st.sid, i, (c, sig))


def sender_activate(st: SenderState, now: int) -> tuple[SenderState, list[Message]]:
    if st.n == 0:
        return replace(st, halted=True), []
    return replace(st, sent=1, deadline=now + st.timer), [_deliver(st, 1)]


def sender_on_receipt(st: SenderState, msg: Message, now: int) -> tuple[SenderState, list[Message]]:
    if st.halted or st.sent == 0:
        return st, []
    i = msg.index
    ok = (msg.kind == Kind.RECEIPT and len(msg.parts) == 1 and i == st.sent
          and verify(receipt_payload(st.sid, i, st.pk_receiver, st.pk_sender),
                     msg.parts[0], st.pk_receiver))
    if not ok:
        return replace(st, halted=True, deadline=None), []
    st = replace(st, latest=Receipt(i, msg.parts[0]))
    if i == st.n:
        return replace(st, halted=True, deadline=None), []
    return replace(st, sent=i + 1, deadline=now + st.timer), [_deliver(st, i + 1)]


def sender_tick(st: SenderState, now: int) -> SenderState:
    if not st.halted and st.deadline is not None and now >= st.deadline:
        return replace(st, halted=True, deadline=None)
    return st


def receiver_activate(st: ReceiverState, now: int) -> ReceiverState:
    if st.n == 0:
        return replace(st, halted=True)
    return replace(st, deadline=now + st.timer)


def receiver_on_deliver(st: ReceiverState, msg: Message, now: int) -> tuple[ReceiverState, list[Message]]:
    if st.halted or st.complete:
        return st, []
    j = msg.index
    if (msg.kind != Kind.DELIVER or len(msg.parts) != 2 or j != st.expected
            or not st.psi(j, msg.parts[0], msg.parts[1])):
        return replace(st, halted=True, deadline=None), []
    sig = sign(receipt_payload(st.sid, j, st.pk_receiver, st.pk_sender), st.sk_receiver)
    st = replace(st, accepted=st.accepted + ((msg.parts[0], msg.parts[1]),))
    if st.complete:
        st = replace(st, halted=True, deadline=None)
    else:
        st = replace(st, deadline=now + st.timer)
    return st, [Message(Kind.RECEIPT, st.sid, j, (sig,))]


def receiver_tick(st: ReceiverState, now: int) -> ReceiverState:
    if not st.halted and st.deadline is not None and now >= st.deadline:
        return replace(st, halted=True, deadline=None)
    return st


def verify_proof(proof: Receipt | None, sid: bytes, n: int, pk_receiver: bytes, pk_sender: bytes) -> int:
    """Delivered-chunk count attested by a receipt, or 0 if it does not verify."""
    if proof is None or not 1 <= proof.index <= n:
        return 0
    if not verify(receipt_payload(sid, proof.index, pk_receiver, pk_sender), proof.sig, pk_receiver):
        return 0
    return proof.index
