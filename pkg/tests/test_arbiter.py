import random

import pytest
from hypothesis import given, settings, strategies as st

from fairp2p.arbiter import (
    DOWNLOAD_EDGES, STREAM_EDGES, ContractTimers, DownloadArbiter, Ledger, PomDownload, PomStream,
    Reject, StreamArbiter,
)
from fairp2p.crypto.hashing import H
from fairp2p.crypto.signatures import SigKeyPair, sign
from fairp2p.crypto.symmetric import sym_encrypt
from fairp2p.crypto.vpke import prove_pke, random_scalar, vpke_keygen
from fairp2p.keytree import encrypt_reveal_set, gen_sub_keys, leaf_keys, reveal_keys
from fairp2p.merkle import build_mt, gen_mtp
from fairp2p.messages import Kind, Message, chunk_payload, content_id, contract_address, key_payload, receipt_payload

N, BP, BC, PF = 8, 10, 30, 50


def u(x):
    return x.to_bytes(8, "big")


class Session:
    """A contract plus the keys and content needed to drive it by hand."""

    def __init__(self, mode="download", n=N, seed=0, funds=None):
        self.rng = random.Random(seed)
        self.n = n
        self.p, self.d, self.c = (SigKeyPair.generate(self.rng) for _ in range(3))
        self.vk = vpke_keygen(self.rng)
        self.chunks = [self.rng.randbytes(64) for _ in range(n)]
        self.mt = build_mt(self.chunks)
        self.mk = self.rng.randbytes(32)
        self.keys = leaf_keys(gen_sub_keys(n, self.mk))
        self.funds = funds or {"P": n * BP + PF, "D": 0, "C": n * BC}
        self.ledger = Ledger(self.funds)
        cls = DownloadArbiter if mode == "download" else StreamArbiter
        self.g = cls(self.ledger, ContractTimers.defaults(n))
        self.cid = content_id(self.mt.root, contract_address(self.p.public))
        self.now = 0

    def send(self, who, msg):
        self.now += 1
        out = self.g.handle(who, msg, self.now)
        if not out:
            raise Reject(self.g.last_reject)
        return out

    def prepare(self):
        self.send("P", Message(Kind.START, parts=(self.p.public, self.mt.root, u(1), u(self.n), u(BP), u(BC), u(PF))))
        self.send("D", Message(Kind.JOIN, parts=(self.d.public,)))
        self.send("D", Message(Kind.PREPARED))
        vpk = self.vk.public.encode() if isinstance(self.g, DownloadArbiter) else b""
        self.send("C", Message(Kind.CONSUME, parts=(self.c.public, vpk)))
        return self.g.state.sid

    def receipt(self, i, pk):
        return sign(receipt_payload(self.g.state.sid, i, self.c.public, pk), self.c.secret)

    def expire(self, deadline):
        self.now = deadline
        return self.g.on_timeouts(deadline)

    def deltas(self):
        return {k: self.ledger.balance(k) - v for k, v in self.funds.items()}


def test_ledger_conserves_and_refuses_overdraft():
    led = Ledger({"a": 10, "b": 5})
    led.lock("a", "G", 7)
    led.pay("G", "b", 3)
    assert led.total() == 15 and led.escrow["G"] == 4
    with pytest.raises(Reject):
        led.lock("b", "G", 9)
    with pytest.raises(Reject):
        led.pay("G", "a", 5)
    with pytest.raises(ValueError):
        Ledger({"a": -1})


def test_default_timers_scale_with_delay():
    t = ContractTimers.defaults(8, 3)
    assert (t.deliver, t.dispute, t.reveal, t.proof_wait) == (66, 24, 12, 6)
    assert (t.receive, t.finish) == (120, 144)


def test_start_requires_funds_and_rejection_is_atomic():
    s = Session(funds={"P": N * BP + PF - 1, "D": 0, "C": N * BC})
    before = s.ledger.snapshot()
    with pytest.raises(Reject):
        s.prepare()
    assert s.ledger.snapshot() == before and s.g.state.sigma == "empty"
    assert s.g.counters.rejected_calls == 1 and s.g.counters.accepted_calls == 0


def test_start_rejects_bad_parameters():
    s = Session()
    bad = Message(Kind.START, parts=(s.p.public, s.mt.root, u(1), u(6), u(BP), u(BC), u(PF)))
    assert s.g.handle("P", bad, 1) == []
    pricey = Message(Kind.START, parts=(s.p.public, s.mt.root, u(1), u(N), u(BC), u(BC), u(PF)))
    assert s.g.handle("P", pricey, 1) == []


def test_download_sale_payouts():
    s = Session()
    s.prepare()
    s.send("C", Message(Kind.DELIVERED))
    s.send("D", Message(Kind.VFD_PROOF, s.g.state.sid, 5, (s.receipt(5, s.d.public),)))
    assert s.g.state.sigma == "revealing" and s.g.state.ctr == 5
    erk = encrypt_reveal_set(reveal_keys(N, 5, s.mk), s.vk.public, s.rng)
    s.send("P", Message(Kind.REVEAL_KEYS, s.g.state.sid, 0, (erk.encode(),)))
    # honest reveal set: complaint rejected
    assert s.g.handle("C", Message(Kind.WRONG_RK, s.g.state.sid), s.now + 1) == []
    out = s.expire(s.g.state.t_dispute)
    assert out[0].message.kind == Kind.SOLD and out[0].message.index == 5
    assert s.deltas() == {"P": -5 * BP + 5 * BC, "D": 5 * BP, "C": -5 * BC}
    assert s.ledger.escrow["G"] == 0


def test_download_receipt_signed_for_someone_else_rejected():
    s = Session()
    s.prepare()
    s.send("C", Message(Kind.DELIVERED))
    wrong = s.receipt(5, s.p.public)
    assert s.g.handle("D", Message(Kind.VFD_PROOF, s.g.state.sid, 5, (wrong,)), s.now + 1) == []


def test_download_nothing_delivered_refunds_everyone():
    s = Session()
    s.prepare()
    s.expire(s.g.state.t_deliver)
    out = s.expire(s.g.state.t_proof)
    assert out[0].message.kind == Kind.NOT_SOLD
    assert s.deltas() == {"P": 0, "D": 0, "C": 0}
    assert s.g.is_final() and not s.g.armed()


def test_download_missing_reveal_penalizes_provider():
    s = Session()
    s.prepare()
    s.send("C", Message(Kind.DELIVERED))
    s.send("D", Message(Kind.VFD_PROOF, s.g.state.sid, 8, (s.receipt(8, s.d.public),)))
    s.expire(s.g.state.t_reveal)
    assert s.deltas() == {"P": -N * BP - PF, "D": N * BP, "C": PF}


def test_download_short_reveal_lets_consumer_complain():
    s = Session()
    s.prepare()
    s.send("C", Message(Kind.DELIVERED))
    s.send("D", Message(Kind.VFD_PROOF, s.g.state.sid, 7, (s.receipt(7, s.d.public),)))
    erk = encrypt_reveal_set(reveal_keys(N, 6, s.mk), s.vk.public, s.rng)
    s.send("P", Message(Kind.REVEAL_KEYS, s.g.state.sid, 0, (erk.encode(),)))
    s.send("C", Message(Kind.WRONG_RK, s.g.state.sid))
    assert s.deltas() == {"P": -7 * BP - PF, "D": 7 * BP, "C": PF}


def _pom_setup(s, ctr, bad_index):
    """Provider signs garbage for chunk bad_index; returns what the consumer sees."""
    cts = [sym_encrypt(k, c) for k, c in zip(s.keys, s.chunks)]
    cts[bad_index - 1] = s.rng.randbytes(64)
    sigs = [sign(chunk_payload(s.cid, i, c), s.p.secret) for i, c in enumerate(cts, 1)]
    s.prepare()
    s.send("C", Message(Kind.DELIVERED))
    s.send("D", Message(Kind.VFD_PROOF, s.g.state.sid, ctr, (s.receipt(ctr, s.d.public),)))
    erk = encrypt_reveal_set(reveal_keys(N, ctr, s.mk), s.vk.public, s.rng)
    s.send("P", Message(Kind.REVEAL_KEYS, s.g.state.sid, 0, (erk.encode(),)))
    return cts, sigs, erk


def _pom(s, cts, sigs, erk, i):
    j = next(j for j, (pos, _) in enumerate(erk.items)
             if pos == 0 or (N - 1 + i - 1) in _subtree(pos))
    m, proof = prove_pke(s.vk.secret, erk.items[j][1], random_scalar(s.rng))
    return PomDownload(i, j, cts[i - 1], sigs[i - 1], s.mt.leaf(i), gen_mtp(s.mt, i), m, erk, proof)


def _subtree(pos):
    out, frontier = set(), [pos]
    while frontier:
        p = frontier.pop()
        out.add(p)
        if 2 * p + 1 < 2 * N - 1:
            frontier += [2 * p + 1, 2 * p + 2]
    return out


def test_download_pom_refunds_consumer():
    s = Session(seed=4)
    cts, sigs, erk = _pom_setup(s, 7, 3)
    # a complaint about a correct chunk does not verify
    honest = _pom(s, cts, sigs, erk, 2).to_message(s.g.state.sid)
    assert s.g.handle("C", honest, s.now + 1) == []
    s.send("C", _pom(s, cts, sigs, erk, 3).to_message(s.g.state.sid))
    assert s.g.state.sigma == "not_sold"
    assert s.deltas() == {"P": -7 * BP - PF, "D": 7 * BP, "C": PF}


def test_download_pom_after_window_rejected():
    s = Session(seed=5)
    cts, sigs, erk = _pom_setup(s, 4, 1)
    pom = _pom(s, cts, sigs, erk, 1).to_message(s.g.state.sid)
    assert s.g.handle("C", pom, s.g.state.t_dispute) == []


def _stream_setup(s, ctr_d=None, ctr_p=None):
    s.prepare()
    if ctr_d:
        s.send("D", Message(Kind.CLAIM_DELIVERY, s.g.state.sid, ctr_d, (s.receipt(ctr_d, s.d.public),)))
    if ctr_p:
        s.send("P", Message(Kind.CLAIM_REVEALING, s.g.state.sid, ctr_p, (s.receipt(ctr_p, s.p.public),)))


def test_stream_full_claim_settles_sale():
    s = Session("stream")
    _stream_setup(s, ctr_d=N, ctr_p=N)
    out = s.expire(s.g.state.t_finish)
    assert out[-1].message.kind == Kind.SOLD
    assert s.deltas() == {"P": -N * BP + N * BC, "D": N * BP, "C": -N * BC}


def test_stream_partial_claims_need_received():
    s = Session("stream")
    s.prepare()
    partial = Message(Kind.CLAIM_DELIVERY, s.g.state.sid, 5, (s.receipt(5, s.d.public),))
    assert s.g.handle("D", partial, s.now + 1) == []
    s.send("C", Message(Kind.RECEIVED, s.g.state.sid))
    s.send("D", partial)
    s.send("P", Message(Kind.CLAIM_REVEALING, s.g.state.sid, 4, (s.receipt(4, s.p.public),)))
    s.expire(s.g.state.t_finish)
    assert s.g.state.ctr == 5
    assert s.deltas() == {"P": -5 * BP + 5 * BC, "D": 5 * BP, "C": -5 * BC}


def test_stream_claims_are_monotone_and_key_bound():
    s = Session("stream")
    _stream_setup(s, ctr_d=N)
    sid = s.g.state.sid
    assert s.g.handle("D", Message(Kind.CLAIM_DELIVERY, sid, 3, (s.receipt(3, s.d.public),)), s.now + 1) == []
    # receipt addressed to the deliverer does not pay the provider
    assert s.g.handle("P", Message(Kind.CLAIM_REVEALING, sid, N, (s.receipt(N, s.d.public),)), s.now + 1) == []
    assert s.g.handle("C", Message(Kind.CLAIM_REVEALING, sid, N, (s.receipt(N, s.p.public),)), s.now + 1) == []


def test_stream_pom_sets_penalty():
    s = Session("stream", seed=2)
    s.prepare()
    sid = s.g.state.sid
    i = 6
    bad = s.rng.randbytes(64)
    k = s.keys[i - 1]
    pom = PomStream(i, bad, sign(chunk_payload(s.cid, i, bad), s.p.secret), k,
                    sign(key_payload(sid, i, k), s.p.secret), s.mt.leaf(i), gen_mtp(s.mt, i))
    good = sym_encrypt(k, s.chunks[i - 1])
    honest = PomStream(i, good, sign(chunk_payload(s.cid, i, good), s.p.secret), k,
                       pom.key_sig, s.mt.leaf(i), gen_mtp(s.mt, i))
    assert H(s.chunks[i - 1]) == s.mt.leaf(i)
    assert s.g.handle("C", honest.to_message(sid), s.now + 1) == []
    s.send("C", pom.to_message(sid))
    assert s.g.state.plt and s.g.state.sigma == "received"
    for who, pk in (("D", s.d.public), ("P", s.p.public)):
        kind = Kind.CLAIM_DELIVERY if who == "D" else Kind.CLAIM_REVEALING
        s.send(who, Message(kind, sid, 5, (s.receipt(5, pk),)))
    s.expire(s.g.state.t_finish)
    # provider keeps the five paid chunks but loses the penalty
    assert s.deltas() == {"P": -5 * BP + 5 * BC - PF, "D": 5 * BP, "C": -5 * BC + PF}


def test_stream_no_claims_refunds():
    s = Session("stream")
    s.prepare()
    s.expire(s.g.state.t_receive)
    out = s.expire(s.g.state.t_finish)
    assert out[-1].message.kind == Kind.NOT_SOLD
    assert s.deltas() == {"P": 0, "D": 0, "C": 0}


def test_repeat_and_withdraw():
    s = Session("stream", funds={"P": 2 * (N * BP + PF), "D": 0, "C": 2 * N * BC})
    s.send("P", Message(Kind.START, parts=(s.p.public, s.mt.root, u(2), u(N), u(BP), u(BC), u(PF))))
    s.send("D", Message(Kind.JOIN, parts=(s.d.public,)))
    s.send("D", Message(Kind.PREPARED))
    for _ in range(2):
        s.send("C", Message(Kind.CONSUME, parts=(s.c.public, b"")))
        s.send("D", Message(Kind.CLAIM_DELIVERY, s.g.state.sid, N, (s.receipt(N, s.d.public),)))
        s.expire(s.g.state.t_finish)
        s.send("P", Message(Kind.RESET))
    assert s.g.handle("C", Message(Kind.CONSUME, parts=(s.c.public, b"")), s.now + 1) == []
    s.send("P", Message(Kind.WITHDRAW))
    assert s.g.state.sigma == "closed" and s.ledger.escrow["G"] == 0
    assert s.deltas() == {"P": 2 * N * (BC - BP), "D": 2 * N * BP, "C": -2 * N * BC}
    assert len({st["sid"] for st in s.g.settlements}) == 2


def _random_tx(s, rng):
    sid = s.g.state.sid
    i = rng.choice([N, N, rng.randint(0, N + 1)])
    erk = lambda: encrypt_reveal_set(reveal_keys(N, rng.randint(1, N), s.mk), s.vk.public, s.rng)
    choices = [
        ("P", lambda: Message(Kind.START, parts=(s.p.public, s.mt.root, u(rng.randint(1, 2)), u(N),
                                                  u(BP), u(BC), u(PF)))),
        ("D", lambda: Message(Kind.JOIN, parts=(s.d.public,))),
        ("D", lambda: Message(Kind.PREPARED)),
        ("C", lambda: Message(Kind.CONSUME, parts=(s.c.public, s.vk.public.encode() if rng.random() < .9 else b""))),
        ("C", lambda: Message(Kind.DELIVERED, sid)),
        ("D", lambda: Message(Kind.VFD_PROOF, sid, i, (s.receipt(i, rng.choice([s.d.public, s.p.public])),))),
        ("P", lambda: Message(Kind.REVEAL_KEYS, sid, 0, (erk().encode(),))),
        ("C", lambda: Message(Kind.WRONG_RK, sid)),
        ("C", lambda: Message(Kind.RECEIVED, sid)),
        ("D", lambda: Message(Kind.CLAIM_DELIVERY, sid, i, (s.receipt(i, s.d.public),))),
        ("P", lambda: Message(Kind.CLAIM_REVEALING, sid, i, (s.receipt(i, s.p.public),))),
        ("P", lambda: Message(Kind.RESET)),
        ("C", lambda: Message(Kind.SOLD, sid)),
    ]
    who, make = rng.choice(choices)
    if rng.random() < 0.02:
        who, make = "P", lambda: Message(Kind.WITHDRAW)
    if rng.random() < 0.15:
        who = rng.choice("PDCX")
    return who, make()


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(["download", "stream"]), st.integers(min_value=0, max_value=10**6))
def test_random_transaction_sequences_stay_legal(mode, seed):
    s = Session(mode, seed=seed % 7,
                funds={"P": 4 * (N * BP + PF), "D": 0, "C": 4 * N * BC, "X": 4 * N * BC})
    rng = random.Random(seed)
    total = s.ledger.total()
    for _ in range(80):
        s.now += rng.choice([0, 0, 1, 3, 12])
        s.g.on_timeouts(s.now)
        who, msg = _random_tx(s, rng)
        s.g.handle(who, msg, s.now)
        assert s.ledger.total() == total
        assert all(v >= 0 for v in s.ledger.balances.values())
        assert s.ledger.escrow.get("G", 0) >= 0
    edges = DOWNLOAD_EDGES if mode == "download" else STREAM_EDGES
    assert set(s.g.transitions) <= edges
