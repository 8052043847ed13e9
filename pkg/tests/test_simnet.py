import dataclasses
import json

from fairp2p.adversary import AdversarySpec
from fairp2p.arbiter import DownloadArbiter
from fairp2p.protocols import SessionConfig
from fairp2p.simnet import (
    SCHEMA, check_invariants, deliver_message_size, opening_balances, party_order, round_cap, run,
    timeliness_bound,
)

BP, BC = 10, 30


def cfg(mode="download", n=8, **kw):
    return SessionConfig(n=n, eta=64, price_p=BP, price_c=BC, mode=mode, **kw)


def failed(tr, c, spec=None, expect=None):
    return {v.check for v in check_invariants(tr, c, spec, expect) if not v.passed}


def test_sizing_helpers():
    c = cfg()
    assert party_order(3) == ["P", "D", "C", "C2", "C3"]
    assert round_cap(c) == 16 * 8 + 64
    assert timeliness_bound(c) == 2 * 8 + 32
    assert timeliness_bound(cfg("stream")) == 4 * 8 + 32
    assert deliver_message_size(c) == 43 + 4 + 64 + 4 + 64
    bal = opening_balances(c, ["P", "D", "C"])
    assert bal == {"P": 8 * BP + c.penalty_fee + 1000, "D": 1000, "C": 8 * BC + 1000}


def test_same_seed_same_transcript_bytes():
    spec = AdversarySpec.from_dict({"corrupted": ["C"], "deviations": {"C": {"withhold_from": 5}}})
    for mode in ("download", "stream"):
        a = run(cfg(mode), spec, seed=3).to_jsonl()
        b = run(cfg(mode), spec, seed=3).to_jsonl()
        assert a == b
        assert run(cfg(mode), spec, seed=4).to_jsonl() != a


def test_transcript_is_versioned_jsonl():
    lines = run(cfg(n=4), seed=1).to_jsonl().splitlines()
    recs = [json.loads(line) for line in lines]
    assert recs[0]["type"] == "header" and recs[0]["schema"] == SCHEMA
    assert recs[-1]["type"] == "final"
    assert {r["type"] for r in recs} >= {"msg", "event", "ledger"}


def test_byte_counters_match_envelopes():
    tr = run(cfg("stream"), seed=2)
    sums = {}
    for r in tr.records:
        if r["type"] == "msg" and r["fate"] == "delivered":
            sums[r["src"]] = sums.get(r["src"], 0) + r["bytes"]
    assert sums == {k: v for k, v in tr.bytes_sent.items() if v}


def test_honest_messages_arrive_next_round():
    tr = run(cfg(n=4), seed=5)
    deliver = [r for r in tr.records if r["type"] == "msg" and r["kind"] in ("DELIVER", "RECEIPT")]
    rounds = [r["round"] for r in deliver]
    assert rounds == list(range(rounds[0], rounds[0] + len(rounds)))


def test_max_delay_still_fair_and_halts():
    c = cfg(delta=3)
    spec = AdversarySpec.from_dict({"triggers": [{"party": "*", "action": "delay-to-max"}]})
    tr = run(c, spec, seed=6)
    assert not tr.cap_hit and tr.rounds <= timeliness_bound(c)
    assert tr.settlements[0]["ctr"] == 8
    assert failed(tr, c, spec) == set()


def test_checker_flags_tampered_outcomes():
    c = cfg()
    tr = run(c, seed=7)
    assert failed(tr, c) == set()
    # consumer charged for a chunk it never got
    bad = dataclasses.replace(tr, outputs={"C": tr.content[:7]})
    assert "consumer_fairness[C]" in failed(bad, c)
    bad = dataclasses.replace(tr, halt_rounds=dict(tr.halt_rounds, D=None))
    assert "timeliness" in failed(bad, c)
    assert "expect:ctr" in failed(tr, c, expect={"ctr": 5})


class LeakyArbiter(DownloadArbiter):
    """Pays the deliverer without debiting escrow."""

    def _settle_delivery(self, ctr, now):
        self.ledger.balances[self.state.party_d] += 1
        return super()._settle_delivery(ctr, now)


def test_broken_payout_breaks_conservation():
    c = cfg()
    tr = run(c, seed=8, contract_factory=lambda cfg_, led, t: LeakyArbiter(led, t))
    assert tr.conservation_breaks
    assert "conservation" in failed(tr, c)
