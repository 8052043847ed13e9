import pytest

from fairp2p.adversary import AdversarySpec
from fairp2p.protocols import SessionConfig, pad_content
from fairp2p.simnet import check_invariants, run

BP, BC = 10, 30


def cfg(mode="download", n=8, **kw):
    return SessionConfig(n=n, eta=64, price_p=BP, price_c=BC, mode=mode, **kw)


def adv(**deviations):
    return AdversarySpec.from_dict({"corrupted": sorted(deviations), "deviations": deviations})


def settle(tr):
    assert len(tr.settlements) == 1
    return tr.settlements[0]


def all_pass(tr, c, spec=None):
    bad = [v for v in check_invariants(tr, c, spec) if not v.passed]
    assert not bad, bad


def test_pad_content_examples():
    chunks, n, size = pad_content(bytes(range(100)), 64)
    assert (n, size) == (2, 100) and chunks[1] == bytes(range(64, 100)) + bytes(28)
    raw = bytes(4 * 64)
    assert pad_content(raw, 64) == ([bytes(64)] * 4, 4, 256)
    chunks, n, _ = pad_content(bytes(3 * 64), 64)
    assert n == 4 and chunks[3] == bytes(64)
    with pytest.raises(ValueError):
        pad_content(b"", 64)
    with pytest.raises(ValueError):
        pad_content(b"x", 48)


def test_session_config_rejects_bad_parameters():
    for kw in ({"n": 6}, {"eta": 40}, {"price_p": 30}, {"mode": "upload"}, {"sessions": 2}):
        with pytest.raises(ValueError):
            SessionConfig(**{"n": 8, "eta": 64, "price_p": BP, "price_c": BC, **kw})
    assert cfg().penalty_fee == 8 * BC // 4


@pytest.mark.parametrize("mode", ["download", "stream"])
def test_honest_run_outputs_content(mode):
    c = cfg(mode, n=4)
    tr = run(c, seed=1)
    s = settle(tr)
    assert s["outcome"] == "sold" and s["ctr"] == 4
    assert tr.outputs["C"] == tr.content
    assert (tr.delta("C"), tr.delta("D"), tr.delta("P")) == (-4 * BC, 4 * BP, 4 * (BC - BP))
    all_pass(tr, c)


def test_deliverer_abort_settles_partial():
    c = cfg(n=4)
    spec = adv(D={"stop_after": 2})
    tr = run(c, spec, seed=2)
    assert settle(tr)["ctr"] == 2
    assert tr.delta("D") == 2 * BP and tr.delta("C") == -2 * BC
    assert tr.outputs["C"] == tr.content[:2]
    all_pass(tr, c, spec)


def test_partial_download_decrypts_prefix():
    c = cfg()
    spec = adv(D={"stop_after": 7})
    tr = run(c, spec, seed=3)
    assert settle(tr)["ctr"] == 7
    assert tr.outputs["C"] == tr.content[:7]


def test_forged_mtree_costs_consumer_nothing():
    c = cfg()
    spec = adv(P={"forged_mtree": True})
    tr = run(c, spec, seed=4)
    assert tr.delta("C") == 0 and tr.outputs.get("C", []) == []
    all_pass(tr, c, spec)


def test_wrong_key_triggers_accepted_pom():
    c = cfg()
    spec = adv(P={"wrong_key": 3})
    tr = run(c, spec, seed=5)
    s = settle(tr)
    assert s["outcome"] == "not_sold" and s["penalized"]
    assert tr.contract_counters["by_kind"].get("POM_DOWNLOAD") == 1
    assert tr.delta("C") == c.penalty_fee
    assert tr.delta("D") == 8 * BP
    all_pass(tr, c, spec)


def test_short_reveal_triggers_wrongrk():
    c = cfg()
    spec = adv(P={"short_reveal": True})
    tr = run(c, spec, seed=6)
    assert tr.contract_counters["by_kind"].get("WRONG_RK") == 1
    assert settle(tr)["outcome"] == "not_sold" and tr.delta("C") == c.penalty_fee


def test_tampered_sell_is_refused_by_deliverer():
    c = cfg()
    spec = AdversarySpec.from_dict({"corrupted": ["P"], "triggers": [
        {"party": "P", "action": "substitute-payload", "on_kind": "SELL", "part": 2}]})
    tr = run(c, spec, seed=7)
    assert "ready" not in {b for _, b in tr.transitions}
    assert tr.delta("C") == 0 and tr.delta("D") == 0
    all_pass(tr, c, spec)


def test_stream_wrong_key_sets_penalty():
    c = cfg("stream")
    spec = adv(P={"wrong_key": 2})
    tr = run(c, spec, seed=8)
    s = settle(tr)
    assert s["penalized"] and s["ctr"] == 1
    assert tr.delta("C") == -BC + c.penalty_fee
    assert tr.outputs["C"] == tr.content[:1]
    all_pass(tr, c, spec)


def test_stream_consumer_withholding_leaves_one_unpaid_chunk():
    c = cfg("stream")
    spec = adv(C={"withhold_from": 3})
    tr = run(c, spec, seed=9)
    assert settle(tr)["ctr"] == 2
    assert tr.delta("D") == 2 * BP and tr.delta("C") == -2 * BC
    all_pass(tr, c, spec)


def test_stream_only_provider_claims():
    c = cfg("stream")
    spec = adv(D={"no_claim": True})
    tr = run(c, spec, seed=10)
    assert settle(tr)["ctr"] == 8 and tr.delta("D") == 8 * BP


def test_stream_nobody_claims():
    c = cfg("stream")
    spec = adv(P={"no_claim": True}, D={"no_claim": True})
    tr = run(c, spec, seed=11)
    s = settle(tr)
    assert s["outcome"] == "not_sold" and s["ctr"] == 0
    assert tr.delta("C") == 0 and tr.delta("D") == 0
    all_pass(tr, c, spec)


def test_stream_decrypt_gap_is_constant():
    tr = run(cfg("stream", n=32), seed=12)
    rounds = [tr.decrypt_rounds["C"][i] for i in range(1, 33)]
    gaps = {b - a for a, b in zip(rounds, rounds[1:])}
    assert len(gaps) == 1


def test_second_session_after_reset():
    c = cfg(theta=2, sessions=2)
    tr = run(c, seed=13)
    assert [s["outcome"] for s in tr.settlements] == ["sold", "sold"]
    assert tr.outputs["C"] == tr.content and tr.outputs["C2"] == tr.content
    assert tr.delta("P") == 2 * 8 * (BC - BP)
    all_pass(tr, c)


def test_provider_withdraws_when_deliverer_never_prepares():
    c = cfg()
    spec = AdversarySpec.from_dict({"corrupted": ["D"], "triggers": [
        {"party": "D", "action": "withhold", "on_kind": "PREPARED"}]})
    tr = run(c, spec, seed=14)
    assert tr.transitions[-1] == ("joined", "closed")
    assert tr.delta("P") == 0 and tr.delta("C") == 0 and tr.escrow == 0
    assert tr.halt_rounds["P"] is not None and tr.halt_rounds["C"] is not None
    all_pass(tr, c, spec)
