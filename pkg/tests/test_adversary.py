import pytest

from fairp2p.adversary import AdversarySpec, Trigger, role_of
from fairp2p.messages import Kind, Message


def spec(**d):
    return AdversarySpec.from_dict(d)


def test_role_of():
    assert [role_of(x) for x in ("P", "D", "C", "C2")] == ["P", "D", "C", "C"]


def test_trigger_matching():
    msg = Message(Kind.RECEIPT, index=3)
    t = Trigger("C", "withhold", on_kind="RECEIPT", index=3, to="D", at_round=5)
    assert t.matches("C", "D", msg, 5)
    assert not t.matches("C", "D", msg, 4)
    assert not t.matches("C", "P", msg, 5)
    assert not t.matches("P", "D", msg, 5)
    assert not t.matches("C", "D", Message(Kind.RECEIPT, index=2), 5)
    assert Trigger("*", "delay-to-max").matches("P", "G", msg, 0)


def test_trigger_rejects_unknown_names():
    with pytest.raises(ValueError):
        Trigger("C", "explode")
    with pytest.raises(ValueError):
        Trigger("C", "withhold", on_kind="NOPE")


@pytest.mark.parametrize("bad", [
    {"corrupted": ["P", "D", "C"]},
    {"corrupted": ["X"]},
    {"corrupted": ["C"], "deviations": {"P": {"wrong_key": 1}}},
    {"corrupted": ["P"], "deviations": {"P": {"withhold_from": 1}}},
    {"corrupted": ["D"], "deviations": {"D": {"sybil": True}}},
    {"triggers": [{"party": "C", "action": "withhold"}]},
])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ValueError):
        spec(**bad).validate(["P", "D", "C"])


def test_valid_specs_accepted():
    spec(corrupted=["D", "C"], deviations={"D": {"sybil": True}, "C": {"sybil": True}}).validate(["P", "D", "C"])
    spec(triggers=[{"party": "*", "action": "delay-to-max"}]).validate(["P", "D", "C"])
    spec(corrupted=["C2"], deviations={"C2": {"no_delivered": True}}).validate(["P", "D", "C", "C2"])
