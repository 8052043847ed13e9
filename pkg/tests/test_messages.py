import pytest
from hypothesis import given, strategies as st

from fairp2p.errors import DecodeError
from fairp2p.messages import (
    EVENTS, OFFCHAIN, PART_COUNTS, TRANSACTIONS, Kind, Message, chunk_payload, decode,
    key_payload, keyreq_payload, mtree_payload, receipt_payload,
)

SID = bytes(range(32))


def _sample(kind, blob=b"xy"):
    count = PART_COUNTS[kind]
    return Message(kind, SID, 7, tuple(blob * (k + 1) for k in range(3 if count is None else count)))


def test_kind_partition_is_complete():
    assert OFFCHAIN | TRANSACTIONS | EVENTS == set(Kind)
    assert not OFFCHAIN & TRANSACTIONS and not TRANSACTIONS & EVENTS


@pytest.mark.parametrize("kind", list(Kind))
def test_every_kind_round_trips(kind):
    msg = _sample(kind)
    data = msg.encode()
    assert len(data) == len(msg)
    assert decode(data) == msg


def test_empty_message_size():
    assert len(Message(Kind.PREPARED, SID).encode()) == 43


@given(st.sampled_from([k for k in Kind if PART_COUNTS[k] is None]),
       st.lists(st.binary(max_size=40), max_size=5), st.integers(min_value=0, max_value=2**64 - 1))
def test_variable_part_round_trip(kind, parts, index):
    msg = Message(kind, SID, index, tuple(parts))
    assert decode(msg.encode()) == msg


def test_truncations_and_trailing_bytes_rejected():
    data = _sample(Kind.DELIVER).encode()
    for cut in range(len(data)):
        with pytest.raises(DecodeError):
            decode(data[:cut])
    with pytest.raises(DecodeError):
        decode(data + b"\x00")


def test_unknown_tag_and_wrong_part_count_rejected():
    data = _sample(Kind.DELIVER).encode()
    with pytest.raises(DecodeError, match="unknown"):
        decode(b"\x7f" + data[1:])
    with pytest.raises(DecodeError):
        decode(bytes([Kind.RECEIPT]) + data[1:])


def test_signed_payloads_are_domain_separated():
    k = b"k" * 32
    payloads = {chunk_payload(SID, 1, k), mtree_payload(SID, 1), receipt_payload(SID, 1, k, k),
                keyreq_payload(SID, 1, k), key_payload(SID, 1, k)}
    assert len(payloads) == 5
    assert len({p[:1] for p in payloads}) == 5
    assert receipt_payload(SID, 1, k, k) != receipt_payload(SID, 2, k, k)
