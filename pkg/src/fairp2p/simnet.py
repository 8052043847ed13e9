"""Synchronous-round scheduler, transcripts and the invariant checker.

Each round runs in a fixed order: contract transactions due this round, then
contract timeouts, then every party in ``ORDER`` (inbox first, then tick).
Envelopes land one round after sending unless the adversary stretches them,
never later than ``delta`` rounds.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
import hashlib
import json
import random
from typing import Callable

from .adversary import AdversarySpec, EvilConsumer, EvilDeliverer, EvilProvider, role_of
from .arbiter import ContractTimers, DownloadArbiter, Ledger, StreamArbiter
from .crypto import BUILD_CONSTANTS
from .crypto.hashing import H
from .crypto.symmetric import sym_decrypt
from .crypto.vpke import decode_from_group, vdec
from .errors import DecodeError, FairP2PError
from .keytree import EncryptedRevealSet, RevealSet, recover_chunk_key
from .merkle import build_mt
from .messages import Kind, Message, decode
from .protocols import Consumer, Deliverer, Directory, Provider, SessionConfig
from . import vfd

SCHEMA = "fairp2p-transcript/1"
CONTRACT = "G"


def party_order(sessions: int) -> list[str]:
    consumers = ["C"] + [f"C{k}" for k in range(2, sessions + 1)]
    return ["P", "D"] + consumers


def round_cap(cfg: SessionConfig) -> int:
    return (16 * cfg.n + 64) * cfg.delta * cfg.sessions


def opening_balances(cfg: SessionConfig, names) -> dict[str, int]:
    out = {}
    for name in names:
        if name == "P":
            out[name] = cfg.theta * (cfg.n * cfg.price_p + cfg.penalty_fee) + 1000
        elif name == "D":
            out[name] = 1000
        else:
            out[name] = cfg.n * cfg.price_c + 1000
    return out


@dataclass(frozen=True)
class Envelope:
    seq: int
    src: str
    dst: str
    data: bytes
    sent_at: int
    deliver_at: int


@dataclass
class Transcript:
    header: dict
    records: list[dict] = field(default_factory=list)
    opening: dict[str, int] = field(default_factory=dict)
    final: dict[str, int] = field(default_factory=dict)
    escrow: int = 0
    rounds: int = 0
    cap_hit: bool = False
    halt_rounds: dict[str, int | None] = field(default_factory=dict)
    bytes_sent: dict[str, int] = field(default_factory=dict)
    bytes_received: dict[str, int] = field(default_factory=dict)
    sent_by_kind: dict[str, dict[str, int]] = field(default_factory=dict)
    conservation_breaks: list[int] = field(default_factory=list)
    negative_balances: list[int] = field(default_factory=list)
    settlements: list[dict] = field(default_factory=list)
    contract_counters: dict = field(default_factory=dict)
    transitions: list[tuple[str, str]] = field(default_factory=list)
    # in-memory only: used by the invariant checker, never serialized
    content: list[bytes] = field(default_factory=list, repr=False)
    outputs: dict[str, list[bytes]] = field(default_factory=dict, repr=False)
    decrypt_rounds: dict[str, dict[int, int]] = field(default_factory=dict, repr=False)
    knowledge: list[dict] = field(default_factory=list, repr=False)
    inbox: dict[str, list[bytes]] = field(default_factory=dict, repr=False)
    leaf_keys: list[bytes] = field(default_factory=list, repr=False)
    plaintext: list[bytes] = field(default_factory=list, repr=False)
    session_start: list[int] = field(default_factory=list)

    def delta(self, party: str) -> int:
        return self.final.get(party, 0) - self.opening.get(party, 0)

    def final_record(self) -> dict:
        return {
            "type": "final", "rounds": self.rounds, "cap_hit": self.cap_hit,
            "opening": self.opening, "final": self.final, "escrow": self.escrow,
            "halt_rounds": self.halt_rounds, "bytes_sent": self.bytes_sent,
            "bytes_received": self.bytes_received, "sent_by_kind": self.sent_by_kind,
            "settlements": self.settlements, "contract": self.contract_counters,
            "session_start": self.session_start,
        }

    def to_jsonl(self) -> str:
        lines = [self.header] + self.records + [self.final_record()]
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in lines)


def _build_party(name, cfg, rng, book, chunks, spec: AdversarySpec):
    role = role_of(name)
    corrupt = name in spec.corrupted
    dev = dict(spec.deviations.get(name, {}))
    if role == "P":
        return EvilProvider(name, cfg, rng, book, chunks, deviations=dev) if corrupt \
            else Provider(name, cfg, rng, book, chunks)
    if role == "D":
        return EvilDeliverer(name, cfg, rng, book, deviations=dev) if corrupt \
            else Deliverer(name, cfg, rng, book)
    return EvilConsumer(name, cfg, rng, book, deviations=dev) if corrupt else Consumer(name, cfg, rng, book)


def make_content(cfg: SessionConfig, seed: int) -> list[bytes]:
    rng = random.Random(f"{seed}:content")
    return [rng.randbytes(cfg.eta) for _ in range(cfg.n)]


ContractFactory = Callable[[SessionConfig, Ledger, ContractTimers], object]


def default_contract(cfg: SessionConfig, ledger: Ledger, timers: ContractTimers):
    cls = DownloadArbiter if cfg.mode == "download" else StreamArbiter
    return cls(ledger, timers, CONTRACT)


def run(cfg: SessionConfig, spec: AdversarySpec | None = None, seed: int = 0,
        content: list[bytes] | None = None, name: str = "adhoc",
        contract_factory: ContractFactory | None = None) -> Transcript:
    spec = spec or AdversarySpec()
    names = party_order(cfg.sessions)
    spec.validate(names)
    chunks = list(content) if content is not None else make_content(cfg, seed)

    book = Directory(contract=CONTRACT)
    parties = {}
    for nm in names:
        parties[nm] = _build_party(nm, cfg, random.Random(f"{seed}:{nm}"), book,
                                   chunks if nm == "P" else None, spec)
    coalition = {nm: parties[nm] for nm in spec.corrupted}
    for nm in spec.corrupted:
        parties[nm].coalition = coalition
    adv_rng = random.Random(f"{seed}:adversary")

    ledger = Ledger(opening_balances(cfg, names))
    supply = ledger.total()
    timers = ContractTimers.defaults(cfg.n, cfg.delta)
    contract = (contract_factory or default_contract)(cfg, ledger, timers)

    header = {
        "type": "header", "schema": SCHEMA, "scenario": name, "seed": seed,
        "config": asdict(cfg), "order": [CONTRACT] + names, "build": BUILD_CONSTANTS,
        "adversary": {"corrupted": sorted(spec.corrupted), "deviations": spec.deviations,
                      "triggers": [asdict(t) for t in spec.triggers]},
    }
    tr = Transcript(header=header, opening=dict(ledger.balances), content=chunks)
    everyone = [CONTRACT] + names
    tr.bytes_sent = {p: 0 for p in everyone}
    tr.bytes_received = {p: 0 for p in everyone}
    tr.sent_by_kind = {p: {} for p in everyone}
    tr.inbox = {p: [] for p in names}

    pending: list[Envelope] = []
    seq = 0
    crashed: set[str] = set()
    fired: set[int] = set()

    def post(src, dst, msg: Message, now):
        nonlocal seq
        if src in crashed:
            return
        deliver_at = now + 1
        data = msg.encode()
        extra = []
        for k, trig in enumerate(spec.triggers):
            if trig.once and k in fired:
                continue
            if not trig.matches(src, dst, msg, now):
                continue
            if trig.once:
                fired.add(k)
            if trig.action == "abort":
                crashed.add(src)
                parties[src].halt(now)
                tr.records.append({"type": "crash", "round": now, "party": src})
                return
            if trig.action == "withhold":
                tr.records.append({"type": "msg", "round": now, "src": src, "dst": dst,
                                   "kind": msg.kind.name, "index": msg.index, "fate": "withheld"})
                return
            if trig.action == "substitute-payload" and msg.parts:
                parts = list(msg.parts)
                k_part = min(trig.part, len(parts) - 1)
                if parts[k_part]:
                    parts[k_part] = parts[k_part][:-1] + bytes([parts[k_part][-1] ^ 0x01])
                msg = Message(msg.kind, msg.sid, msg.index, tuple(parts))
                data = msg.encode()
            elif trig.action == "delay-to-max":
                deliver_at = now + cfg.delta
            elif trig.action == "send-forged":
                forged = tuple(adv_rng.randbytes(len(p)) for p in msg.parts)
                extra.append(Message(msg.kind, msg.sid, msg.index, forged).encode())
        for blob in [data] + extra:
            pending.append(Envelope(seq, src, dst, blob, now, deliver_at))
            seq += 1
            tr.bytes_sent[src] += len(blob)
            kinds = tr.sent_by_kind[src]
            kinds[msg.kind.name] = kinds.get(msg.kind.name, 0) + len(blob)

    def emit_events(emitted, now):
        for ev in emitted:
            targets = ev.to if ev.to is not None else names
            data = ev.message.encode()
            for dst in targets:
                nonlocal_seq_post(dst, data, ev.message.kind.name, now)

    def nonlocal_seq_post(dst, data, kind, now):
        nonlocal seq
        pending.append(Envelope(seq, CONTRACT, dst, data, now, now + 1))
        seq += 1
        tr.bytes_sent[CONTRACT] += len(data)
        kinds = tr.sent_by_kind[CONTRACT]
        kinds[kind] = kinds.get(kind, 0) + len(data)

    def take(dst, now):
        due = [e for e in pending if e.dst == dst and e.deliver_at <= now]
        if due:
            keep = [e for e in pending if not (e.dst == dst and e.deliver_at <= now)]
            pending[:] = keep
        return sorted(due, key=lambda e: e.seq)

    def unpack(env: Envelope, now):
        tr.bytes_received[env.dst] += len(env.data)
        try:
            msg = decode(env.data)
        except DecodeError:
            tr.records.append({"type": "msg", "round": now, "seq": env.seq, "src": env.src,
                               "dst": env.dst, "bytes": len(env.data), "fate": "undecodable"})
            return None
        tr.records.append({"type": "msg", "round": now, "seq": env.seq, "src": env.src,
                           "dst": env.dst, "kind": msg.kind.name, "index": msg.index,
                           "bytes": len(env.data), "digest": hashlib.sha256(env.data).hexdigest()[:16],
                           "fate": "delivered"})
        return msg

    cap = round_cap(cfg)
    last_ledger = None
    log_mark = 0
    now = 0
    for out in parties["P"].start(0):
        post("P", out[0], out[1], 0)

    while True:
        now += 1
        if now > cap:
            tr.cap_hit = True
            now = cap
            break
        # contract: transactions, then timeouts
        for env in take(CONTRACT, now):
            msg = unpack(env, now)
            if msg is None:
                continue
            before = contract.counters.accepted_calls
            emitted = contract.handle(env.src, msg, now)
            if contract.counters.accepted_calls == before:
                tr.records.append({"type": "reject", "round": now, "seq": env.seq,
                                   "src": env.src, "kind": msg.kind.name, "why": contract.last_reject})
            elif msg.kind == Kind.CONSUME:
                tr.session_start.append(now)
            emit_events(emitted, now)
        emit_events(contract.on_timeouts(now), now)
        for entry in contract.event_log[log_mark:]:
            r, cid, kind, info = entry
            tr.records.append({"type": "event", "round": r, "contract": cid, "kind": kind,
                               "index": info.get("index", 0)})
        log_mark = len(contract.event_log)

        for nm in names:
            party = parties[nm]
            for env in take(nm, now):
                tr.inbox[nm].append(env.data)
                msg = unpack(env, now)
                if msg is None or nm in crashed:
                    continue
                for dst, m in party.receive(env.src, msg, now):
                    post(nm, dst, m, now)
            if nm not in crashed and not party.halted:
                for dst, m in party.tick(now):
                    post(nm, dst, m, now)

        if ledger.total() != supply:
            tr.conservation_breaks.append(now)
        if any(v < 0 for v in ledger.balances.values()) or any(v < 0 for v in ledger.escrow.values()):
            tr.negative_balances.append(now)
        snap = (tuple(sorted(ledger.balances.items())), tuple(sorted(ledger.escrow.items())))
        if snap != last_ledger:
            tr.records.append({"type": "ledger", "round": now, "balances": dict(snap[0]),
                               "escrow": dict(snap[1])})
            last_ledger = snap

        if not pending and not _armed(contract, parties, crashed):
            break

    tr.rounds = now
    tr.final = dict(ledger.balances)
    tr.escrow = sum(ledger.escrow.values())
    tr.halt_rounds = {nm: parties[nm].halt_round for nm in names}
    tr.settlements = list(contract.settlements)
    c = contract.counters
    tr.contract_counters = {"accepted_calls": c.accepted_calls, "accepted_bytes": c.accepted_bytes,
                            "rejected_calls": c.rejected_calls, "by_kind": dict(c.by_kind),
                            "session_bytes": list(c.session_bytes), "phase": contract.state.sigma,
                            "reveal_sizes": [info.get("erk_size") for _, _, k, info in contract.event_log
                                             if k == "REVEALED"]}
    tr.transitions = list(contract.transitions)
    for nm in names:
        p = parties[nm]
        if isinstance(p, Consumer):
            tr.outputs[nm] = list(p.output)
            tr.decrypt_rounds[nm] = dict(p.decrypt_rounds)
    prov = parties["P"]
    tr.leaf_keys = list(getattr(prov, "leaves", []) or [])
    tr.plaintext = chunks
    tr.knowledge = _coalition_knowledge(cfg, spec, parties, tr, chunks)
    return tr


def _armed(contract, parties, crashed) -> bool:
    if contract.deadlines():
        return True
    return any(p.deadlines() for nm, p in parties.items() if nm not in crashed and not p.halted)


# ---------------------------------------------------------------------------
# what the corrupted coalition can decrypt


def _coalition_knowledge(cfg, spec, parties, tr, chunks) -> list[dict]:
    """Per session: how many valid plaintext chunks the corrupted parties can derive."""
    if not spec.corrupted:
        return []
    mt = build_mt(chunks)
    n = cfg.n
    held: list[bytes] = []
    for nm in spec.corrupted:
        held += tr.inbox[nm]
    msgs = []
    for data in held:
        try:
            msgs.append(decode(data))
        except DecodeError:
            pass
    d_chunks = {}
    if "D" in spec.corrupted:
        d_chunks = {i + 1: c for i, (c, _) in enumerate(parties["D"].chunks)}
    consumers = {p.keys.public: nm for nm, p in parties.items()
                 if isinstance(p, Consumer) and p.keys is not None}
    sessions = {}
    for m in msgs:
        if m.kind == Kind.INITIATED and m.sid not in sessions:
            sessions[m.sid] = consumers.get(m.parts[0])
    out = []
    for sid, cname in sessions.items():
        ciphers = dict(d_chunks)
        keys: dict[int, bytes] = {}
        for m in msgs:
            if m.sid != sid:
                continue
            if m.kind == Kind.DELIVER and len(m.parts) == 2:
                ciphers.setdefault(m.index, m.parts[0])
            elif m.kind == Kind.KEY_REVEAL and len(m.parts) == 2 and len(m.parts[0]) == 32:
                keys.setdefault(m.index, m.parts[0])
        if cname in spec.corrupted and cfg.mode == "download":
            vkeys = parties[cname].vkeys
            for m in msgs:
                if m.sid == sid and m.kind == Kind.REVEALED:
                    keys.update(_keys_from_erk(m.parts[0], vkeys.secret, n))
        known = 0
        for i, c in ciphers.items():
            k = keys.get(i)
            if k is None or not 1 <= i <= n:
                continue
            try:
                if H(sym_decrypt(k, c)) == mt.leaf(i):
                    known += 1
            except FairP2PError:
                pass
        out.append({"sid": sid.hex(), "consumer": cname, "known": known})
    return out


def _keys_from_erk(blob: bytes, vsk: int, n: int) -> dict[int, bytes]:
    try:
        erk = EncryptedRevealSet.decode(blob)
    except DecodeError:
        return {}
    out = {}
    for j, (pos, ct) in enumerate(erk.items):
        try:
            value = decode_from_group(vdec(vsk, ct))
        except DecodeError:
            continue
        rk = RevealSet(((pos, value),))
        for i in range(1, n + 1):
            k = recover_chunk_key(i, 0, n, rk)
            if k is not None:
                out[i] = k
    return out


# ---------------------------------------------------------------------------
# invariant checks


@dataclass(frozen=True)
class Verdict:
    check: str
    property: str
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


def timeliness_bound(cfg: SessionConfig) -> int:
    """Per-session halting bound in rounds: linear in n with a small constant."""
    per_chunk = 2 if cfg.mode == "download" else 4
    return (per_chunk * cfg.n + 32) * cfg.delta * cfg.sessions


def deliver_message_size(cfg: SessionConfig) -> int:
    return len(Message(Kind.DELIVER, bytes(32), 1, (bytes(cfg.eta), bytes(64))))


def check_invariants(tr: Transcript, cfg: SessionConfig, spec: AdversarySpec | None = None,
                     expect: dict | None = None) -> list[Verdict]:
    spec = spec or AdversarySpec()
    names = party_order(cfg.sessions)
    honest = [nm for nm in names if nm not in spec.corrupted]
    out = []

    breaks = tr.conservation_breaks + tr.negative_balances
    total_open = sum(tr.opening.values())
    total_close = sum(tr.final.values()) + tr.escrow
    out.append(Verdict("conservation", "ledger conservation",
                       not breaks and total_open == total_close,
                       f"supply {total_open} -> {total_close}; bad rounds {breaks[:5]}"))

    for nm in (x for x in honest if role_of(x) == "C"):
        got = tr.outputs.get(nm, [])
        valid = 0
        for k, chunk in enumerate(got):
            if k < len(tr.content) and chunk == tr.content[k]:
                valid += 1
            else:
                break
        paid = max(0, -tr.delta(nm))
        ok = valid == len(got) and paid <= valid * cfg.price_c and paid % cfg.price_c == 0
        out.append(Verdict(f"consumer_fairness[{nm}]", "consumer fairness", ok,
                           f"paid {paid}, valid chunks {valid}/{len(got)}"))

    if "D" in honest:
        unit = deliver_message_size(cfg)
        sent = tr.sent_by_kind["D"].get("DELIVER", 0)
        gain = tr.delta("D")
        paid_chunks = gain // cfg.price_p if cfg.price_p else sum(s["ctr"] for s in tr.settlements)
        unpaid = sent - paid_chunks * unit
        out.append(Verdict("delivery_fairness", "delivery fairness (unpaid at most one chunk)",
                           unpaid <= unit and gain >= 0,
                           f"sent {sent} B, paid {paid_chunks} chunks of {unit} B, unpaid {max(unpaid, 0)} B"))

    if "P" in honest:
        margin = cfg.price_c - cfg.price_p
        bound = sum(max(k["known"] - 1, 0) * margin for k in tr.knowledge)
        gain = tr.delta("P")
        out.append(Verdict("provider_fairness", "provider fairness (unpaid at most one chunk)",
                           gain >= bound,
                           f"gain {gain}, required {bound}, known {[k['known'] for k in tr.knowledge]}"))

    if "D" in honest or not any(role_of(x) == "C" for x in spec.corrupted):
        leaked = _deliverer_leaks(tr)
        out.append(Verdict("confidentiality", "confidentiality against the deliverer", not leaked,
                           "; ".join(leaked[:3]) or "no keys or plaintext in the deliverer's view"))

    bound = timeliness_bound(cfg)
    late = {nm: tr.halt_rounds.get(nm) for nm in honest
            if tr.halt_rounds.get(nm) is None or tr.halt_rounds[nm] > bound}
    out.append(Verdict("timeliness", "timeliness (linear halting bound)", not late,
                       f"bound {bound}; late or unhalted {late}" if late else f"bound {bound}"))
    out.append(Verdict("liveness", "liveness (round cap)", not tr.cap_hit,
                       f"{tr.rounds} rounds, cap {round_cap(cfg)}"))

    for key, want in sorted((expect or {}).items()):
        out.append(_expectation(tr, key, want))
    return out


def _deliverer_leaks(tr: Transcript) -> list[str]:
    view = tr.inbox.get("D", [])
    bad = []
    kinds = set()
    for data in view:
        try:
            kinds.add(decode(data).kind)
        except DecodeError:
            pass
    if Kind.KEY_REVEAL in kinds:
        bad.append("received a key reveal")
    blob = b"\x00".join(view)
    for i, k in enumerate(tr.leaf_keys, 1):
        if k in blob:
            bad.append(f"leaf key {i} visible")
            break
    for i, m in enumerate(tr.plaintext, 1):
        if any(m) and m in blob:
            bad.append(f"plaintext chunk {i} visible")
            break
    return bad


def _expectation(tr: Transcript, key: str, want) -> Verdict:
    last = tr.settlements[-1] if tr.settlements else {}
    by_kind = tr.contract_counters.get("by_kind", {})
    if key == "outcome":
        got = last.get("outcome")
    elif key == "ctr":
        got = last.get("ctr")
    elif key == "pom_accepted":
        got = bool(by_kind.get("POM_DOWNLOAD") or by_kind.get("POM_STREAM"))
    elif key == "wrong_rk_accepted":
        got = bool(by_kind.get("WRONG_RK"))
    elif key == "penalized":
        got = bool(last.get("penalized"))
    elif key == "sessions":
        got = len(tr.settlements)
    elif key == "phase":
        got = tr.contract_counters.get("phase")
    elif key.startswith("delta:"):
        got = tr.delta(key.split(":", 1)[1])
    elif key.startswith("output:"):
        got = len(tr.outputs.get(key.split(":", 1)[1], []))
    else:
        return Verdict(f"expect:{key}", "scenario expectation", False, "unknown expectation key")
    label = {"pom_accepted": "PoM accepted"}.get(key, key)
    return Verdict(f"expect:{key}", "scenario expectation", got == want,
                   f"{label}: expected {want!r}, got {got!r}")


# ---------------------------------------------------------------------------
# standalone fair-delivery harness


@dataclass(frozen=True)
class VfdSchedule:
    sender_abort: int | None = None      # round at which the sender crashes
    receiver_abort: int | None = None
    withhold_receipt: int | None = None  # receiver never acknowledges this index
    bad_chunk: int | None = None         # sender sends an invalid chunk at this index
    skip_chunk: int | None = None        # sender sends chunk i+1 in place of i


@dataclass(frozen=True)
class VfdOutcome:
    n: int
    rounds: int
    sender_halt: int | None
    receiver_halt: int | None
    verified: int        # what the verifier accepts from the sender's proof
    receiver_valid: int  # chunks the receiver holds that satisfy the predicate


def run_vfd(n: int, schedule: VfdSchedule = VfdSchedule(), seed: int = 0, timer: int = 2) -> VfdOutcome:
    from .crypto.signatures import SigKeyPair, sign, verify
    from .messages import chunk_payload

    rng = random.Random(f"{seed}:vfd")
    prov, snd, rcv = (SigKeyPair.generate(rng) for _ in range(3))
    cid = rng.randbytes(32)
    sid = rng.randbytes(32)
    cts = [rng.randbytes(32) for _ in range(n)]
    chunks = tuple((c, sign(chunk_payload(cid, i, c), prov.secret)) for i, c in enumerate(cts, 1))

    def psi(i, c, sig):
        return verify(chunk_payload(cid, i, c), sig, prov.public)

    s = vfd.SenderState(sid, chunks, snd.public, rcv.public, timer=timer)
    r = vfd.ReceiverState(sid, n, rcv.secret, rcv.public, snd.public, psi, timer=timer)
    r = vfd.receiver_activate(r, 0)
    s, first = vfd.sender_activate(s, 0)
    in_flight: list[tuple[int, str, Message]] = []
    s_halt = r_halt = None
    s_dead = r_dead = False

    def sender_out(msgs, now):
        for m in msgs:
            i = m.index
            if schedule.bad_chunk == i:
                m = Message(m.kind, m.sid, i, (m.parts[0], bytes(64)))
            elif schedule.skip_chunk == i and i < n:
                c, sig = chunks[i]
                m = Message(m.kind, m.sid, i, (c, sig))
            in_flight.append((now + 1, "R", m))

    sender_out(first, 0)
    now = 0
    while now < 4 * n + 8:
        now += 1
        if schedule.sender_abort is not None and now >= schedule.sender_abort and not s_dead:
            s_dead, s_halt = True, now
        if schedule.receiver_abort is not None and now >= schedule.receiver_abort and not r_dead:
            r_dead, r_halt = True, now
        due = [x for x in in_flight if x[0] == now]
        in_flight[:] = [x for x in in_flight if x[0] != now]
        for _, dst, m in due:
            if dst == "R" and not r_dead:
                r, acks = vfd.receiver_on_deliver(r, m, now)
                for a in acks:
                    if schedule.withhold_receipt == a.index:
                        continue
                    in_flight.append((now + 1, "S", a))
            elif dst == "S" and not s_dead:
                s, msgs = vfd.sender_on_receipt(s, m, now)
                sender_out(msgs, now)
        if not s_dead:
            s = vfd.sender_tick(s, now)
        if not r_dead:
            r = vfd.receiver_tick(r, now)
        if s.halted and s_halt is None:
            s_halt = now
        if r.halted and r_halt is None:
            r_halt = now
        if (s_dead or s.halted) and (r_dead or r.halted) and not in_flight:
            break
    verified = vfd.verify_proof(s.prove(), sid, n, rcv.public, snd.public)
    valid = sum(1 for i, (c, sig) in enumerate(r.accepted, 1) if psi(i, c, sig))
    return VfdOutcome(n, now, s_halt, r_halt, verified, valid)
