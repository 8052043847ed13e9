"""Scenario files: JSON documents describing one configured, possibly adversarial run."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
import json
from pathlib import Path
import random

import jsonschema

from .adversary import AdversarySpec
from .errors import ScenarioError
from .protocols import SessionConfig, pad_content
from .simnet import party_order

_TRIGGER = {
    "type": "object",
    "required": ["party", "action"],
    "additionalProperties": False,
    "properties": {
        "party": {"type": "string"},
        "action": {"enum": ["abort", "withhold", "substitute-payload", "delay-to-max", "send-forged"]},
        "at_round": {"type": ["integer", "null"], "minimum": 0},
        "on_kind": {"type": ["string", "null"]},
        "index": {"type": ["integer", "null"], "minimum": 0},
        "to": {"type": ["string", "null"]},
        "part": {"type": "integer", "minimum": 0},
        "once": {"type": "boolean"},
    },
}

SCHEMA = {
    "type": "object",
    "required": ["name", "mode", "n", "eta", "prices"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "mode": {"enum": ["download", "stream"]},
        "n": {"type": "integer", "minimum": 1},
        "eta": {"type": "integer", "minimum": 32},
        "content_bytes": {"type": ["integer", "null"], "minimum": 1},
        "prices": {
            "type": "object",
            "required": ["provider", "consumer"],
            "additionalProperties": False,
            "properties": {
                "provider": {"type": "integer", "minimum": 0},
                "consumer": {"type": "integer", "minimum": 1},
                "penalty": {"type": ["integer", "null"], "minimum": 0},
            },
        },
        "theta": {"type": "integer", "minimum": 1},
        "sessions": {"type": "integer", "minimum": 1},
        "delta": {"type": "integer", "minimum": 1},
        "timers": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "integer", "minimum": 1}
                           for k in ("vfd", "key_response", "key_receipt", "chunk_receipt")},
        },
        "adversary": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "corrupted": {"type": "array", "items": {"type": "string"}, "maxItems": 2,
                              "uniqueItems": True},
                "deviations": {"type": "object",
                               "additionalProperties": {"type": "object"}},
                "triggers": {"type": "array", "items": _TRIGGER},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "repetitions": {"type": "integer", "minimum": 1},
        "expect": {"type": "object"},
    },
}


@dataclass
class Scenario:
    name: str
    config: SessionConfig
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    seed: int = 0
    repetitions: int = 1
    content_bytes: int | None = None
    expect: dict = field(default_factory=dict)
    description: str = ""

    def content(self, seed: int) -> list[bytes] | None:
        """Raw content padded into chunks, or None to let the simulator draw n full chunks."""
        if self.content_bytes is None:
            return None
        raw = random.Random(f"{seed}:content").randbytes(self.content_bytes)
        chunks, _, _ = pad_content(raw, self.config.eta)
        return chunks

    def with_overrides(self, seed=None, mode=None, n=None, eta=None) -> "Scenario":
        cfg = self.config
        try:
            cfg = replace(cfg, mode=mode or cfg.mode, n=n or cfg.n, eta=eta or cfg.eta)
        except ValueError as exc:
            raise ScenarioError(f"{self.name}: {exc}") from None
        out = replace(self, config=cfg, seed=self.seed if seed is None else seed)
        if n is not None or eta is not None:
            out.content_bytes = None
        return out


def from_dict(doc: dict) -> Scenario:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"schema violation at {where}: {exc.message}") from None
    prices = doc["prices"]
    timers = doc.get("timers", {})
    n = doc["n"]
    content_bytes = doc.get("content_bytes")
    if content_bytes is not None:
        _, n, _ = pad_content(bytes(content_bytes), doc["eta"])
    sessions = doc.get("sessions", 1)
    try:
        cfg = SessionConfig(
            n=n, eta=doc["eta"], price_p=prices["provider"], price_c=prices["consumer"],
            penalty=prices.get("penalty"), theta=doc.get("theta", sessions), mode=doc["mode"],
            delta=doc.get("delta", 1), sessions=sessions,
            vfd_timer=timers.get("vfd", 2), key_response_timer=timers.get("key_response", 2),
            key_receipt_timer=timers.get("key_receipt", 2),
            chunk_receipt_timer=timers.get("chunk_receipt", 4),
        )
        adversary = AdversarySpec.from_dict(doc.get("adversary"))
        adversary.validate(party_order(sessions))
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"{doc['name']}: {exc}") from None
    return Scenario(doc["name"], cfg, adversary, doc.get("seed", 0), doc.get("repetitions", 1),
                    content_bytes, dict(doc.get("expect", {})), doc.get("description", ""))


def load(path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return from_dict(doc)


def bundled_dir() -> Path:
    return Path(str(resources.files("fairp2p") / "scenarios"))


def scenario_files(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise ScenarioError(f"{directory} is not a directory")
    files = sorted(d.glob("*.json"))
    if not files:
        raise ScenarioError(f"no scenario files in {directory}")
    return files

