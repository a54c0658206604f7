"""Scenarios, outcomes and transcripts shared by every attack."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from pacfi.analyzer.corpus import ContextCorpus, Level
from pacfi.pa.model import KeyRole, PaKey, PointerLayout
from pacfi.pa.schemes import ContextScheme

ATTACKS = ("replay", "bruteforce", "preemption", "toctou")
GADGET = 0xFFFF_8000_0BAD_C0DE & ~0x3  # attacker-desired kernel code address
TEXT_BASE = 0xFFFF_8000_1000_0000


@dataclass(frozen=True)
class Capabilities:
    read_all: bool = True
    write_all: bool = True
    preempt_at_will: bool = True


@dataclass(frozen=True)
class Defense:
    level: Level = Level.OBJTYPE            # forward-edge context refinement
    preempt_scheme: ContextScheme = ContextScheme.TIMEBIND
    backoff: bool = False
    key_split: bool = True
    pac_bits: int = 15
    va_bits: int = 48
    enhanced_pac2: bool = False
    fpac: bool = False
    base_delay: int = 1

    @property
    def timebind(self) -> bool:
        return self.preempt_scheme is ContextScheme.TIMEBIND

    def layout(self) -> PointerLayout:
        return PointerLayout(self.va_bits, self.pac_bits, self.enhanced_pac2, self.fpac)


@dataclass(frozen=True)
class Scenario:
    attack: str
    seed: int = 0
    defense: Defense = Defense()
    capabilities: Capabilities = Capabilities()
    corpus: ContextCorpus | None = None
    listing: str | None = None          # assembly text for the toctou attack
    function: str | None = None
    trials: int = 1
    max_attempts: int | None = None
    callee_spills: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.attack not in ATTACKS:
            raise ValueError(f"unknown attack {self.attack!r}; expected one of {', '.join(ATTACKS)}")

    def key(self, role: KeyRole = KeyRole.APIB) -> PaKey:
        """Key material derived from the seed; held by the simulated machine only."""
        return PaKey.from_seed(self.seed, role)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def to_payload(self) -> dict:
        d = self.defense
        return {
            "attack": self.attack,
            "seed": self.seed,
            "trials": self.trials,
            "max_attempts": self.max_attempts,
            "function": self.function,
            "callee_spills": list(self.callee_spills),
            "defense": {
                "level": d.level.value, "preempt_scheme": d.preempt_scheme.value, "backoff": d.backoff,
                "key_split": d.key_split, "pac_bits": d.pac_bits, "va_bits": d.va_bits,
                "enhanced_pac2": d.enhanced_pac2, "fpac": d.fpac, "base_delay": d.base_delay,
            },
            "capabilities": {"read_all": self.capabilities.read_all, "write_all": self.capabilities.write_all,
                             "preempt_at_will": self.capabilities.preempt_at_will},
            "corpus": self.corpus.to_payload() if self.corpus is not None else None,
            "listing": self.listing,
            "params": dict(self.params),
        }

    @classmethod
    def from_payload(cls, p: dict) -> "Scenario":
        d = dict(p.get("defense", {}))
        if "level" in d:
            d["level"] = Level(d["level"])
        if "preempt_scheme" in d:
            d["preempt_scheme"] = ContextScheme(d["preempt_scheme"])
        corpus = ContextCorpus.from_payload(p["corpus"]) if p.get("corpus") else None
        return cls(
            attack=p["attack"], seed=int(p.get("seed", 0)), defense=Defense(**d),
            capabilities=Capabilities(**p.get("capabilities", {})), corpus=corpus,
            listing=p.get("listing"), function=p.get("function"), trials=int(p.get("trials", 1)),
            max_attempts=p.get("max_attempts"), callee_spills=tuple(p.get("callee_spills", ())),
            params=dict(p.get("params", {})),
        )


def load_scenario(path: str | Path) -> Scenario:
    return Scenario.from_payload(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class Action:
    """One attacker or machine event; ``data`` holds JSON-ready values only."""

    step: int
    actor: str      # "attacker" | "kernel"
    kind: str
    data: tuple = ()

    def to_record(self) -> dict:
        return {"step": self.step, "actor": self.actor, "kind": self.kind, "data": dict(self.data)}


@dataclass(frozen=True)
class Outcome:
    attack: str
    success: bool
    attempts: int = 0
    time: int = 0
    transcript: tuple[Action, ...] = ()
    details: dict = field(default_factory=dict)

    def to_payload(self) -> dict:
        return {
            "attack": self.attack,
            "success": self.success,
            "attempts": self.attempts,
            "time": str(self.time) if self.time.bit_length() > 53 else self.time,
            "details": self.details,
            "transcript": [a.to_record() for a in self.transcript],
        }


class Transcript:
    """Append-only event log with a step counter."""

    def __init__(self, limit: int | None = 4096):
        self.events: list[Action] = []
        self.limit = limit
        self.dropped = 0

    def add(self, actor: str, kind: str, **data) -> None:
        if self.limit is not None and len(self.events) >= self.limit:
            self.dropped += 1
            return
        self.events.append(Action(len(self.events) + self.dropped, actor, kind, tuple(sorted(data.items()))))

    def freeze(self) -> tuple[Action, ...]:
        return tuple(self.events)
