"""The four PA invariants checked per function."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

from pacfi.asm import CALL_KINDS, Kind
from pacfi.cfg import DEFAULT_CHAIN_BUDGET, Cfg
from pacfi.validator.resolve import Certainty, Resolution, Resolver

CALLEE_SAVED = frozenset(f"x{i}" for i in range(19, 30))


class Principle(enum.Enum):
    P1 = "P1"  # complete protection of indirect branches
    P2 = "P2"  # no raw pointer spilled after authentication
    P3 = "P3"  # no signing oracle
    P4 = "P4"  # no unchecked program-counter write

    @property
    def title(self) -> str:
        return {"P1": "complete-protection", "P2": "toctou-spill",
                "P3": "signing-oracle", "P4": "unchecked-pc"}[self.value]


ALL_PRINCIPLES = frozenset(Principle)


@dataclass(frozen=True)
class Violation:
    principle: Principle
    certainty: Certainty
    function: str
    address: int
    trace: tuple[int, ...]
    message: str

    @property
    def key(self) -> tuple:
        return (self.function, self.address, self.principle.value)

    def to_record(self) -> dict:
        return {
            "principle": self.principle.value,
            "kind": self.principle.title,
            "certainty": self.certainty.value,
            "function": self.function,
            "address": f"{self.address:#x}",
            "trace": [f"{a:#x}" for a in self.trace],
            "message": self.message,
        }


def _describe(res: Resolution) -> str:
    text = {
        "load": "value loaded from writable memory",
        "literal-load": "value loaded from a literal pool (memory kind unproven)",
        "xpac": "value stripped of its PAC",
        "call": "a call intervenes before the origin is found",
        "param": "value originates from a function parameter",
        "entry": "value is live at function entry",
        "no-predecessor": "block has no predecessors",
        "unmodeled": "defined by an unmodeled instruction",
        "budget": "path budget exhausted",
    }.get(res.reason, res.reason)
    return "; ".join([text, *res.notes])


def _from_resolution(cfg, principle, index, res, what) -> Violation:
    cert = res.certainty or Certainty.POTENTIAL
    addr = cfg.instr(index).address
    return Violation(principle, cert, cfg.name, addr, (addr,) + res.trace,
                     f"{what} `{cfg.instr(index).text()}`: {_describe(res)}")


def check_indirect_branches(cfg: Cfg, resolver: Resolver | None = None) -> list[Violation]:
    """P1: every br/blr target must come from an authentication (or a fixed address)."""
    resolver = resolver or Resolver(cfg)
    out = []
    for i, c in enumerate(cfg.classes):
        if c.kind in (Kind.INDIRECT_BRANCH, Kind.INDIRECT_CALL) and not c.auth_effect and c.target:
            res = resolver.resolve(i, c.target)
            if res.verdict is not True:
                out.append(_from_resolution(cfg, Principle.P1, i, res, "unauthenticated indirect branch"))
    return out


def check_signing_sites(cfg: Cfg, resolver: Resolver | None = None) -> list[Violation]:
    """P3: a signed value must originate from an address calculation or an authentication."""
    resolver = resolver or Resolver(cfg)
    out = []
    for i, c in enumerate(cfg.classes):
        if c.kind is Kind.PAC_SIGN and c.target:
            res = resolver.resolve(i, c.target)
            if res.verdict is not True:
                out.append(_from_resolution(cfg, Principle.P3, i, res, "possible signing oracle"))
    return out


def check_pc_writes(cfg: Cfg, resolver: Resolver | None = None) -> list[Violation]:
    """P4: ret/eret must consume an authenticated return address."""
    resolver = resolver or Resolver(cfg)
    out = []
    for i, c in enumerate(cfg.classes):
        if c.kind is Kind.RETURN and not c.auth_effect and c.target:
            res = resolver.resolve(i, c.target)
            if res.verdict is not True:
                out.append(_from_resolution(cfg, Principle.P4, i, res, "unchecked control-flow change"))
    return out


def check_no_spill(cfg: Cfg, auth_index: int, sym: str | None = None,
                   budget: int = DEFAULT_CHAIN_BUDGET * 16) -> list[Violation]:
    """P2: walk forward from an aut/xpac site and report stores of the raw value."""
    c0 = cfg.cls(auth_index)
    sym = sym or c0.target
    site = cfg.instr(auth_index).address
    found: dict[int, Violation] = {}
    start = (auth_index + 1, frozenset({sym}), (site,))
    queue = deque([start])
    seen: set[tuple[int, frozenset]] = set()
    steps = 0
    n = len(cfg.function)
    while queue:
        i, live, trace = queue.popleft()
        while True:
            if i >= n or not live:
                break
            if (i, live) in seen:
                break
            seen.add((i, live))
            steps += 1
            if steps > budget:
                break
            c = cfg.cls(i)
            addr = cfg.instr(i).address
            if c.kind is Kind.STORE and live & set(c.srcs):
                if addr not in found:
                    reg = sorted(live & set(c.srcs))[0]
                    found[addr] = Violation(Principle.P2, Certainty.DEFINITE, cfg.name, addr, trace + (addr,),
                                            f"raw pointer {reg} from `{cfg.instr(auth_index).text()}` "
                                            f"stored by `{cfg.instr(i).text()}`")
            if c.kind in (Kind.INDIRECT_BRANCH, Kind.INDIRECT_CALL) and c.target in live:
                break
            if c.kind is Kind.RETURN:
                break
            if c.kind in CALL_KINDS:
                kept = live & CALLEE_SAVED
                if kept and addr not in found:
                    found[addr] = Violation(
                        Principle.P2, Certainty.POTENTIAL, cfg.name, addr, trace + (addr,),
                        f"raw pointer {sorted(kept)[0]} live across call `{cfg.instr(i).text()}` "
                        "in a callee-saved register (may be spilled by the callee)")
                live = kept
            elif c.kind is Kind.ARITH and live & set(c.srcs):
                live = live | set(c.dests)
            elif c.dests:
                live = live - set(c.dests)
            bb = cfg.block_of(i)
            if i == bb.last:
                for s in bb.successors:
                    queue.append((cfg.blocks[s].first, live, trace + (addr,)))
                break
            i += 1
    return [found[a] for a in sorted(found)]


def check_all_spills(cfg: Cfg) -> list[Violation]:
    out = []
    for i, c in enumerate(cfg.classes):
        if c.kind in (Kind.PAC_AUTH, Kind.PAC_STRIP) and c.target:
            out.extend(check_no_spill(cfg, i, c.target))
    return out


def check_addrcalc_call_pac(cfg: Cfg) -> list[Violation]:
    """P3 special case: a call between an address calculation and the sign that uses it."""
    out = []
    for i, c in enumerate(cfg.classes):
        if c.kind is not Kind.PAC_SIGN or not c.target:
            continue
        witness = _addrcalc_across_call(cfg, i, c.target)
        if witness is not None:
            addr = cfg.instr(i).address
            out.append(Violation(Principle.P3, Certainty.POTENTIAL, cfg.name, addr, (addr,) + witness,
                                 f"possible signing oracle `{cfg.instr(i).text()}`: address calculated before "
                                 "a call and signed after it (register may be spilled by the callee)"))
    return out


def _addrcalc_across_call(cfg: Cfg, index: int, sym: str):
    """Backward search over all paths; witness trace or None."""
    stack = [(cfg.block_of(index).id, index - 1, sym, False, ())]
    seen = set()
    while stack:
        bid, i, reg, called, trace = stack.pop()
        bb = cfg.blocks[bid]
        done = False
        while i >= bb.first:
            c = cfg.cls(i)
            addr = cfg.instr(i).address
            if reg in c.dests:
                if c.kind is Kind.ADDR_CALC:
                    if called:
                        return trace + (addr,)
                    done = True
                    break
                if c.kind is Kind.ARITH and c.srcs and not c.constant_src:
                    reg = c.srcs[0]
                    trace = trace + (addr,)
                elif c.kind is Kind.PAC_SIGN:
                    pass
                else:
                    done = True
                    break
            elif c.kind in CALL_KINDS:
                called = True
                trace = trace + (addr,)
            i -= 1
        if done:
            continue
        for p in bb.predecessors:
            key = (p, reg, called)
            if key not in seen:
                seen.add(key)
                stack.append((p, cfg.blocks[p].last, reg, called, trace))
    return None
