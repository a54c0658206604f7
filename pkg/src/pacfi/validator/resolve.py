"""Backward origin resolution for a PA-relevant register."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from pacfi.asm import CALL_KINDS, Kind, Label, Mem
from pacfi.cfg import DEFAULT_CHAIN_BUDGET, Cfg

PARAM_REGS = frozenset(f"x{i}" for i in range(8))
# values the hardware hands a function at entry that an attacker cannot choose:
# the link register written by the caller's ``bl`` and the stack pointer
ENTRY_TRUSTED = frozenset({"x30", "sp"})


class Certainty(enum.Enum):
    DEFINITE = "Definite"
    POTENTIAL = "Potential"


class Taint(enum.Enum):
    PENDING_AUTH = "pending-auth target"
    PRE_SIGN = "pre-sign source"
    RAW_AFTER_AUTH = "raw-after-auth"


@dataclass(frozen=True)
class SymbolicReg:
    reg: str
    taint: Taint

    def __post_init__(self):
        if not self.reg:
            raise ValueError("symbolic register needs a register id")


@dataclass(frozen=True)
class Resolution:
    """Outcome of one backward walk.

    ``verdict`` is True (no violation), False (violation) or None (budget
    exhausted). ``reason`` names the deciding case; ``trace`` lists the
    instruction addresses walked through, nearest first.
    """

    verdict: bool | None
    reason: str
    trace: tuple[int, ...] = ()
    notes: tuple[str, ...] = ()
    certainty: Certainty | None = None

    def __bool__(self) -> bool:
        return self.verdict is True

    def extend(self, addrs, notes=()) -> "Resolution":
        return Resolution(self.verdict, self.reason, tuple(addrs) + self.trace, tuple(notes) + self.notes,
                          self.certainty)


def _ok(reason, addrs=(), notes=()):
    return Resolution(True, reason, tuple(addrs), tuple(notes))


def _bad(reason, certainty, addrs=(), notes=()):
    return Resolution(False, reason, tuple(addrs), tuple(notes), certainty)


RANK = {Certainty.DEFINITE: 0, Certainty.POTENTIAL: 1, None: 2}


@dataclass
class _State:
    budget: int
    visits: int = 0
    memo: dict = field(default_factory=dict)


class Resolver:
    """Implements the block-local case ladder and predecessor recursion."""

    def __init__(self, cfg: Cfg, budget: int = DEFAULT_CHAIN_BUDGET):
        self.cfg = cfg
        self.budget = budget

    def resolve(self, index: int, sym: str) -> Resolution:
        """Resolve ``sym`` backward starting *before* instruction ``index``."""
        block = self.cfg.block_of(index)
        return self.walk(block.id, index - 1, sym, _State(self.budget), arrived_from=None)

    def validate_bb(self, block_id: int, si: int, sym: str) -> Resolution:
        return self.walk(block_id, si, sym, _State(self.budget), arrived_from=None)

    def walk(self, block_id: int, si: int, sym: str, st: _State, arrived_from: int | None) -> Resolution:
        cfg = self.cfg
        bb = cfg.blocks[block_id]
        addrs: list[int] = []
        notes: list[str] = []
        i = si
        while i >= bb.first:
            c = cfg.cls(i)
            ins = cfg.instr(i)
            if sym in c.dests and not (c.writeback and c.mem_base == sym):
                addrs.append(ins.address)
                if c.kind is Kind.ARITH:
                    if c.constant_src or not c.srcs:
                        return _ok("constant", addrs, notes)
                    if len(c.srcs) > 1 and c.srcs[0] != sym:
                        notes.append(f"{ins.address:#x}: also depends on {', '.join(c.srcs[1:])}")
                    sym = c.srcs[0]
                elif c.kind is Kind.LOAD:
                    return self._load(i, c, ins, st, addrs, notes)
                elif c.kind is Kind.ADDR_CALC:
                    return _ok("addrcalc", addrs, notes)
                elif c.kind is Kind.PAC_AUTH:
                    return _ok("auth", addrs, notes)
                elif c.kind is Kind.PAC_STRIP:
                    return _bad("xpac", Certainty.DEFINITE, addrs, notes)
                elif c.kind in CALL_KINDS:
                    if c.authenticates and c.target == sym:
                        return _ok("auth", addrs, notes)
                    return _bad("call", Certainty.POTENTIAL, addrs, notes)
                elif c.kind is Kind.PAC_SIGN:
                    pass  # signs in place: the origin is the earlier value
                else:
                    return _bad("unmodeled", Certainty.POTENTIAL, addrs, notes)
            elif c.kind in CALL_KINDS:
                addrs.append(ins.address)
                return _bad("call", Certainty.POTENTIAL, addrs, notes)
            elif c.kind is Kind.DIRECT_BRANCH:
                target = cfg.target_block(i)
                if target is not None and target != arrived_from:
                    addrs.append(ins.address)
                    sub = self._visit(target, sym, st, arrived_from=None)
                    return sub.extend(addrs, notes)
            i -= 1

        if block_id == cfg.entry:
            res = self._entry(sym, addrs, notes)
            if not bb.predecessors or res.verdict is False:
                return res
        elif not bb.predecessors:
            return _bad("no-predecessor", Certainty.POTENTIAL, addrs, notes)

        outcomes = [self._visit(p, sym, st, arrived_from=block_id) for p in bb.predecessors]
        failing = [r for r in outcomes if r.verdict is not True]
        if not failing:
            return _ok(outcomes[0].reason, addrs, notes)
        worst = min(failing, key=lambda r: (r.verdict is None, RANK[r.certainty]))
        return worst.extend(addrs, notes)

    def _visit(self, block_id: int, sym: str, st: _State, arrived_from: int | None) -> Resolution:
        key = (block_id, sym, arrived_from)
        if key in st.memo:
            got = st.memo[key]
            return _ok("cycle") if got is None else got
        st.visits += 1
        if st.visits > st.budget:
            return Resolution(None, "budget", certainty=Certainty.POTENTIAL)
        st.memo[key] = None
        res = self.walk(block_id, self.cfg.blocks[block_id].last, sym, st, arrived_from)
        st.memo[key] = res
        return res

    def _entry(self, sym, addrs, notes) -> Resolution:
        if sym in ENTRY_TRUSTED:
            return _ok("entry-" + sym, addrs, notes)
        reason = "param" if sym in PARAM_REGS else "entry"
        return _bad(reason, Certainty.POTENTIAL, addrs, notes + [f"{sym} live at function entry"])

    def _load(self, i, c, ins, st, addrs, notes) -> Resolution:
        mem = next((op for op in ins.operands if isinstance(op, Mem)), None)
        if mem is None:
            if any(isinstance(op, Label) for op in ins.operands):
                return _bad("literal-load", Certainty.POTENTIAL, addrs,
                            notes + [f"{ins.address:#x}: literal-pool load"])
            return _bad("load", Certainty.DEFINITE, addrs, notes)
        if mem.base != "sp":
            base = self.walk(self.cfg.block_of(i).id, i - 1, mem.base, _State(st.budget), arrived_from=None)
            if base.verdict is True and base.reason == "addrcalc":
                return _ok("read-only-load", addrs, notes + [f"{ins.address:#x}: base {mem.base} is a fixed address"])
        return _bad("load", Certainty.DEFINITE, addrs, notes)


def validate_bb(cfg: Cfg, block_id: int, si: int, sym: str, budget: int = DEFAULT_CHAIN_BUDGET) -> Resolution:
    """Resolve ``sym`` from instruction ``si`` of block ``block_id`` backward."""
    return Resolver(cfg, budget).validate_bb(block_id, si, sym)
