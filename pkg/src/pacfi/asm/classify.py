"""Mnemonic classification driven by the shipped ``mnemonics.tsv`` table."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from pacfi.asm.operands import Imm, Label, Mem, Reg


class Kind(enum.Enum):
    ARITH = "Arith"
    LOAD = "Load"
    STORE = "Store"
    ADDR_CALC = "AddrCalc"
    PAC_SIGN = "PacSign"
    PAC_AUTH = "PacAuth"
    PAC_STRIP = "PacStrip"
    INDIRECT_BRANCH = "IndirectBranch"
    INDIRECT_CALL = "IndirectCall"
    DIRECT_CALL = "DirectCall"
    DIRECT_BRANCH = "DirectBranch"
    COND_BRANCH = "CondBranch"
    RETURN = "Return"
    OTHER = "Other"


PA_KINDS = frozenset({Kind.PAC_SIGN, Kind.PAC_AUTH, Kind.PAC_STRIP})
BRANCH_KINDS = frozenset({Kind.INDIRECT_BRANCH, Kind.DIRECT_BRANCH, Kind.COND_BRANCH, Kind.RETURN})
CALL_KINDS = frozenset({Kind.DIRECT_CALL, Kind.INDIRECT_CALL})


@dataclass(frozen=True)
class TableEntry:
    kind: Kind
    attrs: tuple[tuple[str, str], ...]

    def get(self, name: str, default: str | None = None) -> str | None:
        for k, v in self.attrs:
            if k == name:
                return v
        return default


@dataclass(frozen=True)
class InstrClass:
    """Classification of one instruction.

    ``dests`` and ``srcs`` hold canonical register names; ``xzr`` never appears
    in ``srcs`` (it is a constant) and an instruction whose only inputs are
    immediates or ``xzr`` has ``constant_src`` set. For PA classes and for
    combined branch-and-authenticate forms, ``key``, ``target`` and ``context``
    are filled in; ``context`` is ``None`` for zero-modifier variants and
    ``"sp"`` for the stack-pointer variants.
    """

    kind: Kind
    dests: tuple[str, ...] = ()
    srcs: tuple[str, ...] = ()
    key: str | None = None
    target: str | None = None
    context: str | None = None
    zero_context: bool = False
    auth_effect: bool = False
    data_key: bool = False
    constant_src: bool = False
    mem_base: str | None = None
    writeback: bool = False
    branch_label: Label | None = None

    @property
    def is_pa(self) -> bool:
        return self.kind in PA_KINDS

    @property
    def authenticates(self) -> bool:
        return self.kind is Kind.PAC_AUTH or self.auth_effect


def parse_table(text: str) -> tuple[dict[str, TableEntry], list[tuple[str, TableEntry]]]:
    exact: dict[str, TableEntry] = {}
    prefix: list[tuple[str, TableEntry]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) < 2:
            raise ValueError(f"mnemonic table line {lineno}: expected mnemonic and class")
        name, kind = fields[0].lower(), Kind(fields[1])
        attrs = tuple((f.split("=", 1)[0], f.split("=", 1)[1] if "=" in f else "1") for f in fields[2:])
        entry = TableEntry(kind, attrs)
        if name.endswith("*"):
            prefix.append((name[:-1], entry))
        else:
            exact[name] = entry
    prefix.sort(key=lambda p: -len(p[0]))
    return exact, prefix


class MnemonicTable:
    def __init__(self, text: str):
        self._exact, self._prefix = parse_table(text)

    @classmethod
    def from_file(cls, path: str | Path) -> "MnemonicTable":
        return cls(Path(path).read_text(encoding="utf-8"))

    def lookup(self, mnemonic: str) -> TableEntry | None:
        m = mnemonic.lower()
        if m in self._exact:
            return self._exact[m]
        for p, entry in self._prefix:
            if m.startswith(p):
                return entry
        return None

    def __contains__(self, mnemonic: str) -> bool:
        return self.lookup(mnemonic) is not None


@lru_cache(maxsize=1)
def default_table() -> MnemonicTable:
    return MnemonicTable(resources.files("pacfi").joinpath("data", "mnemonics.tsv").read_text(encoding="utf-8"))


def _operand_reg(ops, spec: str) -> str | None:
    """Resolve an ``opN`` reference or a fixed register name."""
    if spec.startswith("op"):
        i = int(spec[2:])
        if i < len(ops) and isinstance(ops[i], Reg):
            return ops[i].name
        return None
    return spec


def _operand_is_const(ops, spec: str) -> bool:
    if not spec.startswith("op"):
        return False
    i = int(spec[2:])
    return i < len(ops) and isinstance(ops[i], Imm)


def classify(instr, table: MnemonicTable | None = None) -> InstrClass:
    """Classify one instruction; unknown mnemonics map to ``Other``."""
    entry = (table or default_table()).lookup(instr.mnemonic)
    ops = instr.operands
    mem = next((op for op in ops if isinstance(op, Mem)), None)
    mem_fields = {"mem_base": mem.base if mem else None, "writeback": bool(mem and mem.writeback)}
    if entry is None:
        dest = ops[0].name if ops and isinstance(ops[0], Reg) and ops[0].name != "xzr" else None
        srcs = tuple(op.name for op in ops[1:] if isinstance(op, Reg) and op.name != "xzr")
        return InstrClass(Kind.OTHER, dests=(dest,) if dest else (), srcs=srcs, **mem_fields)

    kind = entry.kind
    dest_specs = [s for s in (entry.get("dests") or "").split(",") if s]
    src_specs = [s for s in (entry.get("srcs") or "").split(",") if s]
    dests = [r for r in (_operand_reg(ops, s) for s in dest_specs) if r and r != "xzr"]
    status = entry.get("status")
    if status:
        r = _operand_reg(ops, status)
        if r and r != "xzr":
            dests.append(r)
    raw_srcs = [_operand_reg(ops, s) for s in src_specs]
    srcs = [r for r in raw_srcs if r and r != "xzr"]
    if entry.get("keepdest"):
        srcs.extend(d for d in dests if d not in srcs)
    constant = kind is Kind.ARITH and not srcs and (
        not src_specs or all(r == "xzr" or _operand_is_const(ops, s) or r is None
                             for r, s in zip(raw_srcs, src_specs)))

    key = entry.get("key")
    target_spec = entry.get("target")
    ctx_spec = entry.get("context")
    target = context = None
    label = None
    zero = False
    if target_spec:
        if kind is Kind.RETURN and ops and isinstance(ops[0], Reg):
            target = ops[0].name
        elif kind in (Kind.DIRECT_BRANCH, Kind.COND_BRANCH, Kind.DIRECT_CALL):
            i = int(target_spec[2:])
            if i < len(ops) and isinstance(ops[i], Label):
                label = ops[i]
        else:
            target = _operand_reg(ops, target_spec)
    if ctx_spec == "zero":
        zero = True
    elif ctx_spec:
        context = _operand_reg(ops, ctx_spec) if ctx_spec.startswith("op") else ctx_spec
    auth = bool(entry.get("auth"))
    if kind is Kind.INDIRECT_CALL or kind is Kind.INDIRECT_BRANCH:
        if target and target not in srcs:
            srcs.insert(0, target)
    if kind in PA_KINDS and target:
        if target not in dests:
            dests.insert(0, target)
        if target not in srcs:
            srcs.insert(0, target)
        if context and context not in ("sp", "chain") and context not in srcs:
            srcs.append(context)

    return InstrClass(
        kind=kind,
        dests=tuple(dests),
        srcs=tuple(srcs),
        key=key,
        target=target,
        context=context,
        zero_context=zero,
        auth_effect=auth,
        data_key=bool(entry.get("data")),
        constant_src=constant,
        branch_label=label,
        **mem_fields,
    )


def is_label_materialization(first, second) -> bool:
    """``adrp xN, sym`` followed by ``add xN, xN, :lo12:sym`` (or ``#imm``)."""
    if first.mnemonic != "adrp" or second.mnemonic != "add" or len(second.operands) < 3:
        return False
    d0 = first.operands[0] if first.operands else None
    a, b = second.operands[0], second.operands[1]
    return isinstance(d0, Reg) and isinstance(a, Reg) and isinstance(b, Reg) and b.name == d0.name
