"""AArch64 operand descriptors and their canonical text form."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

REG_ALIASES = {"lr": "x30", "fp": "x29", "ip0": "x16", "ip1": "x17", "wsp": "sp", "wzr": "xzr"}
CONDITIONS = frozenset(
    "eq ne cs hs cc lo mi pl vs vc hi ls ge lt gt le al nv".split())
SHIFTS = frozenset("lsl lsr asr ror msl uxtb uxth uxtw uxtx sxtb sxth sxtw sxtx".split())

_GPR_RE = re.compile(r"^[xw]([0-9]|[12][0-9]|30)$")
_SIMD_RE = re.compile(r"^[vqdshb]([0-9]|[12][0-9]|3[01])(\.\w+)?(\[\d+\])?$")
_SYSREG_RE = re.compile(r"^[a-z][a-z0-9_]*_el[0-3]$|^(daif|daifset|daifclr|nzcv|spsel|currentel|pan|uao|tco)$")
_INT_RE = re.compile(r"^[-+]?(0x[0-9a-f]+|\d+)$")
_HEXADDR_RE = re.compile(r"^(0x)?([0-9a-f]+)$")
_LABEL_RE = re.compile(r"^[A-Za-z_.$][\w.$@]*(\+0x[0-9a-f]+|\+\d+)?$")
_RELOC_RE = re.compile(r"^#?(:[a-z0-9_]+:)([A-Za-z_.$][\w.$+]*)$")


def normalize_reg(token: str) -> str | None:
    """Canonical register name, or None if ``token`` is not a register."""
    t = token.lower()
    t = REG_ALIASES.get(t, t)
    if t in ("sp", "xzr", "pc"):
        return t
    if _GPR_RE.match(t):
        return "x" + t[1:]
    if _SIMD_RE.match(t) or _SYSREG_RE.match(t):
        return t
    return None


@dataclass(frozen=True)
class Reg:
    name: str

    def text(self) -> str:
        return self.name


@dataclass(frozen=True)
class Imm:
    value: int

    def text(self) -> str:
        return f"#{self.value}"


@dataclass(frozen=True)
class Reloc:
    """Relocation-modified immediate such as ``:lo12:sym``."""

    modifier: str
    symbol: str

    def text(self) -> str:
        return f"{self.modifier}{self.symbol}"


@dataclass(frozen=True)
class Shift:
    op: str
    amount: int | None = None

    def text(self) -> str:
        return self.op if self.amount is None else f"{self.op} #{self.amount}"


@dataclass(frozen=True)
class Cond:
    code: str

    def text(self) -> str:
        return self.code


@dataclass(frozen=True)
class Mem:
    base: str
    offset: int = 0
    index: str | None = None
    extend: Shift | None = None
    reloc: Reloc | None = None
    mode: str = "offset"  # offset | pre | post

    def text(self) -> str:
        parts = [self.base]
        if self.index is not None:
            parts.append(self.index)
            if self.extend is not None:
                parts.append(self.extend.text())
        elif self.reloc is not None:
            parts.append(self.reloc.text())
        elif self.offset and self.mode != "post":
            parts.append(f"#{self.offset}")
        body = "[" + ", ".join(parts) + "]"
        if self.mode == "pre":
            return body + "!"
        if self.mode == "post":
            return f"{body}, #{self.offset}"
        return body

    @property
    def writeback(self) -> bool:
        return self.mode in ("pre", "post")


@dataclass(frozen=True)
class Label:
    """A code label or absolute target address (``name`` may be empty)."""

    name: str
    address: int | None = None

    def text(self) -> str:
        if self.address is None:
            return self.name
        if self.name:
            return f"{self.address:#x} <{self.name}>"
        return f"{self.address:#x}"


@dataclass(frozen=True)
class Raw:
    value: str

    def text(self) -> str:
        return self.value


Operand = Union[Reg, Imm, Reloc, Shift, Cond, Mem, Label, Raw]


class OperandError(ValueError):
    pass


def split_operands(text: str) -> list[str]:
    """Split on top-level commas (not inside ``[]`` or ``{}``)."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        out.append(tail)
    return out


def _parse_int(tok: str) -> int:
    tok = tok.lstrip("#")
    return int(tok, 0)


def _parse_shift(tok: str) -> Shift | None:
    parts = tok.split()
    if not parts or parts[0].lower() not in SHIFTS:
        return None
    if len(parts) == 1:
        return Shift(parts[0].lower())
    if len(parts) == 2 and _INT_RE.match(parts[1].lstrip("#").lower()):
        return Shift(parts[0].lower(), _parse_int(parts[1]))
    return None


def _parse_mem(tok: str) -> Mem:
    pre = tok.endswith("!")
    inner = tok[1: tok.rindex("]")]
    parts = split_operands(inner)
    base = normalize_reg(parts[0])
    if base is None:
        raise OperandError(f"bad base register in {tok!r}")
    mem = {"base": base, "mode": "pre" if pre else "offset"}
    for p in parts[1:]:
        reg = normalize_reg(p)
        reloc = _RELOC_RE.match(p)
        if reg is not None:
            mem["index"] = reg
        elif reloc:
            mem["reloc"] = Reloc(reloc.group(1), reloc.group(2))
        elif _INT_RE.match(p.lstrip("#").lower()):
            mem["offset"] = _parse_int(p)
        elif (sh := _parse_shift(p)) is not None:
            mem["extend"] = sh
        else:
            raise OperandError(f"cannot parse memory operand {tok!r}")
    return Mem(**mem)


def parse_operand(tok: str, branch_target: bool = False) -> Operand:
    t = tok.strip()
    low = t.lower()
    if t.startswith("["):
        return _parse_mem(t)
    if branch_target:
        return parse_target(t)
    reg = normalize_reg(low)
    if reg is not None:
        return Reg(reg)
    m = _RELOC_RE.match(t)
    if m:
        return Reloc(m.group(1), m.group(2))
    if low.startswith("#") or _INT_RE.match(low):
        try:
            return Imm(_parse_int(low))
        except ValueError:
            return Raw(t)
    if low in CONDITIONS:
        return Cond(low)
    sh = _parse_shift(t)
    if sh is not None:
        return sh
    if _LABEL_RE.match(t):
        return Label(t)
    return Raw(t)


def parse_target(tok: str) -> Operand:
    """Branch target: ``label``, ``0x1000``, or objdump's ``1000 <sym+0x8>``."""
    t = tok.strip()
    m = re.match(r"^(?:0x)?([0-9a-fA-F]+)\s+<([^>]+)>$", t)
    if m:
        return Label(m.group(2), int(m.group(1), 16))
    # direct-branch target slots never hold registers, so ``b1`` here is a label
    if t.lower().startswith("0x") or (len(t) >= 8 and _HEXADDR_RE.match(t.lower())):
        return Label("", int(t, 16))
    if t.startswith("#"):
        return Imm(_parse_int(t))
    if _LABEL_RE.match(t):
        return Label(t)
    raise OperandError(f"bad branch target {tok!r}")


def parse_operands(text: str, branch_target_index: int | None = None) -> tuple[Operand, ...]:
    toks = split_operands(text)
    ops: list[Operand] = []
    i = 0
    while i < len(toks):
        tok = toks[i]
        op = parse_operand(tok, branch_target=(i == branch_target_index))
        if isinstance(op, Mem) and op.mode == "offset" and i + 1 < len(toks) and tok.endswith("]"):
            nxt = toks[i + 1].lstrip("#").lower()
            if _INT_RE.match(nxt) and op.index is None and op.offset == 0 and op.reloc is None:
                op = Mem(op.base, _parse_int(nxt), mode="post")
                i += 1
        ops.append(op)
        i += 1
    return tuple(ops)


def format_operands(ops) -> str:
    return ", ".join(op.text() for op in ops)
