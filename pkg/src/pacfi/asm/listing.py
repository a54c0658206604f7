"""Listing reader and canonical writer.

Canonical format::

    // comment
    1000 el1_irq:
    .Lloop:
      1000: sub x0, x0, #1
      1004: cbnz x0, .Lloop

The reader also accepts ``objdump -d`` output: 16-digit address prefixes,
``<name>`` headers, tab separators, an encoding column and ``//`` comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from pacfi.asm.operands import Label, OperandError, format_operands, parse_operands

BRANCH_TARGET_INDEX = {
    "b": 0, "bl": 0, "cbz": 1, "cbnz": 1, "tbz": 2, "tbnz": 2,
}

_HEADER_RE = re.compile(r"^(?:0x)?([0-9a-fA-F]+)\s+<?([^\s<>:]+)>?:\s*$")
_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$@]*):\s*$")
_INSN_RE = re.compile(r"^(?:0x)?([0-9a-fA-F]+):\s+(?:[0-9a-fA-F]{8}\s+)?([a-zA-Z][\w.]*)(?:\s+(.*?))?\s*$")
_NOISE_RE = re.compile(r"^(Disassembly of section\b|.*:\s+file format\b|\.\.\.$)")


class ListingError(ValueError):
    def __init__(self, lineno: int, message: str, line: str = ""):
        super().__init__(f"line {lineno}: {message}" + (f": {line.strip()!r}" if line else ""))
        self.lineno = lineno


@dataclass(frozen=True)
class Instruction:
    address: int
    mnemonic: str
    operands: tuple = ()
    raw_text: str = field(default="", compare=False)

    def text(self) -> str:
        ops = format_operands(self.operands)
        return f"{self.mnemonic} {ops}" if ops else self.mnemonic

    def __str__(self) -> str:
        return f"{self.address:x}: {self.text()}"


@dataclass(frozen=True)
class FunctionListing:
    name: str
    instructions: tuple[Instruction, ...]
    labels: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.instructions:
            raise ValueError(f"function {self.name!r} has no instructions")

    @property
    def entry(self) -> int:
        return self.instructions[0].address

    def index_of(self, address: int) -> int | None:
        for i, ins in enumerate(self.instructions):
            if ins.address == address:
                return i
        return None

    def resolve(self, label: Label) -> int | None:
        """Address a branch label refers to within this function, if any."""
        if label.address is not None:
            return label.address
        return self.labels.get(label.name)

    def __len__(self) -> int:
        return len(self.instructions)


def _strip_comment(line: str) -> str:
    for marker in ("//", ";"):
        idx = line.find(marker)
        if idx >= 0:
            line = line[:idx]
    return line.rstrip()


def parse_instruction(address: int, mnemonic: str, operand_text: str | None, raw: str = "") -> Instruction:
    mnemonic = mnemonic.lower()
    target = BRANCH_TARGET_INDEX.get(mnemonic)
    if target is None and (mnemonic.startswith("b.") or mnemonic.startswith("bc.")):
        target = 0
    ops = parse_operands(operand_text or "", branch_target_index=target)
    return Instruction(address, mnemonic, ops, raw or f"{address:x}: {mnemonic} {operand_text or ''}".rstrip())


def parse_listing(text: str) -> list[FunctionListing]:
    """Parse a listing into functions, in order of appearance."""
    functions: list[FunctionListing] = []
    seen: set[str] = set()
    name: str | None = None
    insns: list[Instruction] = []
    labels: dict[str, int] = {}
    pending: list[str] = []
    header_line = 0

    def close(lineno: int) -> None:
        if name is None:
            return
        if not insns:
            raise ListingError(header_line, f"function {name!r} has no instructions")
        if pending:
            raise ListingError(lineno, f"label {pending[0]!r} is not followed by an instruction")
        functions.append(FunctionListing(name, tuple(insns), dict(labels)))

    for lineno, line in enumerate(text.splitlines(), 1):
        body = _strip_comment(line).strip()
        if not body or line.lstrip().startswith("#") or _NOISE_RE.match(body):
            continue
        m = _INSN_RE.match(body)
        if m:
            if name is None:
                raise ListingError(lineno, "instruction outside any function", line)
            addr = int(m.group(1), 16)
            if insns and addr <= insns[-1].address:
                raise ListingError(lineno, f"address {addr:#x} does not increase", line)
            try:
                ins = parse_instruction(addr, m.group(2), m.group(3), line.rstrip("\n"))
            except OperandError as exc:
                raise ListingError(lineno, str(exc), line) from None
            for lab in pending:
                labels[lab] = addr
            pending.clear()
            insns.append(ins)
            continue
        m = _HEADER_RE.match(body)
        if m:
            close(lineno)
            fname = m.group(2)
            if fname in seen:
                raise ListingError(lineno, f"duplicate function {fname!r}", line)
            seen.add(fname)
            name, insns, labels, pending, header_line = fname, [], {}, [], lineno
            continue
        m = _LABEL_RE.match(body)
        if m:
            if name is None:
                raise ListingError(lineno, "label outside any function", line)
            pending.append(m.group(1))
            continue
        raise ListingError(lineno, "unrecognized line", line)
    close(len(text.splitlines()) + 1)
    return functions


def format_listing(functions) -> str:
    """Render functions in the canonical listing format."""
    out: list[str] = []
    for fn in functions:
        by_addr: dict[int, list[str]] = {}
        for lab, addr in sorted(fn.labels.items(), key=lambda kv: (kv[1], kv[0])):
            by_addr.setdefault(addr, []).append(lab)
        out.append(f"{fn.entry:x} {fn.name}:")
        for ins in fn.instructions:
            for lab in by_addr.get(ins.address, ()):
                out.append(f"{lab}:")
            out.append(f"  {ins}")
        out.append("")
    return "\n".join(out)


def parse_snippet(lines, name: str = "snippet", base: int = 0x1000) -> FunctionListing:
    """Build a function from bare instruction text, four bytes apart.

    Lines ending in ``:`` become local labels.
    """
    parts = [f"{base:x} {name}:"]
    addr = base
    for raw in lines:
        raw = raw.strip()
        if not raw:
            continue
        if raw.endswith(":"):
            parts.append(raw)
            continue
        parts.append(f"  {addr:x}: {raw}")
        addr += 4
    return parse_listing("\n".join(parts))[0]
