"""A minimal line-oriented program IR for context analysis.

Grammar (one item per line, ``#`` or ``//`` starts a comment)::

    ir 1
    record <name> <field>:<kind>[(<type>)] ...        kind: fptr | data
    func <name> <param>[:<kind>[(<type>)]] ...
      <dst> = const-addr <symbol>
      <dst> = stack-alloc
      <dst> = heap-alloc <allocator>
      <dst> = copy <src>
      <dst> = cast <src> [<type>]
      <dst> = load <record>.<field>
      [<dst> =] call <callee> <arg> ...
      [<dst> =] call *<value> <arg> ...
      store <record>.<field> <value>
      store local <var> <value>
      nullcheck <value>
    end

Types are written without spaces, e.g. ``fptr(void(*)(void*))``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

IR_VERSION = 1
FIELD_KINDS = ("fptr", "data")
OPS = ("const-addr", "stack-alloc", "heap-alloc", "copy", "cast", "load", "call", "store", "nullcheck")

_DECL_RE = re.compile(r"^([A-Za-z_][\w]*)(?::(fptr|data)(?:\((.*)\))?)?$")


class IrError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class FieldDecl:
    name: str
    kind: str = "data"
    type: str = ""

    @property
    def is_fptr(self) -> bool:
        return self.kind == "fptr"

    def text(self) -> str:
        if self.kind == "data" and not self.type:
            return f"{self.name}:data"
        return f"{self.name}:{self.kind}" + (f"({self.type})" if self.type else "")


@dataclass(frozen=True)
class RecordType:
    name: str
    fields: tuple[FieldDecl, ...]

    def field(self, name: str) -> FieldDecl | None:
        return next((f for f in self.fields if f.name == name), None)

    def index(self, name: str) -> int:
        return [f.name for f in self.fields].index(name)

    @property
    def fptr_fields(self) -> tuple[FieldDecl, ...]:
        return tuple(f for f in self.fields if f.is_fptr)


@dataclass(frozen=True)
class Instr:
    op: str
    dst: str | None = None
    args: tuple[str, ...] = ()
    line: int = 0

    @property
    def target(self) -> str:
        """``record.field`` or local name for stores and loads, callee for calls."""
        return self.args[0] if self.args else ""

    @property
    def indirect(self) -> bool:
        return self.op == "call" and self.target.startswith("*")

    @property
    def call_args(self) -> tuple[str, ...]:
        return self.args[1:] if self.op == "call" else ()

    def text(self) -> str:
        lhs = f"{self.dst} = " if self.dst else ""
        return f"{lhs}{self.op}" + ("" if not self.args else " " + " ".join(self.args))


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[FieldDecl, ...]
    body: tuple[Instr, ...]
    line: int = 0

    def param_index(self, name: str) -> int | None:
        for i, p in enumerate(self.params):
            if p.name == name:
                return i
        return None


@dataclass(frozen=True)
class IrProgram:
    records: tuple[RecordType, ...]
    functions: tuple[Function, ...]
    _rec: dict = field(default_factory=dict, repr=False, compare=False)
    _fn: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._rec.update({r.name: r for r in self.records})
        self._fn.update({f.name: f for f in self.functions})

    def record(self, name: str) -> RecordType | None:
        return self._rec.get(name)

    def function(self, name: str) -> Function | None:
        return self._fn.get(name)

    def field_decl(self, ref: str) -> FieldDecl | None:
        rec, _, fname = ref.partition(".")
        r = self.record(rec)
        return r.field(fname) if r else None

    def call_sites(self, callee: str):
        """(caller, instr) for every direct call to ``callee``."""
        for fn in self.functions:
            for ins in fn.body:
                if ins.op == "call" and ins.target == callee:
                    yield fn, ins

    def stores_to(self, record: str, field_name: str):
        ref = f"{record}.{field_name}"
        for fn in self.functions:
            for ins in fn.body:
                if ins.op == "store" and ins.target == ref:
                    yield fn, ins


def _parse_decl(tok: str, lineno: int) -> FieldDecl:
    m = _DECL_RE.match(tok)
    if not m:
        raise IrError(lineno, f"bad declaration {tok!r}")
    return FieldDecl(m.group(1), m.group(2) or "data", m.group(3) or "")


def _parse_instr(text: str, lineno: int, locals_: set, fn_params: set) -> Instr:
    toks = text.split()
    dst = None
    if len(toks) >= 3 and toks[1] == "=":
        dst, toks = toks[0], toks[2:]
    if not toks or toks[0] not in OPS:
        raise IrError(lineno, f"unknown instruction {text!r}")
    op, args = toks[0], tuple(toks[1:])
    arity = {"const-addr": (1, 1), "stack-alloc": (0, 0), "heap-alloc": (1, 1), "copy": (1, 1),
             "cast": (1, 2), "load": (1, 1), "nullcheck": (1, 1)}
    if op in arity:
        lo, hi = arity[op]
        if not lo <= len(args) <= hi:
            raise IrError(lineno, f"{op} takes {lo}..{hi} operands")
        if op != "nullcheck" and dst is None:
            raise IrError(lineno, f"{op} needs a destination")
    if op == "call" and not args:
        raise IrError(lineno, "call needs a callee")
    if op == "store":
        if len(args) == 3 and args[0] == "local":
            args = (args[1], args[2])
            op = "store-local"
        elif len(args) != 2:
            raise IrError(lineno, "store takes a target and a value")
        if dst is not None:
            raise IrError(lineno, "store has no destination")
    if dst is not None:
        locals_.add(dst)
    return Instr(op, dst, args, lineno)


def parse_ir(text: str) -> IrProgram:
    records: list[RecordType] = []
    functions: list[Function] = []
    cur = None
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = re.split(r"#|//", raw, maxsplit=1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if not seen_header:
            if toks[0] != "ir" or len(toks) != 2:
                raise IrError(lineno, "missing 'ir <version>' header")
            if toks[1] != str(IR_VERSION):
                raise IrError(lineno, f"unsupported IR version {toks[1]}")
            seen_header = True
            continue
        if cur is None:
            if toks[0] == "record":
                if len(toks) < 2:
                    raise IrError(lineno, "record needs a name")
                fields = tuple(_parse_decl(t, lineno) for t in toks[2:])
                if len({f.name for f in fields}) != len(fields):
                    raise IrError(lineno, "duplicate field name")
                records.append(RecordType(toks[1], fields))
            elif toks[0] == "func":
                if len(toks) < 2:
                    raise IrError(lineno, "func needs a name")
                params = tuple(_parse_decl(t, lineno) for t in toks[2:])
                cur = (toks[1], params, [], lineno, set(), {p.name for p in params})
            else:
                raise IrError(lineno, f"expected record or func, got {toks[0]!r}")
            continue
        if toks == ["end"]:
            name, params, body, fline, _, _ = cur
            functions.append(Function(name, params, tuple(body), fline))
            cur = None
            continue
        cur[2].append(_parse_instr(line, lineno, cur[4], cur[5]))
    if cur is not None:
        raise IrError(cur[3], f"function {cur[0]!r} is missing 'end'")
    if not seen_header and (records or functions):
        raise IrError(1, "missing 'ir <version>' header")
    program = IrProgram(tuple(records), tuple(functions))
    _check(program)
    return program


def _check(program: IrProgram) -> None:
    names = [f.name for f in program.functions]
    if len(set(names)) != len(names):
        dup = next(n for n in names if names.count(n) > 1)
        raise IrError(program.function(dup).line, f"duplicate function {dup!r}")
    rnames = [r.name for r in program.records]
    if len(set(rnames)) != len(rnames):
        raise IrError(0, "duplicate record")
    for fn in program.functions:
        for ins in fn.body:
            if ins.op in ("store", "load"):
                if program.field_decl(ins.target) is None:
                    raise IrError(ins.line, f"unknown record field {ins.target!r}")
            if ins.op == "call" and not ins.indirect:
                callee = program.function(ins.target)
                if callee is not None and len(ins.call_args) != len(callee.params):
                    raise IrError(ins.line, f"call to {callee.name} passes {len(ins.call_args)} arguments, "
                                            f"expected {len(callee.params)}")


def format_ir(program: IrProgram) -> str:
    out = [f"ir {IR_VERSION}"]
    for r in program.records:
        out.append(" ".join(["record", r.name, *(f.text() for f in r.fields)]))
    for fn in program.functions:
        out.append(" ".join(["func", fn.name, *(p.text() if p.kind != "data" or p.type else p.name
                                              for p in fn.params)]))
        for ins in fn.body:
            if ins.op == "store-local":
                out.append(f"  store local {ins.args[0]} {ins.args[1]}")
            else:
                out.append("  " + ins.text())
        out.append("end")
    return "\n".join(out) + "\n"
